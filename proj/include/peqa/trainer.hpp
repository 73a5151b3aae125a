#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "peqa/toy_model.hpp"

namespace peqa {

enum class Optimizer { kSgd, kAdam };

struct TrainHyper {
  int steps = 200;
  int batch_size = 32;
  double learning_rate = 1e-2;
  Optimizer optimizer = Optimizer::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct TrainLog {
  double initial_loss = 0.0;  // full-dataset loss before the first update
  double final_loss = 0.0;    // full-dataset loss after the last update
  std::vector<double> step_losses;
  std::vector<double> epoch_losses;  // mean step loss per pass over the data
  std::int64_t trainable_parameters = 0;
};

// Updates trainable tensors only; frozen tensors are never written. Batches
// are taken in dataset order, wrapping around. Throws kDivergence if a loss
// becomes non-finite.
template <typename Real>
TrainLog TrainAdapters(ToyModel<Real>& model, const std::vector<Sample>& dataset,
                       const TrainHyper& hyper);

// `count` random sequences over tokens 1..vocab-1 with target = source.
std::vector<Sample> MakeCopyTask(int count, int length, int vocab_size,
                                 std::uint64_t seed);

// The standard adapter gradient check: a double-precision model built from
// `config`, adapters redrawn from config.seed + 1 at scale 0.5, and two copy
// sequences of length min(5, max_seq_len) drawn from config.seed + 2.
GradCheckReport CheckAdapterGradients(const ToyConfig& config, double eps = 1e-5);

nlohmann::ordered_json TrainLogToJson(const TrainLog& log);

}  // namespace peqa
