#include "peqa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <span>

#include "peqa/error.hpp"

namespace peqa {
namespace {

void CheckFinite(double loss, int step) {
  if (!std::isfinite(loss)) {
    throw Error(ErrorKind::kDivergence,
                "loss became non-finite at step " + std::to_string(step));
  }
}

}  // namespace

template <typename Real>
TrainLog TrainAdapters(ToyModel<Real>& model, const std::vector<Sample>& dataset,
                       const TrainHyper& hyper) {
  if (dataset.empty()) throw Error(ErrorKind::kInvalidConfig, "empty dataset");
  if (hyper.steps < 0 || hyper.batch_size < 1 || hyper.learning_rate < 0) {
    throw Error(ErrorKind::kInvalidConfig, "invalid training hyper-parameters");
  }
  std::vector<Tensor<Real>*> trainable;
  model.ForEachTensor([&trainable](Tensor<Real>& t) {
    if (t.trainable) trainable.push_back(&t);
  });
  std::vector<Matrix<Real>> first_moment, second_moment;
  for (auto* t : trainable) {
    first_moment.push_back(Matrix<Real>::Zero(t->value.rows(), t->value.cols()));
    second_moment.push_back(Matrix<Real>::Zero(t->value.rows(), t->value.cols()));
  }

  TrainLog log;
  log.trainable_parameters = model.trainable_count();
  log.initial_loss = static_cast<double>(model.Loss(dataset));
  CheckFinite(log.initial_loss, 0);

  const std::size_t batch = std::min<std::size_t>(hyper.batch_size, dataset.size());
  const std::size_t steps_per_epoch = (dataset.size() + batch - 1) / batch;
  std::vector<Sample> current;
  std::size_t cursor = 0;
  double epoch_sum = 0.0;
  std::size_t epoch_steps = 0;
  const auto lr = static_cast<Real>(hyper.learning_rate);
  for (int step = 1; step <= hyper.steps; ++step) {
    current.clear();
    for (std::size_t i = 0; i < batch; ++i) {
      current.push_back(dataset[cursor]);
      cursor = (cursor + 1) % dataset.size();
    }
    const double loss = static_cast<double>(model.LossAndGradient(current));
    CheckFinite(loss, step);
    log.step_losses.push_back(loss);

    if (hyper.optimizer == Optimizer::kSgd) {
      for (auto* t : trainable) t->value -= lr * t->grad;
    } else {
      const auto b1 = static_cast<Real>(hyper.beta1);
      const auto b2 = static_cast<Real>(hyper.beta2);
      const auto correction1 = Real(1) - static_cast<Real>(std::pow(hyper.beta1, step));
      const auto correction2 = Real(1) - static_cast<Real>(std::pow(hyper.beta2, step));
      const auto eps = static_cast<Real>(hyper.adam_eps);
      for (std::size_t i = 0; i < trainable.size(); ++i) {
        auto& g = trainable[i]->grad;
        first_moment[i] = b1 * first_moment[i] + (Real(1) - b1) * g;
        second_moment[i] =
            b2 * second_moment[i] + (Real(1) - b2) * g.cwiseProduct(g);
        trainable[i]->value.array() -=
            lr * (first_moment[i].array() / correction1) /
            ((second_moment[i].array() / correction2).sqrt() + eps);
      }
    }

    epoch_sum += loss;
    if (++epoch_steps == steps_per_epoch) {
      log.epoch_losses.push_back(epoch_sum / static_cast<double>(epoch_steps));
      epoch_sum = 0.0;
      epoch_steps = 0;
    }
  }
  if (epoch_steps > 0) {
    log.epoch_losses.push_back(epoch_sum / static_cast<double>(epoch_steps));
  }
  log.final_loss = static_cast<double>(model.Loss(dataset));
  CheckFinite(log.final_loss, hyper.steps);
  return log;
}

template TrainLog TrainAdapters<float>(ToyModel<float>&, const std::vector<Sample>&,
                                       const TrainHyper&);
template TrainLog TrainAdapters<double>(ToyModel<double>&, const std::vector<Sample>&,
                                        const TrainHyper&);

std::vector<Sample> MakeCopyTask(int count, int length, int vocab_size,
                                 std::uint64_t seed) {
  if (count < 1 || length < 1 || vocab_size < 2) {
    throw Error(ErrorKind::kInvalidConfig, "copy task needs count, length >= 1 and vocab >= 2");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> token(1, vocab_size - 1);
  std::vector<Sample> out(static_cast<std::size_t>(count));
  for (auto& sample : out) {
    for (int i = 0; i < length; ++i) sample.source.push_back(token(rng));
    sample.target = sample.source;
  }
  return out;
}

GradCheckReport CheckAdapterGradients(const ToyConfig& config, double eps) {
  ToyModel<double> model = ToyModel<double>::Build(config);
  model.RandomizeAdapters(config.seed + 1, 0.5);
  const auto batch =
      MakeCopyTask(2, std::min(5, config.max_seq_len), config.vocab_size, config.seed + 2);
  return GradCheck(model, batch, eps);
}

nlohmann::ordered_json TrainLogToJson(const TrainLog& log) {
  return {{"initial_loss", log.initial_loss},
          {"final_loss", log.final_loss},
          {"trainable_parameters", log.trainable_parameters},
          {"epoch_losses", log.epoch_losses},
          {"step_losses", log.step_losses}};
}

}  // namespace peqa
