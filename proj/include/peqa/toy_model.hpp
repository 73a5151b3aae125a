#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "peqa/adapter.hpp"

namespace peqa {

// A small post-norm encoder-decoder standing in for a frozen pretrained
// model. Every tensor is frozen except the adapter weights.
struct ToyConfig {
  int vocab_size = 64;
  int d_model = 32;
  int n_heads = 2;
  int d_ff = 64;
  int n_encoder_layers = 2;
  int n_decoder_layers = 2;
  int bottleneck = 8;
  int max_seq_len = 32;
  std::uint64_t seed = 6;
  Activation adapter_activation = Activation::kRelu;
  // Defaults to every layer when unset.
  std::optional<AdapterSet> adapters;

  AdapterSet active_adapters() const;
  ModelDims dims(std::int64_t base_total_params) const;
  // Throws kInvalidConfig.
  void Validate() const;
};

inline constexpr int kBosId = 0;

struct Sample {
  std::vector<int> source;
  std::vector<int> target;
};

template <typename Real>
struct Tensor {
  std::string name;
  Matrix<Real> value;
  Matrix<Real> grad;
  bool trainable = false;

  std::int64_t size() const { return value.size(); }
};

template <typename Real>
struct Linear {
  Tensor<Real> weight;  // in x out
  Tensor<Real> bias;    // 1 x out
};

template <typename Real>
struct LayerNormParams {
  Tensor<Real> gain;
  Tensor<Real> bias;
};

template <typename Real>
struct AttentionParams {
  Linear<Real> query, key, value, output;
};

template <typename Real>
struct FeedForwardParams {
  Linear<Real> in, out;
};

template <typename Real>
struct AdapterBlock {
  Linear<Real> down;  // d x b
  Linear<Real> up;    // b x d

  AdapterParams<Real> params() const;
};

template <typename Real>
struct EncoderLayer {
  AttentionParams<Real> self_attention;
  LayerNormParams<Real> attention_norm;
  FeedForwardParams<Real> feed_forward;
  LayerNormParams<Real> output_norm;
  std::optional<AdapterBlock<Real>> attention_adapter;
  std::optional<AdapterBlock<Real>> feed_forward_adapter;
};

template <typename Real>
struct DecoderLayer {
  AttentionParams<Real> self_attention;
  LayerNormParams<Real> self_attention_norm;
  AttentionParams<Real> cross_attention;
  LayerNormParams<Real> cross_attention_norm;
  FeedForwardParams<Real> feed_forward;
  LayerNormParams<Real> output_norm;
  std::optional<AdapterBlock<Real>> attention_adapter;
  std::optional<AdapterBlock<Real>> feed_forward_adapter;
};

template <typename Real>
struct ForwardResult {
  Real loss = 0;
  Matrix<Real> logits;  // target_len x vocab
};

struct TensorSummary {
  std::string name;
  bool trainable = false;
  std::int64_t elements = 0;
};

struct FreezeReport {
  std::vector<TensorSummary> tensors;
  std::int64_t trainable_total = 0;
  std::int64_t frozen_total = 0;
  // Trainable share of this model's own parameter count.
  double trainable_percent = 0.0;
};

template <typename Real>
class ToyModel {
 public:
  // Deterministic in config.seed. Base weights do not depend on which
  // adapters are active; adapter up-projections start at zero.
  static ToyModel Build(const ToyConfig& config);

  const ToyConfig& config() const { return config_; }

  // Mean token cross-entropy with teacher forcing: the decoder reads
  // [BOS, target[0..n-2]] and predicts target.
  ForwardResult<Real> Forward(const Sample& sample) const;
  Real Loss(std::span<const Sample> batch) const;

  // Zeroes gradients, then accumulates d(mean batch loss)/d(theta) into the
  // trainable tensors only. Frozen gradients stay exactly zero.
  Real LossAndGradient(std::span<const Sample> batch);

  void ForEachTensor(const std::function<void(Tensor<Real>&)>& fn);
  void ForEachTensor(const std::function<void(const Tensor<Real>&)>& fn) const;

  std::int64_t trainable_count() const;
  std::int64_t frozen_count() const;
  // Concatenated gradients of the trainable tensors, in ForEachTensor order.
  std::vector<Real> TrainableGradient() const;
  FreezeReport Report() const;

  // Draws fresh adapter weights (including up-projections) from `seed`.
  // Used by gradient checks, where zero up-projections would hide errors.
  void RandomizeAdapters(std::uint64_t seed, Real scale);

 private:
  struct Cache;

  ToyConfig config_;
  Tensor<Real> token_embedding_;     // vocab x d
  Tensor<Real> encoder_positions_;   // max_len x d
  Tensor<Real> decoder_positions_;   // max_len x d
  LayerNormParams<Real> encoder_embedding_norm_;
  LayerNormParams<Real> decoder_embedding_norm_;
  std::vector<EncoderLayer<Real>> encoder_;
  std::vector<DecoderLayer<Real>> decoder_;
  Tensor<Real> output_bias_;         // 1 x vocab; logits = h E^T + bias

  template <typename Self, typename Fn>
  static void VisitTensors(Self& self, Fn&& fn);

  Real RunForward(const Sample& sample, Cache* cache,
                  Matrix<Real>* logits) const;
  void RunBackward(const Sample& sample, const Cache& cache, Real scale);
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::int64_t checked = 0;
  // Largest |grad| found on any frozen tensor; the freezing contract wants 0.
  double max_frozen_gradient = 0.0;
  double eps = 0.0;
  double floor = 0.0;
};

// Compares analytic gradients of every trainable element with central
// differences (L(theta+eps) - L(theta-eps)) / 2eps. Relative error is
// |a - n| / max(|a|, |n|, floor).
GradCheckReport GradCheck(const ToyModel<double>& model,
                          std::span<const Sample> batch, double eps = 1e-5,
                          double floor = 1e-6);

}  // namespace peqa
