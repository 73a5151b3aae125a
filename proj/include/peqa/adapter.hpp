#pragma once

#include <cstdint>
#include <initializer_list>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace peqa {

template <typename Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

enum class Activation { kRelu, kGelu };

std::string ActivationName(Activation activation);
// Throws kInvalidConfig for anything but "relu" or "gelu".
Activation ParseActivation(const std::string& name);

template <typename Real>
Real Activate(Activation activation, Real x);
template <typename Real>
Real ActivateDerivative(Activation activation, Real x);

// Bottleneck adapter weights for model width d and bottleneck width b.
template <typename Real>
struct AdapterParams {
  Matrix<Real> down;     // d x b
  Vector<Real> down_bias;  // b
  Matrix<Real> up;       // b x d
  Vector<Real> up_bias;  // d

  std::int64_t parameter_count() const {
    return down.size() + down_bias.size() + up.size() + up_bias.size();
  }
};

// y = x + up^T act(down^T x + down_bias) + up_bias. Throws
// kDimensionMismatch when the shapes disagree.
template <typename Real>
Vector<Real> AdapterForward(const Vector<Real>& x, const AdapterParams<Real>& p,
                            Activation activation = Activation::kRelu);

// 2*d*b + b + d.
std::int64_t AdapterParamCount(std::int64_t d_model, std::int64_t bottleneck);

struct ModelDims {
  std::int64_t d_model = 1024;
  std::int64_t bottleneck = 64;
  int n_encoder_layers = 12;
  int n_decoder_layers = 12;
  int adapters_per_layer = 2;
  std::int64_t base_total_params = 406'291'456;

  int total_layers() const { return n_encoder_layers + n_decoder_layers; }
  // Throws kInvalidConfig unless every field is positive.
  void Validate() const;
};

// BART-large with Houlsby adapters of bottleneck 64.
ModelDims ReferenceDims();

// Layers that carry adapters. Encoder layers are numbered 0..E-1 and decoder
// layers E..E+D-1, so with 12+12 layers the decoder owns 12..23.
class AdapterSet {
 public:
  AdapterSet(int n_encoder_layers, int n_decoder_layers);

  static AdapterSet Full(int n_encoder_layers, int n_decoder_layers);
  // Throws kInvalidConfig on out-of-range or duplicated indices.
  static AdapterSet FromIndices(int n_encoder_layers, int n_decoder_layers,
                                std::initializer_list<int> layers);
  static AdapterSet FromIndices(int n_encoder_layers, int n_decoder_layers,
                                const std::vector<int>& layers);

  int n_encoder_layers() const { return n_encoder_; }
  int n_decoder_layers() const { return n_decoder_; }
  bool is_encoder_layer(int layer) const { return layer < n_encoder_; }

  bool contains(int layer) const { return active_.contains(layer); }
  std::size_t size() const { return active_.size(); }
  bool empty() const { return active_.empty(); }
  const std::set<int>& layers() const { return active_; }

  void insert(int layer);
  void erase(int layer) { active_.erase(layer); }

  friend bool operator==(const AdapterSet&, const AdapterSet&) = default;

 private:
  void CheckRange(int layer) const;

  int n_encoder_;
  int n_decoder_;
  std::set<int> active_;
};

struct AdapterCount {
  std::int64_t count = 0;
  double percent = 0.0;  // of dims.base_total_params, rounded to 2 decimals
};

// count = |active layers| * adapters_per_layer * (2*d*b + b + d).
// Throws kDimensionMismatch if the set was built for different layer counts.
AdapterCount CountAdapterParams(const ModelDims& dims, const AdapterSet& set);

}  // namespace peqa
