#include "peqa/adapter.hpp"

#include <cmath>
#include <numbers>

#include "peqa/error.hpp"

namespace peqa {

std::string ActivationName(Activation activation) {
  return activation == Activation::kRelu ? "relu" : "gelu";
}

Activation ParseActivation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "gelu") return Activation::kGelu;
  throw Error(ErrorKind::kInvalidConfig, "unknown activation '" + name + "'");
}

template <typename Real>
Real Activate(Activation activation, Real x) {
  if (activation == Activation::kRelu) return x > Real(0) ? x : Real(0);
  return Real(0.5) * x * (Real(1) + std::erf(x / std::numbers::sqrt2_v<Real>));
}

template <typename Real>
Real ActivateDerivative(Activation activation, Real x) {
  if (activation == Activation::kRelu) return x > Real(0) ? Real(1) : Real(0);
  const Real cdf = Real(0.5) * (Real(1) + std::erf(x / std::numbers::sqrt2_v<Real>));
  const Real pdf = std::exp(Real(-0.5) * x * x) * std::numbers::inv_sqrtpi_v<Real> /
                   std::numbers::sqrt2_v<Real>;
  return cdf + x * pdf;
}

template <typename Real>
Vector<Real> AdapterForward(const Vector<Real>& x, const AdapterParams<Real>& p,
                            Activation activation) {
  const auto d = x.size();
  const auto b = p.down.cols();
  if (p.down.rows() != d || p.down_bias.size() != b || p.up.rows() != b ||
      p.up.cols() != d || p.up_bias.size() != d) {
    throw Error(ErrorKind::kDimensionMismatch,
                "adapter shapes do not match input width " + std::to_string(d));
  }
  Vector<Real> hidden = p.down.transpose() * x + p.down_bias;
  for (Eigen::Index i = 0; i < hidden.size(); ++i) {
    hidden[i] = Activate(activation, hidden[i]);
  }
  return x + p.up.transpose() * hidden + p.up_bias;
}

template float Activate<float>(Activation, float);
template double Activate<double>(Activation, double);
template float ActivateDerivative<float>(Activation, float);
template double ActivateDerivative<double>(Activation, double);
template Vector<float> AdapterForward<float>(const Vector<float>&,
                                             const AdapterParams<float>&,
                                             Activation);
template Vector<double> AdapterForward<double>(const Vector<double>&,
                                               const AdapterParams<double>&,
                                               Activation);

std::int64_t AdapterParamCount(std::int64_t d_model, std::int64_t bottleneck) {
  return 2 * d_model * bottleneck + bottleneck + d_model;
}

void ModelDims::Validate() const {
  if (d_model < 1 || bottleneck < 1 || n_encoder_layers < 1 ||
      n_decoder_layers < 1 || adapters_per_layer < 1 || base_total_params < 1) {
    throw Error(ErrorKind::kInvalidConfig, "model dimensions must be positive");
  }
}

ModelDims ReferenceDims() { return ModelDims{}; }

AdapterSet::AdapterSet(int n_encoder_layers, int n_decoder_layers)
    : n_encoder_(n_encoder_layers), n_decoder_(n_decoder_layers) {
  if (n_encoder_ < 0 || n_decoder_ < 0) {
    throw Error(ErrorKind::kInvalidConfig, "layer counts must be non-negative");
  }
}

AdapterSet AdapterSet::Full(int n_encoder_layers, int n_decoder_layers) {
  AdapterSet set(n_encoder_layers, n_decoder_layers);
  for (int layer = 0; layer < n_encoder_layers + n_decoder_layers; ++layer) {
    set.active_.insert(layer);
  }
  return set;
}

AdapterSet AdapterSet::FromIndices(int n_encoder_layers, int n_decoder_layers,
                                   std::initializer_list<int> layers) {
  return FromIndices(n_encoder_layers, n_decoder_layers,
                     std::vector<int>(layers));
}

AdapterSet AdapterSet::FromIndices(int n_encoder_layers, int n_decoder_layers,
                                   const std::vector<int>& layers) {
  AdapterSet set(n_encoder_layers, n_decoder_layers);
  for (int layer : layers) {
    set.CheckRange(layer);
    if (!set.active_.insert(layer).second) {
      throw Error(ErrorKind::kInvalidConfig,
                  "adapter layer " + std::to_string(layer) + " listed twice");
    }
  }
  return set;
}

void AdapterSet::insert(int layer) {
  CheckRange(layer);
  active_.insert(layer);
}

void AdapterSet::CheckRange(int layer) const {
  if (layer < 0 || layer >= n_encoder_ + n_decoder_) {
    throw Error(ErrorKind::kInvalidConfig,
                "adapter layer " + std::to_string(layer) + " outside 0.." +
                    std::to_string(n_encoder_ + n_decoder_ - 1));
  }
}

AdapterCount CountAdapterParams(const ModelDims& dims, const AdapterSet& set) {
  dims.Validate();
  if (set.n_encoder_layers() != dims.n_encoder_layers ||
      set.n_decoder_layers() != dims.n_decoder_layers) {
    throw Error(ErrorKind::kDimensionMismatch,
                "adapter set covers " + std::to_string(set.n_encoder_layers()) +
                    "+" + std::to_string(set.n_decoder_layers()) +
                    " layers, dims have " +
                    std::to_string(dims.n_encoder_layers) + "+" +
                    std::to_string(dims.n_decoder_layers));
  }
  AdapterCount out;
  out.count = static_cast<std::int64_t>(set.size()) * dims.adapters_per_layer *
              AdapterParamCount(dims.d_model, dims.bottleneck);
  const double raw = 100.0 * static_cast<double>(out.count) /
                     static_cast<double>(dims.base_total_params);
  out.percent = std::round(raw * 100.0) / 100.0;
  return out;
}

}  // namespace peqa
