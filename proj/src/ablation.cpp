#include "peqa/ablation.hpp"

#include "peqa/error.hpp"
#include "peqa/io.hpp"

namespace peqa {
namespace {

std::vector<int> Range(int first, int last) {
  std::vector<int> out;
  for (int i = first; i <= last; ++i) out.push_back(i);
  return out;
}

std::string RangeLabel(const std::vector<int>& layers) {
  if (layers.empty()) return "-";
  return std::to_string(layers.front()) + "-" + std::to_string(layers.back());
}

void CheckPrefix(const std::vector<int>& layers, int first, int count,
                 const char* module) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i] != first + static_cast<int>(i)) {
      throw Error(ErrorKind::kInvalidConfig,
                  std::string(module) + " removals must be contiguous from layer " +
                      std::to_string(first));
    }
  }
  if (static_cast<int>(layers.size()) > count) {
    throw Error(ErrorKind::kInvalidConfig,
                std::string(module) + " removals exceed the module's " +
                    std::to_string(count) + " layers");
  }
}

std::vector<int> ReadIntArray(const nlohmann::json& j, const char* key) {
  std::vector<int> out;
  auto it = j.find(key);
  if (it == j.end()) return out;
  if (!it->is_array()) {
    throw Error(ErrorKind::kSchemaError, std::string("'") + key + "' must be an array");
  }
  for (const auto& v : *it) {
    if (!v.is_number_integer()) {
      throw Error(ErrorKind::kSchemaError,
                  std::string("'") + key + "' must hold integers");
    }
    out.push_back(v.get<int>());
  }
  return out;
}

}  // namespace

std::string AblationConfig::label() const {
  return "(" + RangeLabel(removed_encoder) + ", " + RangeLabel(removed_decoder) + ")";
}

void ValidateAblation(const AblationConfig& config, int n_encoder_layers,
                      int n_decoder_layers) {
  CheckPrefix(config.removed_encoder, 0, n_encoder_layers, "encoder");
  CheckPrefix(config.removed_decoder, n_encoder_layers, n_decoder_layers, "decoder");
}

std::vector<AblationConfig> UniformAblationPlan(const ModelDims& dims) {
  dims.Validate();
  if (dims.n_encoder_layers != dims.n_decoder_layers) {
    throw Error(ErrorKind::kInvalidConfig,
                "uniform ablation needs equal encoder and decoder depth");
  }
  const int n = dims.n_encoder_layers;
  std::vector<AblationConfig> plan;
  for (int k = 0; k < n; ++k) {
    plan.push_back({Range(0, k), Range(n, n + k)});
  }
  return plan;
}

std::vector<AblationConfig> GridAblationPlan(const ModelDims& dims, int levels) {
  dims.Validate();
  const int enc = dims.n_encoder_layers;
  const int dec = dims.n_decoder_layers;
  if (levels < 1 || levels > enc || levels > dec) {
    throw Error(ErrorKind::kInvalidConfig,
                "grid ablation levels must be within 1..min(encoder, decoder) depth");
  }
  std::vector<AblationConfig> plan;
  for (int s = enc + dec - levels; s < enc + dec; ++s) {
    for (int q = enc - levels; q < enc; ++q) {
      plan.push_back({Range(0, q), Range(enc, s)});
    }
  }
  return plan;
}

AdapterSet ApplyAblation(const AdapterSet& set, const AblationConfig& config) {
  ValidateAblation(config, set.n_encoder_layers(), set.n_decoder_layers());
  AdapterSet out = set;
  for (int layer : config.removed_encoder) out.erase(layer);
  for (int layer : config.removed_decoder) out.erase(layer);
  return out;
}

std::vector<CostedAblation> CostPlan(const std::vector<AblationConfig>& plan,
                                     const ModelDims& dims) {
  const AdapterSet full = AdapterSet::Full(dims.n_encoder_layers, dims.n_decoder_layers);
  std::vector<CostedAblation> out;
  out.reserve(plan.size());
  for (const auto& config : plan) {
    out.push_back({config, CountAdapterParams(dims, ApplyAblation(full, config))});
  }
  return out;
}

std::string ManifestJsonl(const std::vector<CostedAblation>& costed) {
  std::string out;
  for (const auto& entry : costed) {
    nlohmann::ordered_json line = {{"label", entry.config.label()},
                                   {"removed_encoder", entry.config.removed_encoder},
                                   {"removed_decoder", entry.config.removed_decoder},
                                   {"trainable", entry.cost.count},
                                   {"percent", entry.cost.percent}};
    out += DumpJson(line);
    out.push_back('\n');
  }
  return out;
}

AblationConfig AblationFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kSchemaError, "ablation must be an object");
  return {ReadIntArray(j, "removed_encoder"), ReadIntArray(j, "removed_decoder")};
}

ModelDims DimsFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kSchemaError, "dims must be an object");
  ModelDims dims = ReferenceDims();
  auto read = [&j](const char* key, auto& field) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_number_integer()) {
      throw Error(ErrorKind::kSchemaError, std::string("'") + key + "' must be an integer");
    }
    field = it->get<std::remove_reference_t<decltype(field)>>();
  };
  read("d_model", dims.d_model);
  read("bottleneck", dims.bottleneck);
  read("n_encoder_layers", dims.n_encoder_layers);
  read("n_decoder_layers", dims.n_decoder_layers);
  read("adapters_per_layer", dims.adapters_per_layer);
  read("base_total_params", dims.base_total_params);
  dims.Validate();
  return dims;
}

}  // namespace peqa
