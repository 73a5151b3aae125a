#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "peqa/adapter.hpp"

namespace peqa {

// Removes adapters from the first layers of the encoder and/or decoder.
// `removed_encoder` is empty or {0..q}; `removed_decoder` is empty or
// {E..s} where E is the number of encoder layers.
struct AblationConfig {
  std::vector<int> removed_encoder;
  std::vector<int> removed_decoder;

  // "(0-6, 12-18)"; an empty range prints as "-".
  std::string label() const;
  friend bool operator==(const AblationConfig&, const AblationConfig&) = default;
};

// Throws kInvalidConfig if a range is not contiguous from its module's first
// layer or falls outside the module.
void ValidateAblation(const AblationConfig& config, int n_encoder_layers,
                      int n_decoder_layers);

// k = 0..n-1 removes encoder 0..k and decoder E..E+k. Needs E == D.
std::vector<AblationConfig> UniformAblationPlan(const ModelDims& dims);

// Encoder removals 0..q for the last `levels` values of q, crossed with
// decoder removals E..s likewise. Starts from the smallest removal on both
// sides; the encoder range grows fastest, then the decoder range.
std::vector<AblationConfig> GridAblationPlan(const ModelDims& dims,
                                             int levels = 6);

// Removes the configured layers from `set`.
AdapterSet ApplyAblation(const AdapterSet& set, const AblationConfig& config);

struct CostedAblation {
  AblationConfig config;
  AdapterCount cost;
};

std::vector<CostedAblation> CostPlan(const std::vector<AblationConfig>& plan,
                                     const ModelDims& dims);

// One JSON object per line: label, removed_encoder, removed_decoder,
// trainable, percent.
std::string ManifestJsonl(const std::vector<CostedAblation>& costed);

// {"removed_encoder": [...], "removed_decoder": [...]}; both optional.
AblationConfig AblationFromJson(const nlohmann::json& j);
ModelDims DimsFromJson(const nlohmann::json& j);

}  // namespace peqa
