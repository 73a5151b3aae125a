#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "json.hpp"
#include "peqa/toy_model.hpp"

namespace peqa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;

// Runs one subcommand. `args` excludes the program name. Structured output
// goes to `out` (or the --out file), human-readable notes and JSON errors to
// `err`.
int Dispatch(std::span<const std::string> args, std::ostream& out,
             std::ostream& err);

// Overrides ToyConfig defaults from a JSON object with any of: vocab_size,
// d_model, n_heads, d_ff, n_encoder_layers, n_decoder_layers, bottleneck,
// max_seq_len, activation, adapters (global layer indices).
ToyConfig ToyConfigFromJson(const nlohmann::json& j);

}  // namespace peqa::cli
