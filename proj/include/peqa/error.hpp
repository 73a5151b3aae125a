#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace peqa {

enum class ErrorKind {
  // Table structure.
  kOverlappingSpans,
  kRaggedGrid,
  kSpanOutOfBounds,
  // Input assembly.
  kEmptyQuestion,
  kReservedToken,
  kBudgetTooSmall,
  // Metrics.
  kLengthMismatch,
  kEmptyCorpus,
  // Adapter core.
  kDimensionMismatch,
  kInvalidConfig,
  kDivergence,
  // Ingest and I/O.
  kSchemaError,
  kIoError,
  kUnknownSubcommand,
};

std::string_view ErrorKindName(ErrorKind kind);

// Every recoverable failure in the library is reported through this type.
// The CLI maps it to exit code 2 and a JSON object on stderr.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace peqa
