#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace peqa {

inline constexpr std::string_view kQuestionMarker = "<question>";
inline constexpr std::string_view kTitleMarker = "<title>";
inline constexpr std::string_view kContextMarker = "<context>";

// The prompted model input: "<question> q.. <title> t.. <context> c..".
struct InputSequence {
  std::vector<std::string> question_tokens;
  std::vector<std::string> title_tokens;
  std::vector<std::string> context_tokens;

  // Markers included.
  std::size_t token_count() const {
    return question_tokens.size() + title_tokens.size() +
           context_tokens.size() + 3;
  }
  std::string rendered() const;

  friend bool operator==(const InputSequence&, const InputSequence&) = default;
};

// Whitespace-tokenizes the three fields. Throws kEmptyQuestion when the
// question has no tokens and kReservedToken when a field contains a marker.
InputSequence Assemble(std::string_view question, std::string_view title,
                       std::string_view context);

// Drops trailing context tokens until the sequence fits `max_tokens`.
// Throws kBudgetTooSmall if the question, title and markers alone exceed it.
InputSequence Truncate(const InputSequence& input, std::size_t max_tokens);

struct SplitFields {
  std::string question;
  std::string title;
  std::string context;
};

// Inverse of InputSequence::rendered(). Throws kSchemaError when the markers
// are missing, repeated or out of order.
SplitFields SplitRendered(std::string_view rendered);

}  // namespace peqa
