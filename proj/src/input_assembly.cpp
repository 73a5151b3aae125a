#include "peqa/input_assembly.hpp"

#include <algorithm>

#include "peqa/error.hpp"
#include "peqa/text_util.hpp"

namespace peqa {
namespace {

bool IsMarker(std::string_view token) {
  return token == kQuestionMarker || token == kTitleMarker ||
         token == kContextMarker;
}

std::vector<std::string> TokenizeField(std::string_view text,
                                       const char* field) {
  auto tokens = SplitWhitespace(text);
  for (const auto& t : tokens) {
    if (IsMarker(t)) {
      throw Error(ErrorKind::kReservedToken,
                  std::string(field) + " contains the reserved token " + t);
    }
  }
  return tokens;
}

}  // namespace

std::string InputSequence::rendered() const {
  std::string out(kQuestionMarker);
  auto append = [&out](const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) {
      out.push_back(' ');
      out += t;
    }
  };
  append(question_tokens);
  out.push_back(' ');
  out += kTitleMarker;
  append(title_tokens);
  out.push_back(' ');
  out += kContextMarker;
  append(context_tokens);
  return out;
}

InputSequence Assemble(std::string_view question, std::string_view title,
                       std::string_view context) {
  InputSequence out;
  out.question_tokens = TokenizeField(question, "question");
  if (out.question_tokens.empty()) {
    throw Error(ErrorKind::kEmptyQuestion, "question has no tokens");
  }
  out.title_tokens = TokenizeField(title, "title");
  out.context_tokens = TokenizeField(context, "context");
  return out;
}

InputSequence Truncate(const InputSequence& input, std::size_t max_tokens) {
  const std::size_t fixed =
      input.question_tokens.size() + input.title_tokens.size() + 3;
  if (max_tokens < fixed) {
    throw Error(ErrorKind::kBudgetTooSmall,
                "budget " + std::to_string(max_tokens) +
                    " is below the " + std::to_string(fixed) +
                    " question/title/marker tokens");
  }
  InputSequence out = input;
  const std::size_t keep = std::min(out.context_tokens.size(), max_tokens - fixed);
  out.context_tokens.resize(keep);
  return out;
}

SplitFields SplitRendered(std::string_view rendered) {
  auto tokens = SplitWhitespace(rendered);
  std::vector<std::size_t> at;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (IsMarker(tokens[i])) at.push_back(i);
  }
  if (at.size() != 3 || tokens[at[0]] != kQuestionMarker ||
      tokens[at[1]] != kTitleMarker || tokens[at[2]] != kContextMarker ||
      at[0] != 0) {
    throw Error(ErrorKind::kSchemaError,
                "rendered input must contain <question>, <title>, <context> "
                "exactly once and in order");
  }
  auto span = [&tokens](std::size_t begin, std::size_t end) {
    return Join(std::span<const std::string>(tokens).subspan(begin, end - begin),
                " ");
  };
  return {span(at[0] + 1, at[1]), span(at[1] + 1, at[2]),
          span(at[2] + 1, tokens.size())};
}

}  // namespace peqa
