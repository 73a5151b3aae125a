#include "peqa/dataset.hpp"

#include <algorithm>

#include "peqa/error.hpp"
#include "peqa/io.hpp"
#include "peqa/linearizer.hpp"
#include "peqa/parallel.hpp"
#include "peqa/table_json.hpp"
#include "peqa/text_util.hpp"

namespace peqa {
namespace {

[[noreturn]] void SchemaAt(std::size_t line, const std::string& message) {
  throw Error(ErrorKind::kSchemaError, "line " + std::to_string(line) + ": " + message);
}

std::string RequireString(const nlohmann::json& j, const char* key,
                          std::size_t line, bool required = true) {
  auto it = j.find(key);
  if (it == j.end()) {
    if (required) SchemaAt(line, std::string("missing '") + key + "'");
    return {};
  }
  if (!it->is_string()) SchemaAt(line, std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

std::string ContextText(const QaRecord& record) {
  if (const auto* passage = std::get_if<Passage>(&record.context)) {
    return passage->text;
  }
  return Linearize(std::get<HierarchicalTable>(record.context)).text;
}

}  // namespace

Modality ParseModality(const std::string& name) {
  if (name == "table") return Modality::kTable;
  if (name == "text") return Modality::kText;
  throw Error(ErrorKind::kSchemaError, "modality must be 'table' or 'text', got '" + name + "'");
}

QaRecord RecordFromJson(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) SchemaAt(line, "record must be a JSON object");
  QaRecord record;
  record.id = RequireString(j, "id", line);
  if (j.contains("split")) record.split = RequireString(j, "split", line);
  record.question = RequireString(j, "question", line);
  record.title = RequireString(j, "title", line, /*required=*/false);

  auto ctx = j.find("context");
  if (ctx == j.end() || !ctx->is_object()) SchemaAt(line, "'context' must be an object");
  const bool has_passage = ctx->contains("passage");
  const bool has_table = ctx->contains("table");
  if (has_passage == has_table) {
    SchemaAt(line, "'context' needs exactly one of 'passage' or 'table'");
  }
  if (has_passage) {
    record.context = Passage{RequireString(*ctx, "passage", line)};
  } else {
    HierarchicalTable table;
    try {
      table = TableFromJson(ctx->at("table"));
    } catch (const Error& e) {
      SchemaAt(line, e.what());
    }
    try {
      ValidateTable(table);
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(line) + ": " + e.what());
    }
    record.context = std::move(table);
  }

  auto answers = j.find("answers");
  if (answers == j.end() || !answers->is_array() || answers->empty()) {
    SchemaAt(line, "'answers' must be a nonempty array");
  }
  for (const auto& a : *answers) {
    if (!a.is_string()) SchemaAt(line, "'answers' must hold strings");
    record.answers.push_back(a.get<std::string>());
  }
  return record;
}

std::vector<QaRecord> ReadRecords(const std::filesystem::path& path,
                                  std::optional<Modality> modality) {
  const auto lines = ReadLines(path);
  std::vector<QaRecord> records;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (SplitWhitespace(lines[i]).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error& e) {
      SchemaAt(i + 1, std::string("invalid JSON: ") + e.what());
    }
    QaRecord record = RecordFromJson(j, i + 1);
    if (modality && record.modality() != *modality) {
      SchemaAt(i + 1, "record modality does not match the requested one");
    }
    records.push_back(std::move(record));
  }
  return records;
}

SplitStats& SplitStats::operator+=(const SplitStats& other) {
  n_samples += other.n_samples;
  max_question_tokens = std::max(max_question_tokens, other.max_question_tokens);
  max_target_tokens = std::max(max_target_tokens, other.max_target_tokens);
  max_context_tokens = std::max(max_context_tokens, other.max_context_tokens);
  max_table_rows = std::max(max_table_rows, other.max_table_rows);
  max_table_columns = std::max(max_table_columns, other.max_table_columns);
  return *this;
}

DatasetStats ComputeStats(const std::vector<QaRecord>& records) {
  DatasetStats stats;
  for (const auto& record : records) {
    SplitStats one;
    one.n_samples = 1;
    one.max_question_tokens = SplitWhitespace(record.question).size();
    for (const auto& answer : record.answers) {
      one.max_target_tokens = std::max(one.max_target_tokens, SplitWhitespace(answer).size());
    }
    one.max_context_tokens = SplitWhitespace(ContextText(record)).size();
    if (const auto* table = std::get_if<HierarchicalTable>(&record.context)) {
      const ValidatedTable valid = ValidateTable(*table);
      one.max_table_rows = valid.body_grid().rows();
      one.max_table_columns = valid.width();
    }
    stats.splits[record.split] += one;
  }
  return stats;
}

nlohmann::ordered_json StatsToJson(const DatasetStats& stats) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& [split, s] : stats.splits) {
    out[split] = {{"n_samples", s.n_samples},
                  {"max_question_tokens", s.max_question_tokens},
                  {"max_target_tokens", s.max_target_tokens},
                  {"max_context_tokens", s.max_context_tokens},
                  {"max_table_rows", s.max_table_rows},
                  {"max_table_columns", s.max_table_columns}};
  }
  return out;
}

std::vector<PreparedExample> PrepareExamples(const std::vector<QaRecord>& records,
                                             const PrepareLimits& limits,
                                             int jobs) {
  std::vector<PreparedExample> out(records.size());
  ParallelFor(records.size(), jobs, [&](std::size_t i) {
    const QaRecord& record = records[i];
    if (limits.answer_index >= record.answers.size()) {
      throw Error(ErrorKind::kSchemaError,
                  "record " + record.id + " has no answer #" +
                      std::to_string(limits.answer_index));
    }
    PreparedExample example;
    example.id = record.id;
    example.input = Assemble(record.question, record.title, ContextText(record));
    if (limits.max_input_tokens) {
      example.input = Truncate(example.input, *limits.max_input_tokens);
    }
    auto target = SplitWhitespace(record.answers[limits.answer_index]);
    if (limits.max_target_tokens && target.size() > *limits.max_target_tokens) {
      target.resize(*limits.max_target_tokens);
    }
    example.target = Join(target, " ");
    out[i] = std::move(example);
  });
  return out;
}

std::string PreparedJsonl(const std::vector<PreparedExample>& examples) {
  std::string out;
  for (const auto& e : examples) {
    nlohmann::ordered_json line = {{"id", e.id},
                                   {"input", e.input.rendered()},
                                   {"input_tokens", e.input.token_count()},
                                   {"target", e.target}};
    out += DumpJson(line);
    out.push_back('\n');
  }
  return out;
}

}  // namespace peqa
