#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "peqa/input_assembly.hpp"
#include "peqa/table_model.hpp"

namespace peqa {

enum class Modality { kTable, kText };

// Throws kSchemaError for anything but "table" or "text".
Modality ParseModality(const std::string& name);

struct Passage {
  std::string text;
};

// One QA example. The table variant is validated at read time.
//
// JSONL schema, one object per line:
//   {"id": str, "split": str (default "train"), "question": str,
//    "title": str, "context": {"passage": str} | {"table": <table json>},
//    "answers": [str, ...]}
struct QaRecord {
  std::string id;
  std::string split = "train";
  std::string question;
  std::string title;
  std::variant<Passage, HierarchicalTable> context;
  std::vector<std::string> answers;

  Modality modality() const {
    return std::holds_alternative<Passage>(context) ? Modality::kText
                                                    : Modality::kTable;
  }
};

// Throws kSchemaError naming `line` (1-based) or a table validation error.
QaRecord RecordFromJson(const nlohmann::json& j, std::size_t line);

// Parses a JSONL file; blank lines are skipped. When `modality` is set,
// records of the other modality are a kSchemaError.
std::vector<QaRecord> ReadRecords(const std::filesystem::path& path,
                                  std::optional<Modality> modality);

struct SplitStats {
  std::size_t n_samples = 0;
  std::size_t max_question_tokens = 0;
  std::size_t max_target_tokens = 0;
  std::size_t max_context_tokens = 0;  // linearized text for tables
  std::size_t max_table_rows = 0;      // resolved body rows
  std::size_t max_table_columns = 0;   // grid width

  SplitStats& operator+=(const SplitStats& other);
  friend bool operator==(const SplitStats&, const SplitStats&) = default;
};

struct DatasetStats {
  std::map<std::string, SplitStats> splits;
  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

// Whitespace-token maxima per split. Order of records does not matter.
DatasetStats ComputeStats(const std::vector<QaRecord>& records);

nlohmann::ordered_json StatsToJson(const DatasetStats& stats);

struct PrepareLimits {
  std::optional<std::size_t> max_input_tokens;
  std::optional<std::size_t> max_target_tokens;
  std::size_t answer_index = 0;  // which answer becomes the target
};

struct PreparedExample {
  std::string id;
  InputSequence input;
  std::string target;
};

// Tables are linearized, passages pass through; the result is assembled,
// truncated to the limits and paired with the selected answer. One output
// per record, in order; any failure is raised.
std::vector<PreparedExample> PrepareExamples(const std::vector<QaRecord>& records,
                                             const PrepareLimits& limits,
                                             int jobs = 1);

std::string PreparedJsonl(const std::vector<PreparedExample>& examples);

}  // namespace peqa
