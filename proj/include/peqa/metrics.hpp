#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace peqa::metrics {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Builds a PRF with f1 = 2PR/(P+R), or 0 when P+R = 0.
PRF MakePRF(double precision, double recall);

// Lowercases ASCII and splits on every non-alphanumeric byte.
std::vector<std::string> MetricTokenize(std::string_view text);

// Clipped n-gram overlap over MetricTokenize tokens. n must be >= 1.
PRF RougeN(std::string_view hyp, std::string_view ref, int n);

// Sentence-level longest-common-subsequence ROUGE.
PRF RougeL(std::string_view hyp, std::string_view ref);

std::size_t LcsLength(std::span<const std::string> a,
                      std::span<const std::string> b);

// sacreBLEU's default "13a" tokenization, case preserved.
std::vector<std::string> Tokenize13a(std::string_view text);

inline constexpr int kMaxBleuOrder = 4;

// Sufficient statistics for corpus BLEU. Addition is associative and
// commutative, so per-segment stats can be reduced in any order.
struct BleuStats {
  std::array<std::int64_t, kMaxBleuOrder> matches{};
  std::array<std::int64_t, kMaxBleuOrder> totals{};
  std::int64_t hyp_length = 0;
  std::int64_t ref_length = 0;

  BleuStats& operator+=(const BleuStats& other);
  friend BleuStats operator+(BleuStats a, const BleuStats& b) { return a += b; }
  friend bool operator==(const BleuStats&, const BleuStats&) = default;
};

BleuStats SegmentBleuStats(std::string_view hyp, std::string_view ref);

struct BleuBreakdown {
  double score = 0.0;  // in [0, 100]
  std::array<double, kMaxBleuOrder> precisions{};  // fractions, smoothed
  int effective_order = 0;
  double brevity_penalty = 0.0;
};

// Exponential ("exp") smoothing; orders with a zero denominator are left
// out of the geometric mean.
BleuBreakdown BleuFromStats(const BleuStats& stats);

// Throws kEmptyCorpus or kLengthMismatch.
double SacreBleuCorpus(std::span<const std::string> hyps,
                       std::span<const std::string> refs);

struct MetricReport {
  PRF rouge1;
  PRF rouge2;
  PRF rougeL;
  double bleu = 0.0;
  std::size_t n_examples = 0;
};

// Mean per-example ROUGE and corpus BLEU. `jobs` > 1 splits the per-example
// work across threads; results do not depend on it.
MetricReport Evaluate(std::span<const std::string> hyps,
                      std::span<const std::string> refs, int jobs = 1);

// Line-aligned prediction and reference files.
MetricReport EvaluatePredictions(const std::filesystem::path& pred_path,
                                 const std::filesystem::path& ref_path,
                                 int jobs = 1);

nlohmann::ordered_json ReportToJson(const MetricReport& report);

}  // namespace peqa::metrics
