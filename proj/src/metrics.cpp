#include "peqa/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <unordered_map>

#include "peqa/error.hpp"
#include "peqa/io.hpp"
#include "peqa/parallel.hpp"
#include "peqa/text_util.hpp"

namespace peqa::metrics {
namespace {

using NgramCounts = std::unordered_map<std::string, std::int64_t>;

// Keys join tokens with a byte that neither tokenizer can emit inside a token.
NgramCounts CountNgrams(std::span<const std::string> tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t k = 1; k < n; ++k) {
      key.push_back('\x1f');
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

std::int64_t ClippedOverlap(const NgramCounts& hyp, const NgramCounts& ref) {
  std::int64_t overlap = 0;
  for (const auto& [gram, count] : hyp) {
    auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

std::int64_t NgramTotal(std::size_t length, std::size_t n) {
  return length >= n ? static_cast<std::int64_t>(length - n + 1) : 0;
}

PRF Mean(const std::vector<PRF>& scores) {
  PRF out;
  for (const auto& s : scores) {
    out.precision += s.precision;
    out.recall += s.recall;
    out.f1 += s.f1;
  }
  const auto n = static_cast<double>(scores.size());
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  return out;
}

void CheckCorpus(std::size_t hyps, std::size_t refs) {
  if (hyps != refs) {
    throw Error(ErrorKind::kLengthMismatch,
                std::to_string(hyps) + " hypotheses vs " +
                    std::to_string(refs) + " references");
  }
  if (hyps == 0) throw Error(ErrorKind::kEmptyCorpus, "corpus is empty");
}

void ReplaceAll(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

PRF MakePRF(double precision, double recall) {
  const double sum = precision + recall;
  return {precision, recall, sum > 0.0 ? 2.0 * precision * recall / sum : 0.0};
}

std::vector<std::string> MetricTokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (uc < 0x80 && std::isalnum(uc)) {
      current.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

PRF RougeN(std::string_view hyp, std::string_view ref, int n) {
  if (n < 1) throw Error(ErrorKind::kInvalidConfig, "ROUGE-N requires n >= 1");
  const auto h = MetricTokenize(hyp);
  const auto r = MetricTokenize(ref);
  const auto order = static_cast<std::size_t>(n);
  const std::int64_t hyp_total = NgramTotal(h.size(), order);
  const std::int64_t ref_total = NgramTotal(r.size(), order);
  if (hyp_total == 0 || ref_total == 0) return {};
  const std::int64_t overlap =
      ClippedOverlap(CountNgrams(h, order), CountNgrams(r, order));
  return MakePRF(static_cast<double>(overlap) / static_cast<double>(hyp_total),
                 static_cast<double>(overlap) / static_cast<double>(ref_total));
}

std::size_t LcsLength(std::span<const std::string> a,
                      std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

PRF RougeL(std::string_view hyp, std::string_view ref) {
  const auto h = MetricTokenize(hyp);
  const auto r = MetricTokenize(ref);
  if (h.empty() || r.empty()) return {};
  const auto lcs = static_cast<double>(LcsLength(h, r));
  return MakePRF(lcs / static_cast<double>(h.size()),
                 lcs / static_cast<double>(r.size()));
}

std::vector<std::string> Tokenize13a(std::string_view text) {
  std::string line(text);
  ReplaceAll(line, "<skipped>", "");
  ReplaceAll(line, "-\n", "");
  ReplaceAll(line, "\n", " ");
  if (line.find('&') != std::string::npos) {
    ReplaceAll(line, "&quot;", "\"");
    ReplaceAll(line, "&amp;", "&");
    ReplaceAll(line, "&lt;", "<");
    ReplaceAll(line, "&gt;", ">");
  }
  line = " " + line + " ";

  // Symbols other than period, comma, apostrophe and hyphen are always split
  // off; period and comma only next to a non-digit; hyphen after a digit.
  static const std::regex kSymbols(
      "([\\x7B-\\x7E\\x5B-\\x60\\x20-\\x26\\x28-\\x2B\\x3A-\\x40\\x2F])");
  static const std::regex kPeriodCommaAfter("([^0-9])([.,])");
  static const std::regex kPeriodCommaBefore("([.,])([^0-9])");
  static const std::regex kDashAfterDigit("([0-9])(-)");
  line = std::regex_replace(line, kSymbols, " $1 ");
  line = std::regex_replace(line, kPeriodCommaAfter, "$1 $2 ");
  line = std::regex_replace(line, kPeriodCommaBefore, " $1 $2");
  line = std::regex_replace(line, kDashAfterDigit, "$1 $2 ");
  return SplitWhitespace(line);
}

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (int n = 0; n < kMaxBleuOrder; ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  hyp_length += other.hyp_length;
  ref_length += other.ref_length;
  return *this;
}

BleuStats SegmentBleuStats(std::string_view hyp, std::string_view ref) {
  const auto h = Tokenize13a(hyp);
  const auto r = Tokenize13a(ref);
  BleuStats stats;
  stats.hyp_length = static_cast<std::int64_t>(h.size());
  stats.ref_length = static_cast<std::int64_t>(r.size());
  for (int n = 1; n <= kMaxBleuOrder; ++n) {
    const auto order = static_cast<std::size_t>(n);
    stats.totals[n - 1] = NgramTotal(h.size(), order);
    stats.matches[n - 1] =
        ClippedOverlap(CountNgrams(h, order), CountNgrams(r, order));
  }
  return stats;
}

BleuBreakdown BleuFromStats(const BleuStats& stats) {
  BleuBreakdown out;
  if (stats.hyp_length == 0) return out;

  double smooth = 1.0;
  double log_sum = 0.0;
  for (int n = 0; n < kMaxBleuOrder; ++n) {
    const auto total = static_cast<double>(stats.totals[n]);
    if (stats.totals[n] == 0) break;
    if (stats.matches[n] == 0) {
      smooth *= 2.0;
      out.precisions[n] = 1.0 / (smooth * total);
    } else {
      out.precisions[n] = static_cast<double>(stats.matches[n]) / total;
    }
    log_sum += std::log(out.precisions[n]);
    ++out.effective_order;
  }

  const auto c = static_cast<double>(stats.hyp_length);
  const auto r = static_cast<double>(stats.ref_length);
  out.brevity_penalty = c < r ? std::exp(1.0 - r / c) : 1.0;
  out.score = 100.0 * out.brevity_penalty *
              std::exp(log_sum / static_cast<double>(out.effective_order));
  out.score = std::clamp(out.score, 0.0, 100.0);
  return out;
}

double SacreBleuCorpus(std::span<const std::string> hyps,
                       std::span<const std::string> refs) {
  CheckCorpus(hyps.size(), refs.size());
  BleuStats total;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    total += SegmentBleuStats(hyps[i], refs[i]);
  }
  return BleuFromStats(total).score;
}

MetricReport Evaluate(std::span<const std::string> hyps,
                      std::span<const std::string> refs, int jobs) {
  CheckCorpus(hyps.size(), refs.size());
  const std::size_t n = hyps.size();
  std::vector<PRF> r1(n), r2(n), rl(n);
  std::vector<BleuStats> bleu(n);
  ParallelFor(n, jobs, [&](std::size_t i) {
    r1[i] = RougeN(hyps[i], refs[i], 1);
    r2[i] = RougeN(hyps[i], refs[i], 2);
    rl[i] = RougeL(hyps[i], refs[i]);
    bleu[i] = SegmentBleuStats(hyps[i], refs[i]);
  });

  MetricReport report;
  report.rouge1 = Mean(r1);
  report.rouge2 = Mean(r2);
  report.rougeL = Mean(rl);
  BleuStats total;
  for (const auto& s : bleu) total += s;
  report.bleu = BleuFromStats(total).score;
  report.n_examples = n;
  return report;
}

MetricReport EvaluatePredictions(const std::filesystem::path& pred_path,
                                 const std::filesystem::path& ref_path,
                                 int jobs) {
  const auto preds = ReadLines(pred_path);
  const auto refs = ReadLines(ref_path);
  return Evaluate(preds, refs, jobs);
}

nlohmann::ordered_json ReportToJson(const MetricReport& report) {
  auto prf = [](const PRF& s) {
    return nlohmann::ordered_json{{"p", s.precision}, {"r", s.recall}, {"f", s.f1}};
  };
  return {{"rouge1", prf(report.rouge1)},
          {"rouge2", prf(report.rouge2)},
          {"rougeL", prf(report.rougeL)},
          {"bleu", report.bleu},
          {"n", report.n_examples}};
}

}  // namespace peqa::metrics
