#pragma once

#include <string>
#include <vector>

#include "lamassu/decode.hpp"

namespace lamassu {

std::size_t levenshtein(const std::vector<std::string>& a,
                        const std::vector<std::string>& b);

// Levenshtein(hyp, ref) / len(ref) * 100. Empty reference is an error.
double token_error_rate(const std::vector<std::string>& hyp,
                        const std::vector<std::string>& ref);

// Corpus-level BLEU-4: uniform weights, brevity penalty, add-one smoothing
// only for orders with zero matches. Empty corpus is an error.
double bleu(const std::vector<std::vector<std::string>>& hyps,
            const std::vector<std::vector<std::string>>& refs);

// Latency metrics over one emission trace, in frames. g(i) is the consumed
// frame count when token i was emitted.
//   AP  = mean_i g(i) / T
//   AL  = mean_{i <= tau} (g(i) - (i-1) * T/U), tau = first i with g(i) >= T
//   DAL = mean_i (g'(i) - (i-1) * T/U), g'(i) = max(g(i), g'(i-1) + T/U)
double average_proportion(const EmissionTrace& trace);
double average_lagging(const EmissionTrace& trace);
double differentiable_average_lagging(const EmissionTrace& trace);

// Line-delimited key-value report; values round-trip losslessly.
struct ReportRecord {
  std::string direction;
  std::string metric;
  double value;
};

struct Report {
  std::vector<ReportRecord> records;

  void add(const std::string& direction, const std::string& metric, double value) {
    records.push_back({direction, metric, value});
  }
  const ReportRecord* find(const std::string& direction, const std::string& metric) const;

  std::string to_text() const;
  static Report from_text(const std::string& text);
};

void write_report_file(const std::string& path, const Report& report);
Report read_report_file(const std::string& path);

}  // namespace lamassu
