#include "lamassu/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lamassu {

std::size_t levenshtein(const std::vector<std::string>& a,
                        const std::vector<std::string>& b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double token_error_rate(const std::vector<std::string>& hyp,
                        const std::vector<std::string>& ref) {
  if (ref.empty()) throw std::invalid_argument("token_error_rate: empty reference");
  return 100.0 * double(levenshtein(hyp, ref)) / double(ref.size());
}

namespace {

std::map<std::vector<std::string>, std::size_t> ngram_counts(
    const std::vector<std::string>& tokens, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i)
    ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

}  // namespace

double bleu(const std::vector<std::vector<std::string>>& hyps,
            const std::vector<std::vector<std::string>>& refs) {
  if (hyps.empty() || hyps.size() != refs.size())
    throw std::invalid_argument("bleu: need equal nonzero hypothesis/reference counts");

  std::size_t match[4] = {0, 0, 0, 0};
  std::size_t total[4] = {0, 0, 0, 0};
  std::size_t hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    hyp_len += hyps[i].size();
    ref_len += refs[i].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto hc = ngram_counts(hyps[i], n);
      const auto rc = ngram_counts(refs[i], n);
      for (const auto& [gram, count] : hc) {
        total[n - 1] += count;
        auto it = rc.find(gram);
        if (it != rc.end()) match[n - 1] += std::min(count, it->second);
      }
    }
  }
  if (hyp_len == 0) return 0.0;

  double log_precision = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    double p;
    if (match[n] == 0)
      p = double(match[n] + 1) / double(total[n] + 1);  // add-one smoothing
    else
      p = double(match[n]) / double(total[n]);
    log_precision += 0.25 * std::log(p);
  }
  const double bp =
      hyp_len >= ref_len ? 1.0 : std::exp(1.0 - double(ref_len) / double(hyp_len));
  return 100.0 * bp * std::exp(log_precision);
}

namespace {

void require_trace(const EmissionTrace& trace, const char* what) {
  if (trace.items.empty())
    throw std::invalid_argument(std::string(what) + ": empty emission trace");
  if (trace.total_frames == 0)
    throw std::invalid_argument(std::string(what) + ": zero-length utterance");
}

}  // namespace

double average_proportion(const EmissionTrace& trace) {
  require_trace(trace, "average_proportion");
  double acc = 0.0;
  for (const auto& item : trace.items)
    acc += double(item.frames_consumed) / double(trace.total_frames);
  return acc / double(trace.items.size());
}

double average_lagging(const EmissionTrace& trace) {
  require_trace(trace, "average_lagging");
  const double frames = double(trace.total_frames);
  const double rate = frames / double(trace.items.size());  // T / U
  std::size_t tau = trace.items.size();
  for (std::size_t i = 0; i < trace.items.size(); ++i) {
    if (double(trace.items[i].frames_consumed) >= frames) {
      tau = i + 1;
      break;
    }
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < tau; ++i)
    acc += double(trace.items[i].frames_consumed) - double(i) * rate;
  return acc / double(tau);
}

double differentiable_average_lagging(const EmissionTrace& trace) {
  require_trace(trace, "differentiable_average_lagging");
  const double rate = double(trace.total_frames) / double(trace.items.size());
  double acc = 0.0, g_prev = 0.0;
  for (std::size_t i = 0; i < trace.items.size(); ++i) {
    const double g = double(trace.items[i].frames_consumed);
    const double g_eff = i == 0 ? g : std::max(g, g_prev + rate);
    acc += g_eff - double(i) * rate;
    g_prev = g_eff;
  }
  return acc / double(trace.items.size());
}

const ReportRecord* Report::find(const std::string& direction,
                                 const std::string& metric) const {
  for (const auto& rec : records)
    if (rec.direction == direction && rec.metric == metric) return &rec;
  return nullptr;
}

std::string Report::to_text() const {
  std::ostringstream os;
  char buf[64];
  for (const auto& rec : records) {
    std::snprintf(buf, sizeof(buf), "%.17g", rec.value);
    os << "direction=" << rec.direction << "\tmetric=" << rec.metric
       << "\tvalue=" << buf << "\n";
  }
  return os.str();
}

Report Report::from_text(const std::string& text) {
  Report report;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ReportRecord rec;
    std::size_t p1 = line.find("direction=");
    std::size_t p2 = line.find("\tmetric=");
    std::size_t p3 = line.find("\tvalue=");
    if (p1 != 0 || p2 == std::string::npos || p3 == std::string::npos)
      throw std::runtime_error("malformed report line: " + line);
    rec.direction = line.substr(10, p2 - 10);
    rec.metric = line.substr(p2 + 8, p3 - (p2 + 8));
    rec.value = std::stod(line.substr(p3 + 7));
    report.records.push_back(std::move(rec));
  }
  return report;
}

void write_report_file(const std::string& path, const Report& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report file '" + path + "'");
  out << report.to_text();
}

Report read_report_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read report file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return Report::from_text(os.str());
}

}  // namespace lamassu
