#include "lamassu/losses.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <string>

namespace lamassu {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logadd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Row-wise log-softmax of float logits into a double buffer.
std::vector<double> log_softmax_rows_f64(const float* x, std::size_t rows,
                                         std::size_t cols) {
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = x + r * cols;
    double mx = xr[0];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, double(xr[c]));
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c) denom += std::exp(double(xr[c]) - mx);
    const double lse = mx + std::log(denom);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = double(xr[c]) - lse;
  }
  return out;
}

void validate_labels(const std::vector<int>& labels, std::size_t num_classes,
                     int blank_id, const char* what) {
  for (int y : labels) {
    if (y < 0 || std::size_t(y) >= num_classes)
      throw std::invalid_argument(std::string(what) + ": label id " + std::to_string(y) +
                                  " out of range");
    if (y == blank_id)
      throw std::invalid_argument(std::string(what) + ": labels must not contain blank");
  }
}

}  // namespace

namespace lattice {

double transducer_log_prob(const std::vector<double>& lp, std::size_t frames,
                           std::size_t num_labels, std::size_t num_classes,
                           const std::vector<int>& labels, int blank_id) {
  const std::size_t positions = num_labels + 1;
  auto at = [&](std::size_t t, std::size_t u, int v) -> double {
    return lp[(t * positions + u) * num_classes + std::size_t(v)];
  };
  std::vector<double> alpha(frames * positions, kNegInf);
  alpha[0] = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t u = 0; u < positions; ++u) {
      if (t == 0 && u == 0) continue;
      double acc = kNegInf;
      if (t > 0) acc = alpha[(t - 1) * positions + u] + at(t - 1, u, blank_id);
      if (u > 0)
        acc = logadd(acc, alpha[t * positions + (u - 1)] + at(t, u - 1, labels[u - 1]));
      alpha[t * positions + u] = acc;
    }
  }
  return alpha[(frames - 1) * positions + num_labels] +
         at(frames - 1, num_labels, blank_id);
}

double ctc_log_prob(const std::vector<double>& lp, std::size_t frames,
                    std::size_t num_classes, const std::vector<int>& labels,
                    int blank_id) {
  const std::size_t expanded = 2 * labels.size() + 1;
  auto sym = [&](std::size_t s) -> int {
    return (s % 2 == 0) ? blank_id : labels[s / 2];
  };
  auto at = [&](std::size_t t, int v) -> double {
    return lp[t * num_classes + std::size_t(v)];
  };
  std::vector<double> alpha(frames * expanded, kNegInf);
  alpha[0] = at(0, blank_id);
  if (expanded > 1) alpha[1] = at(0, sym(1));
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < expanded; ++s) {
      double acc = alpha[(t - 1) * expanded + s];
      if (s >= 1) acc = logadd(acc, alpha[(t - 1) * expanded + s - 1]);
      if (s >= 2 && sym(s) != blank_id && sym(s) != sym(s - 2))
        acc = logadd(acc, alpha[(t - 1) * expanded + s - 2]);
      alpha[t * expanded + s] = acc == kNegInf ? kNegInf : acc + at(t, sym(s));
    }
  }
  double total = alpha[(frames - 1) * expanded + expanded - 1];
  if (expanded > 1) total = logadd(total, alpha[(frames - 1) * expanded + expanded - 2]);
  return total;
}

}  // namespace lattice

Tensor transducer_loss(const Tensor& logits, const std::vector<int>& labels,
                       int blank_id) {
  if (!logits.defined() || logits.rank() != 3)
    throw std::invalid_argument("transducer_loss: expected [T, U+1, classes] logits");
  const std::size_t frames = logits.dim(0);
  const std::size_t positions = logits.dim(1);
  const std::size_t classes = logits.dim(2);
  if (frames < 1) throw std::invalid_argument("transducer_loss: T must be >= 1");
  if (positions != labels.size() + 1)
    throw std::invalid_argument("transducer_loss: logits cover " +
                                std::to_string(positions) + " positions for " +
                                std::to_string(labels.size()) + " labels");
  validate_labels(labels, classes, blank_id, "transducer_loss");
  const std::size_t num_labels = labels.size();

  auto lp = log_softmax_rows_f64(logits.data(), frames * positions, classes);
  auto lpb = [&](std::size_t t, std::size_t u) {
    return lp[(t * positions + u) * classes + std::size_t(blank_id)];
  };
  auto lpl = [&](std::size_t t, std::size_t u) {
    return lp[(t * positions + u) * classes + std::size_t(labels[u])];
  };

  std::vector<double> alpha(frames * positions, kNegInf);
  alpha[0] = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t u = 0; u <= num_labels; ++u) {
      if (t == 0 && u == 0) continue;
      double acc = kNegInf;
      if (t > 0) acc = alpha[(t - 1) * positions + u] + lpb(t - 1, u);
      if (u > 0) acc = logadd(acc, alpha[t * positions + u - 1] + lpl(t, u - 1));
      alpha[t * positions + u] = acc;
    }
  }
  const double log_p = alpha[(frames - 1) * positions + num_labels] +
                       lpb(frames - 1, num_labels);

  auto out = Tensor::scalar(static_cast<float>(-log_p));
  if (!grad_enabled() || !logits.requires_grad()) return out;

  auto li = logits.impl();
  auto impl = out.impl();
  impl->requires_grad = true;
  impl->parents = {li};
  impl->backward_fn = [li, labels, blank_id, frames, positions, classes, num_labels,
                       lp = std::move(lp), alpha = std::move(alpha),
                       log_p](detail::TensorImpl& self) {
    const float upstream = self.grad[0];
    li->ensure_grad();

    auto lp_at = [&](std::size_t t, std::size_t u, int v) {
      return lp[(t * positions + u) * classes + std::size_t(v)];
    };
    std::vector<double> beta(frames * positions, kNegInf);
    beta[(frames - 1) * positions + num_labels] = lp_at(frames - 1, num_labels, blank_id);
    for (std::size_t ti = frames; ti-- > 0;) {
      for (std::size_t ui = positions; ui-- > 0;) {
        if (ti == frames - 1 && ui == num_labels) continue;
        double acc = kNegInf;
        if (ti + 1 < frames)
          acc = lp_at(ti, ui, blank_id) + beta[(ti + 1) * positions + ui];
        if (ui < num_labels)
          acc = logadd(acc, lp_at(ti, ui, labels[ui]) + beta[ti * positions + ui + 1]);
        beta[ti * positions + ui] = acc;
      }
    }

    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t u = 0; u <= num_labels; ++u) {
        const double a = alpha[t * positions + u];
        if (a == kNegInf) continue;
        double occ_blank = 0.0, occ_label = 0.0;
        if (t + 1 < frames)
          occ_blank = std::exp(a + lp_at(t, u, blank_id) +
                               beta[(t + 1) * positions + u] - log_p);
        else if (u == num_labels)
          occ_blank = std::exp(a + lp_at(t, u, blank_id) - log_p);
        if (u < num_labels)
          occ_label = std::exp(a + lp_at(t, u, labels[u]) +
                               beta[t * positions + u + 1] - log_p);
        const double occ_total = occ_blank + occ_label;
        if (occ_total == 0.0) continue;
        float* g = li->grad.data() + (t * positions + u) * classes;
        for (std::size_t v = 0; v < classes; ++v) {
          double dv = std::exp(lp_at(t, u, int(v))) * occ_total;
          if (int(v) == blank_id) dv -= occ_blank;
          if (u < num_labels && int(v) == labels[u]) dv -= occ_label;
          g[v] += upstream * static_cast<float>(dv);
        }
      }
    }
  };
  return out;
}

std::size_t ctc_min_frames(const std::vector<int>& labels) {
  std::size_t need = labels.size();
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++need;
  return need;
}

Tensor ctc_loss(const Tensor& logits, const std::vector<int>& labels, int blank_id) {
  if (!logits.defined() || logits.rank() != 2)
    throw std::invalid_argument("ctc_loss: expected [T, classes] logits");
  const std::size_t frames = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  if (frames < 1) throw std::invalid_argument("ctc_loss: T must be >= 1");
  validate_labels(labels, classes, blank_id, "ctc_loss");
  if (frames < ctc_min_frames(labels))
    throw CtcTooShort("ctc_loss: " + std::to_string(frames) + " frames cannot carry " +
                      std::to_string(labels.size()) + " labels");

  const std::size_t expanded = 2 * labels.size() + 1;
  auto sym = [labels, blank_id](std::size_t s) -> int {
    return (s % 2 == 0) ? blank_id : labels[s / 2];
  };

  auto lp = log_softmax_rows_f64(logits.data(), frames, classes);
  auto lp_at = [&](std::size_t t, int v) { return lp[t * classes + std::size_t(v)]; };

  std::vector<double> alpha(frames * expanded, kNegInf);
  alpha[0] = lp_at(0, blank_id);
  if (expanded > 1) alpha[1] = lp_at(0, sym(1));
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < expanded; ++s) {
      double acc = alpha[(t - 1) * expanded + s];
      if (s >= 1) acc = logadd(acc, alpha[(t - 1) * expanded + s - 1]);
      if (s >= 2 && sym(s) != blank_id && sym(s) != sym(s - 2))
        acc = logadd(acc, alpha[(t - 1) * expanded + s - 2]);
      alpha[t * expanded + s] = acc == kNegInf ? kNegInf : acc + lp_at(t, sym(s));
    }
  }
  double log_p = alpha[(frames - 1) * expanded + expanded - 1];
  if (expanded > 1) log_p = logadd(log_p, alpha[(frames - 1) * expanded + expanded - 2]);

  auto out = Tensor::scalar(static_cast<float>(-log_p));
  if (!grad_enabled() || !logits.requires_grad()) return out;

  auto li = logits.impl();
  auto impl = out.impl();
  impl->requires_grad = true;
  impl->parents = {li};
  impl->backward_fn = [li, labels, blank_id, frames, classes, expanded,
                       lp = std::move(lp), alpha = std::move(alpha), log_p,
                       sym](detail::TensorImpl& self) {
    const float upstream = self.grad[0];
    li->ensure_grad();
    auto lp_at = [&](std::size_t t, int v) { return lp[t * classes + std::size_t(v)]; };

    std::vector<double> beta(frames * expanded, kNegInf);
    beta[(frames - 1) * expanded + expanded - 1] = lp_at(frames - 1, sym(expanded - 1));
    if (expanded > 1)
      beta[(frames - 1) * expanded + expanded - 2] = lp_at(frames - 1, sym(expanded - 2));
    for (std::size_t ti = frames - 1; ti-- > 0;) {
      for (std::size_t s = 0; s < expanded; ++s) {
        double acc = beta[(ti + 1) * expanded + s];
        if (s + 1 < expanded) acc = logadd(acc, beta[(ti + 1) * expanded + s + 1]);
        if (s + 2 < expanded && sym(s + 2) != blank_id && sym(s + 2) != sym(s))
          acc = logadd(acc, beta[(ti + 1) * expanded + s + 2]);
        beta[ti * expanded + s] = acc == kNegInf ? kNegInf : acc + lp_at(ti, sym(s));
      }
    }

    // gamma(t, s) = P(path passes s at t | labels); per frame they sum to 1.
    for (std::size_t t = 0; t < frames; ++t) {
      std::vector<double> class_occ(classes, 0.0);
      for (std::size_t s = 0; s < expanded; ++s) {
        const double a = alpha[t * expanded + s];
        const double b = beta[t * expanded + s];
        if (a == kNegInf || b == kNegInf) continue;
        class_occ[std::size_t(sym(s))] += std::exp(a + b - lp_at(t, sym(s)) - log_p);
      }
      float* g = li->grad.data() + t * classes;
      for (std::size_t v = 0; v < classes; ++v) {
        const double dv = std::exp(lp_at(t, int(v))) - class_occ[v];
        g[v] += upstream * static_cast<float>(dv);
      }
    }
  };
  return out;
}

Tensor lid_loss(const Tensor& lid_logit_sums, std::size_t cluster) {
  if (!lid_logit_sums.defined() || lid_logit_sums.rank() != 1)
    throw std::invalid_argument("lid_loss: expected 1-D logit sums");
  if (lid_logit_sums.dim(0) < 2)
    throw std::invalid_argument("lid_loss: needs at least two clusters");
  return cross_entropy(lid_logit_sums, cluster);
}

Tensor combined_loss(const Tensor& l_transducer, const Tensor& l_lid, const Tensor& l_ctc,
                     const LossWeights& weights, std::size_t num_clusters) {
  if (weights.alpha < 0.0f || weights.beta < 0.0f)
    throw std::invalid_argument("combined_loss: negative loss weight");
  if (!l_transducer.defined())
    throw std::invalid_argument("combined_loss: transducer loss is required");

  float alpha = weights.alpha;
  if (num_clusters == 1 && alpha != 0.0f) {
    static bool warned = false;
    if (!warned) {
      std::cerr << "[lamassu] alpha coerced to 0: encoder has a single cluster\n";
      warned = true;
    }
    alpha = 0.0f;
  }

  Tensor total = l_transducer;
  if (l_lid.defined() && alpha != 0.0f) total = add(total, scale(l_lid, alpha));
  if (l_ctc.defined() && weights.beta != 0.0f)
    total = add(total, scale(l_ctc, weights.beta));
  return total;
}

}  // namespace lamassu
