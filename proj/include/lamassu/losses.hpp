#pragma once

#include <stdexcept>
#include <vector>

#include "lamassu/tensor.hpp"

namespace lamassu {

struct LossWeights {
  float alpha = 0.75f;  // LID loss weight (0 when the encoder has one cluster)
  float beta = 0.4f;    // CTC loss weight (0 when CTC regularization is off)
};

// Raised when an utterance is too short for its CTC label expansion; the
// batch loop skips such utterances and counts them instead of clamping.
struct CtcTooShort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Transducer (RNN-T) loss over logits [T, U+1, |V|+2]. Path convention:
// blank advances the frame, a label advances the output position, and every
// path ends with the blank taken from (T, U); the loss is per utterance.
// Gradients are exact, computed from forward/backward occupancies in 64-bit.
Tensor transducer_loss(const Tensor& logits, const std::vector<int>& labels, int blank_id);

// CTC loss over frame logits [T, |V|+2] with the standard blank-interleaved
// label expansion and collapse-repeats semantics.
Tensor ctc_loss(const Tensor& logits, const std::vector<int>& labels, int blank_id);

// Minimum frame count a CTC instance needs (labels plus forced blanks
// between repeats).
std::size_t ctc_min_frames(const std::vector<int>& labels);

// Cross-entropy between the summed per-block weight-estimation logits and
// the source cluster index.
Tensor lid_loss(const Tensor& lid_logit_sums, std::size_t cluster);

// l_t + alpha * l_lid + beta * l_ctc. alpha is forced to 0 when
// num_clusters == 1. Undefined component tensors count as 0.
Tensor combined_loss(const Tensor& l_transducer, const Tensor& l_lid, const Tensor& l_ctc,
                     const LossWeights& weights, std::size_t num_clusters);

// Log-domain DP cores on a precomputed log-probability lattice; the public
// losses wrap these behind the internal log-softmax. Exposed so invariants
// can be probed at the lattice level.
namespace lattice {

// log_probs[t * (U+1) + u] rows of width num_classes.
double transducer_log_prob(const std::vector<double>& log_probs, std::size_t frames,
                           std::size_t num_labels, std::size_t num_classes,
                           const std::vector<int>& labels, int blank_id);
double ctc_log_prob(const std::vector<double>& log_probs, std::size_t frames,
                    std::size_t num_classes, const std::vector<int>& labels, int blank_id);

}  // namespace lattice

}  // namespace lamassu
