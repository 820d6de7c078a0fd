#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "lamassu/model.hpp"

namespace lamassu {

// Two-phase source-LID gate schedule: steps below the boundary use a one-hot
// gate for the utterance's source cluster, every later step (and all
// inference) uses all ones.
struct GateSchedule {
  std::size_t total_steps = 0;
  double all_ones_fraction = 1.0;

  std::size_t phase_boundary() const;
  bool all_ones_phase(std::size_t step) const { return step >= phase_boundary(); }
  GateVector gates_for(std::size_t step, std::size_t cluster, std::size_t clusters) const;
};

struct AdamOptimizer {
  OptimConfig cfg;
  std::vector<std::vector<float>> m, v;

  void init_like(const NamedParams& params);
  // Inverse-sqrt warmup around cfg.lr as the peak.
  float lr_at(std::size_t step) const;
  void apply(const NamedParams& params, std::size_t step);
};

struct TrainState {
  std::size_t step = 0;
  std::uint64_t rng_state = 0;
  double run_transducer = 0.0, run_lid = 0.0, run_ctc = 0.0;
  std::size_t run_count = 0;
  std::size_t ctc_skipped = 0;
};

struct TrainingDiverged : std::runtime_error {
  std::size_t step;
  explicit TrainingDiverged(std::size_t at)
      : std::runtime_error("training diverged (non-finite loss) at step " +
                           std::to_string(at)),
        step(at) {}
};

// One assembled training batch: zero-padded features plus per-utterance
// lengths, cluster/target indices and label ids.
struct Batch {
  Tensor features;  // [B, T_max, d_x]
  std::vector<std::size_t> frame_lengths;
  std::vector<std::size_t> clusters;
  std::vector<std::size_t> targets;
  std::vector<std::vector<int>> labels;
  std::vector<std::size_t> label_lengths;

  std::size_t size() const { return frame_lengths.size(); }
  // Unpadded feature rows of one utterance.
  Tensor utterance_features(std::size_t b) const;
};

Batch assemble_batch(const Model& model, const Corpus& corpus,
                     const std::vector<std::size_t>& indices);

struct Trainer {
  Config cfg;
  Model model;
  AdamOptimizer opt;
  GateSchedule schedule;
  TrainState state;

  Trainer() = default;
  Trainer(const Config& config, const ToyLanguageSpec& langs);

  // Runs optimizer steps until schedule.total_steps, logging every
  // cfg.optim.log_every steps. Throws TrainingDiverged on non-finite loss.
  void run(const Corpus& train_corpus, std::ostream* log);
  void one_step(const Corpus& train_corpus, std::ostream* log);

 private:
  std::vector<std::vector<std::size_t>> direction_pools_;  // SPE round-robin
  void build_pools(const Corpus& corpus);
  std::vector<std::size_t> sample_indices(const Corpus& corpus, Rng& rng) const;
};

}  // namespace lamassu
