#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lamassu {

enum class Variant { SPE, UNI };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
  Variant variant = Variant::UNI;
  std::size_t d = 64;                // encoder width
  std::size_t heads = 4;
  std::size_t blocks = 2;            // clustered blocks I
  std::size_t clusters = 2;          // language clusters J
  std::size_t separate_layers = 1;   // per-cluster Transformer depth per block
  std::size_t shared_layers = 1;     // shared Transformer depth per block
  std::size_t d_p = 64;              // prediction network width
  std::size_t d_j = 64;              // joint network width
  std::size_t lstm_layers = 1;
  std::size_t chunk_frames = 4;
  std::size_t max_symbols_per_frame = 10;
  std::size_t frame_ms = 10;         // for latency reporting
  bool target_lid_for_encoder = true;
  bool subsample = false;            // stride-2 frame-pair concatenation
  float dropout = 0.1f;
};

struct LossConfig {
  float alpha = 0.75f;  // LID loss weight; forced to 0 when clusters == 1
  float beta = 0.4f;    // CTC loss weight
  bool ctc = true;
  bool lid_in_phase2 = true;
};

struct ScheduleConfig {
  std::size_t total_steps = 3000;
  double all_ones_fraction = 0.5;  // share of steps with all-ones gates
};

struct DataConfig {
  std::uint64_t seed = 1234;
  std::size_t train_utts = 6000;
  std::size_t dev_utts = 600;
  std::size_t test_utts = 600;
  std::size_t d_x = 16;
  float sigma = 0.1f;
  std::size_t span_min = 2;
  std::size_t span_max = 4;
  std::size_t len_min = 3;
  std::size_t len_max = 12;
  std::size_t tokens_per_lang = 16;
  std::size_t overlap = 4;  // tokens shared between the first two target languages
};

struct OptimConfig {
  float lr = 1e-3f;
  std::size_t warmup = 400;
  std::size_t batch = 32;
  float beta1 = 0.9f;
  float beta2 = 0.98f;
  float eps = 1e-9f;
  std::size_t log_every = 50;
};

struct Config {
  ModelConfig model;
  LossConfig loss;
  ScheduleConfig schedule;
  DataConfig data;
  OptimConfig optim;

  // Serializes every key; output parses back to an identical config.
  std::string to_text() const;
};

// INI-style parser: [section] headers, key = value lines, '#'/';' comments.
// Unknown sections or keys are rejected with the offending name.
Config parse_config_text(const std::string& text, const Config& defaults = Config());
Config load_config_file(const std::string& path, const Config& defaults = Config());

// Applies one "section.key=value" override.
void apply_override(Config& cfg, const std::string& spec);

// Named presets; "paper-scale" resolves the full-size architecture constants
// (6 blocks of 2+2 layers -> 24 encoder layers, 16-frame chunks at a 10 ms
// hop, 2-layer LSTM prediction networks).
void apply_preset(Config& cfg, const std::string& name);

}  // namespace lamassu
