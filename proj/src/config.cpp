#include "lamassu/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lamassu {

std::string variant_name(Variant v) { return v == Variant::SPE ? "SPE" : "UNI"; }

Variant variant_from_name(const std::string& name) {
  if (name == "SPE" || name == "spe") return Variant::SPE;
  if (name == "UNI" || name == "uni") return Variant::UNI;
  throw std::invalid_argument("unknown variant '" + name + "' (expected SPE or UNI)");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw std::invalid_argument("config key '" + key + "': expected on/off, got '" + v + "'");
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long n = std::stoll(v, &pos);
    if (pos != v.size() || n < 0) throw std::invalid_argument("");
    return static_cast<std::size_t>(n);
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': expected nonnegative integer, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    unsigned long long n = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return n;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': expected integer, got '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (...) {
    throw std::invalid_argument("config key '" + key + "': expected number, got '" + v + "'");
  }
}

using Setter = std::function<void(Config&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"model.variant", [](Config& c, const std::string&, const std::string& v) { c.model.variant = variant_from_name(v); }},
      {"model.d", [](Config& c, const std::string& k, const std::string& v) { c.model.d = parse_size(k, v); }},
      {"model.heads", [](Config& c, const std::string& k, const std::string& v) { c.model.heads = parse_size(k, v); }},
      {"model.blocks", [](Config& c, const std::string& k, const std::string& v) { c.model.blocks = parse_size(k, v); }},
      {"model.clusters", [](Config& c, const std::string& k, const std::string& v) { c.model.clusters = parse_size(k, v); }},
      {"model.separate_layers", [](Config& c, const std::string& k, const std::string& v) { c.model.separate_layers = parse_size(k, v); }},
      {"model.shared_layers", [](Config& c, const std::string& k, const std::string& v) { c.model.shared_layers = parse_size(k, v); }},
      {"model.d_p", [](Config& c, const std::string& k, const std::string& v) { c.model.d_p = parse_size(k, v); }},
      {"model.d_j", [](Config& c, const std::string& k, const std::string& v) { c.model.d_j = parse_size(k, v); }},
      {"model.lstm_layers", [](Config& c, const std::string& k, const std::string& v) { c.model.lstm_layers = parse_size(k, v); }},
      {"model.chunk_frames", [](Config& c, const std::string& k, const std::string& v) { c.model.chunk_frames = parse_size(k, v); }},
      {"model.max_symbols_per_frame", [](Config& c, const std::string& k, const std::string& v) { c.model.max_symbols_per_frame = parse_size(k, v); }},
      {"model.frame_ms", [](Config& c, const std::string& k, const std::string& v) { c.model.frame_ms = parse_size(k, v); }},
      {"model.target_lid_for_encoder", [](Config& c, const std::string& k, const std::string& v) { c.model.target_lid_for_encoder = parse_bool(k, v); }},
      {"model.subsample", [](Config& c, const std::string& k, const std::string& v) { c.model.subsample = parse_bool(k, v); }},
      {"model.dropout", [](Config& c, const std::string& k, const std::string& v) { c.model.dropout = static_cast<float>(parse_real(k, v)); }},
      {"loss.alpha", [](Config& c, const std::string& k, const std::string& v) { c.loss.alpha = static_cast<float>(parse_real(k, v)); }},
      {"loss.beta", [](Config& c, const std::string& k, const std::string& v) { c.loss.beta = static_cast<float>(parse_real(k, v)); }},
      {"loss.ctc", [](Config& c, const std::string& k, const std::string& v) { c.loss.ctc = parse_bool(k, v); }},
      {"loss.lid_in_phase2", [](Config& c, const std::string& k, const std::string& v) { c.loss.lid_in_phase2 = parse_bool(k, v); }},
      {"schedule.total_steps", [](Config& c, const std::string& k, const std::string& v) { c.schedule.total_steps = parse_size(k, v); }},
      {"schedule.all_ones_fraction", [](Config& c, const std::string& k, const std::string& v) { c.schedule.all_ones_fraction = parse_real(k, v); }},
      {"data.seed", [](Config& c, const std::string& k, const std::string& v) { c.data.seed = parse_u64(k, v); }},
      {"data.train", [](Config& c, const std::string& k, const std::string& v) { c.data.train_utts = parse_size(k, v); }},
      {"data.dev", [](Config& c, const std::string& k, const std::string& v) { c.data.dev_utts = parse_size(k, v); }},
      {"data.test", [](Config& c, const std::string& k, const std::string& v) { c.data.test_utts = parse_size(k, v); }},
      {"data.d_x", [](Config& c, const std::string& k, const std::string& v) { c.data.d_x = parse_size(k, v); }},
      {"data.sigma", [](Config& c, const std::string& k, const std::string& v) { c.data.sigma = static_cast<float>(parse_real(k, v)); }},
      {"data.span_min", [](Config& c, const std::string& k, const std::string& v) { c.data.span_min = parse_size(k, v); }},
      {"data.span_max", [](Config& c, const std::string& k, const std::string& v) { c.data.span_max = parse_size(k, v); }},
      {"data.len_min", [](Config& c, const std::string& k, const std::string& v) { c.data.len_min = parse_size(k, v); }},
      {"data.len_max", [](Config& c, const std::string& k, const std::string& v) { c.data.len_max = parse_size(k, v); }},
      {"data.tokens_per_lang", [](Config& c, const std::string& k, const std::string& v) { c.data.tokens_per_lang = parse_size(k, v); }},
      {"data.overlap", [](Config& c, const std::string& k, const std::string& v) { c.data.overlap = parse_size(k, v); }},
      {"optim.lr", [](Config& c, const std::string& k, const std::string& v) { c.optim.lr = static_cast<float>(parse_real(k, v)); }},
      {"optim.warmup", [](Config& c, const std::string& k, const std::string& v) { c.optim.warmup = parse_size(k, v); }},
      {"optim.batch", [](Config& c, const std::string& k, const std::string& v) { c.optim.batch = parse_size(k, v); }},
      {"optim.beta1", [](Config& c, const std::string& k, const std::string& v) { c.optim.beta1 = static_cast<float>(parse_real(k, v)); }},
      {"optim.beta2", [](Config& c, const std::string& k, const std::string& v) { c.optim.beta2 = static_cast<float>(parse_real(k, v)); }},
      {"optim.eps", [](Config& c, const std::string& k, const std::string& v) { c.optim.eps = static_cast<float>(parse_real(k, v)); }},
      {"optim.log_every", [](Config& c, const std::string& k, const std::string& v) { c.optim.log_every = parse_size(k, v); }},
  };
  return table;
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string Config::to_text() const {
  std::ostringstream os;
  os << "[model]\n";
  os << "variant = " << variant_name(model.variant) << "\n";
  os << "d = " << model.d << "\n";
  os << "heads = " << model.heads << "\n";
  os << "blocks = " << model.blocks << "\n";
  os << "clusters = " << model.clusters << "\n";
  os << "separate_layers = " << model.separate_layers << "\n";
  os << "shared_layers = " << model.shared_layers << "\n";
  os << "d_p = " << model.d_p << "\n";
  os << "d_j = " << model.d_j << "\n";
  os << "lstm_layers = " << model.lstm_layers << "\n";
  os << "chunk_frames = " << model.chunk_frames << "\n";
  os << "max_symbols_per_frame = " << model.max_symbols_per_frame << "\n";
  os << "frame_ms = " << model.frame_ms << "\n";
  os << "target_lid_for_encoder = " << (model.target_lid_for_encoder ? "on" : "off") << "\n";
  os << "subsample = " << (model.subsample ? "on" : "off") << "\n";
  os << "dropout = " << fmt_real(model.dropout) << "\n";
  os << "\n[loss]\n";
  os << "alpha = " << fmt_real(loss.alpha) << "\n";
  os << "beta = " << fmt_real(loss.beta) << "\n";
  os << "ctc = " << (loss.ctc ? "on" : "off") << "\n";
  os << "lid_in_phase2 = " << (loss.lid_in_phase2 ? "on" : "off") << "\n";
  os << "\n[schedule]\n";
  os << "total_steps = " << schedule.total_steps << "\n";
  os << "all_ones_fraction = " << fmt_real(schedule.all_ones_fraction) << "\n";
  os << "\n[data]\n";
  os << "seed = " << data.seed << "\n";
  os << "train = " << data.train_utts << "\n";
  os << "dev = " << data.dev_utts << "\n";
  os << "test = " << data.test_utts << "\n";
  os << "d_x = " << data.d_x << "\n";
  os << "sigma = " << fmt_real(data.sigma) << "\n";
  os << "span_min = " << data.span_min << "\n";
  os << "span_max = " << data.span_max << "\n";
  os << "len_min = " << data.len_min << "\n";
  os << "len_max = " << data.len_max << "\n";
  os << "tokens_per_lang = " << data.tokens_per_lang << "\n";
  os << "overlap = " << data.overlap << "\n";
  os << "\n[optim]\n";
  os << "lr = " << fmt_real(optim.lr) << "\n";
  os << "warmup = " << optim.warmup << "\n";
  os << "batch = " << optim.batch << "\n";
  os << "beta1 = " << fmt_real(optim.beta1) << "\n";
  os << "beta2 = " << fmt_real(optim.beta2) << "\n";
  os << "eps = " << fmt_real(optim.eps) << "\n";
  os << "log_every = " << optim.log_every << "\n";
  return os.str();
}

Config parse_config_text(const std::string& text, const Config& defaults) {
  Config cfg = defaults;
  std::istringstream is(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (section.empty())
      throw std::invalid_argument("config key '" + key + "' appears before any [section]");
    const std::string full = section + "." + key;
    auto it = setters().find(full);
    if (it == setters().end())
      throw std::invalid_argument("unknown config key '" + full + "'");
    it->second(cfg, full, value);
  }
  return cfg;
}

Config load_config_file(const std::string& path, const Config& defaults) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config_text(os.str(), defaults);
}

void apply_override(Config& cfg, const std::string& spec) {
  std::size_t eq = spec.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override '" + spec + "': expected section.key=value");
  const std::string key = trim(spec.substr(0, eq));
  const std::string value = trim(spec.substr(eq + 1));
  auto it = setters().find(key);
  if (it == setters().end()) throw std::invalid_argument("unknown config key '" + key + "'");
  it->second(cfg, key, value);
}

void apply_preset(Config& cfg, const std::string& name) {
  if (name == "paper-scale") {
    cfg.model.blocks = 6;
    cfg.model.separate_layers = 2;
    cfg.model.shared_layers = 2;
    cfg.model.chunk_frames = 16;  // 160 ms chunks at a 10 ms frame hop
    cfg.model.lstm_layers = 2;
    return;
  }
  throw std::invalid_argument("unknown preset '" + name + "'");
}

}  // namespace lamassu
