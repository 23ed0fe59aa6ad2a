#pragma once

#include <fstream>
#include <map>
#include <string>

#include "mave/errors.hpp"

namespace mave::model {

enum class EncoderMode { structured, flat };

inline std::string_view to_string(EncoderMode m) {
  return m == EncoderMode::structured ? "structured" : "flat";
}

inline EncoderMode encoder_mode_from_string(std::string_view s) {
  if (s == "structured") return EncoderMode::structured;
  if (s == "flat") return EncoderMode::flat;
  throw ConfigError("unknown encoder_mode: " + std::string(s));
}

/// Model shape. Defaults are desk scale; paper_scale() gives the published
/// configuration.
struct ModelConfig {
  int d = 64;
  int n_layers = 2;
  int n_heads = 4;
  int local_radius = 4;
  int max_long = 128;
  int max_global = 8;
  int vocab_size = 0;
  EncoderMode encoder_mode = EncoderMode::structured;

  static ModelConfig desk_scale() { return ModelConfig{}; }

  static ModelConfig paper_scale() {
    ModelConfig c;
    c.d = 768;
    c.n_layers = 12;
    c.n_heads = 12;
    c.local_radius = 84;
    c.max_long = 1024;
    c.max_global = 64;
    c.vocab_size = 30522;
    return c;
  }

  int d_source() const { return d / 8 > 0 ? d / 8 : 1; }
  int d_word() const { return d - d_source(); }
  int d_ff() const { return 4 * d; }
  int head_dim() const { return d / n_heads; }

  void validate() const {
    if (d <= 0 || n_layers <= 0 || n_heads <= 0)
      throw ConfigError("d, n_layers and n_heads must be positive");
    if (d % n_heads != 0)
      throw ConfigError("d (" + std::to_string(d) + ") must be divisible by n_heads (" +
                        std::to_string(n_heads) + ")");
    if (local_radius < 0) throw ConfigError("local_radius must be >= 0");
    if (max_long <= 0 || max_global < 3)
      throw ConfigError("max_long must be positive and max_global at least 3");
    if (vocab_size <= 0) throw ConfigError("vocab_size must be positive");
  }
};

/// Optimization settings. Paper values: peak 3e-5, warmup 10000, total
/// 200000, batch 128.
struct TrainConfig {
  int batch_size = 16;
  long total_steps = 2000;
  long warmup_steps = 100;
  double peak_lr = 1e-3;
  double threshold = 0.5;
};

/// Flat `key = value` file; '#' starts a comment.
inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(file, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ParseError(path + " line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ParseError(path + " line " + std::to_string(line_no) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

/// Applies config-file keys onto model/train configs. Unknown keys are an
/// error; returns any "vocab_file" value.
inline std::string apply_config(const std::map<std::string, std::string>& kv,
                                ModelConfig& model, TrainConfig& train) {
  std::string vocab_file;
  for (const auto& [key, value] : kv) {
    try {
      if (key == "d") model.d = std::stoi(value);
      else if (key == "n_layers") model.n_layers = std::stoi(value);
      else if (key == "n_heads") model.n_heads = std::stoi(value);
      else if (key == "local_radius") model.local_radius = std::stoi(value);
      else if (key == "max_long") model.max_long = std::stoi(value);
      else if (key == "max_global") model.max_global = std::stoi(value);
      else if (key == "vocab_size") model.vocab_size = std::stoi(value);
      else if (key == "encoder_mode") model.encoder_mode = encoder_mode_from_string(value);
      else if (key == "batch_size") train.batch_size = std::stoi(value);
      else if (key == "steps") train.total_steps = std::stol(value);
      else if (key == "warmup_steps") train.warmup_steps = std::stol(value);
      else if (key == "peak_lr") train.peak_lr = std::stod(value);
      else if (key == "threshold") train.threshold = std::stod(value);
      else if (key == "vocab_file") vocab_file = value;
      else throw ConfigError("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      throw ConfigError("config key " + key + ": cannot parse value \"" + value + "\"");
    } catch (const std::out_of_range&) {
      throw ConfigError("config key " + key + ": value out of range \"" + value + "\"");
    }
  }
  return vocab_file;
}

}  // namespace mave::model
