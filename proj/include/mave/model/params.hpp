#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "mave/errors.hpp"
#include "mave/model/config.hpp"

namespace mave::model {

using Mat = Eigen::MatrixXd;

/// All trainable tensors. Biases are 1 x n rows; the output projection is
/// d x 1 plus a 1 x 1 bias. Long-token embedding = [word | source] concat
/// with d_word + d_source = d.
struct Parameters {
  Mat word_emb;    // vocab_size x d_word
  Mat source_emb;  // max_global x d_source
  Mat global_emb;  // max_global x d

  struct Layer {
    Mat wq, wk, wv, wo;  // d x d
    Mat bq, bk, bv, bo;  // 1 x d
    Mat ln1_gain, ln1_bias;
    Mat w_ff1;  // d x d_ff
    Mat b_ff1;  // 1 x d_ff
    Mat w_ff2;  // d_ff x d
    Mat b_ff2;  // 1 x d
    Mat ln2_gain, ln2_bias;
  };
  std::vector<Layer> layers;

  Mat out_w;  // d x 1
  Mat out_b;  // 1 x 1

  static Parameters zeros(const ModelConfig& c) {
    Parameters p;
    p.word_emb = Mat::Zero(c.vocab_size, c.d_word());
    p.source_emb = Mat::Zero(c.max_global, c.d_source());
    p.global_emb = Mat::Zero(c.max_global, c.d);
    p.layers.resize(static_cast<std::size_t>(c.n_layers));
    for (auto& l : p.layers) {
      l.wq = l.wk = l.wv = l.wo = Mat::Zero(c.d, c.d);
      l.bq = l.bk = l.bv = l.bo = Mat::Zero(1, c.d);
      l.ln1_gain = l.ln1_bias = Mat::Zero(1, c.d);
      l.w_ff1 = Mat::Zero(c.d, c.d_ff());
      l.b_ff1 = Mat::Zero(1, c.d_ff());
      l.w_ff2 = Mat::Zero(c.d_ff(), c.d);
      l.b_ff2 = Mat::Zero(1, c.d);
      l.ln2_gain = l.ln2_bias = Mat::Zero(1, c.d);
    }
    p.out_w = Mat::Zero(c.d, 1);
    p.out_b = Mat::Zero(1, 1);
    return p;
  }
};

struct NamedTensor {
  std::string name;
  Mat* tensor;
};

/// Fixed-order table of every tensor; the order defines checkpoint layout
/// and optimizer state pairing.
inline std::vector<NamedTensor> tensor_table(Parameters& p) {
  std::vector<NamedTensor> t;
  t.push_back({"word_emb", &p.word_emb});
  t.push_back({"source_emb", &p.source_emb});
  t.push_back({"global_emb", &p.global_emb});
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string prefix = "layer" + std::to_string(i) + ".";
    t.push_back({prefix + "wq", &l.wq});
    t.push_back({prefix + "bq", &l.bq});
    t.push_back({prefix + "wk", &l.wk});
    t.push_back({prefix + "bk", &l.bk});
    t.push_back({prefix + "wv", &l.wv});
    t.push_back({prefix + "bv", &l.bv});
    t.push_back({prefix + "wo", &l.wo});
    t.push_back({prefix + "bo", &l.bo});
    t.push_back({prefix + "ln1_gain", &l.ln1_gain});
    t.push_back({prefix + "ln1_bias", &l.ln1_bias});
    t.push_back({prefix + "w_ff1", &l.w_ff1});
    t.push_back({prefix + "b_ff1", &l.b_ff1});
    t.push_back({prefix + "w_ff2", &l.w_ff2});
    t.push_back({prefix + "b_ff2", &l.b_ff2});
    t.push_back({prefix + "ln2_gain", &l.ln2_gain});
    t.push_back({prefix + "ln2_bias", &l.ln2_bias});
  }
  t.push_back({"out_w", &p.out_w});
  t.push_back({"out_b", &p.out_b});
  return t;
}

namespace detail {

/// Truncated normal (|z| <= 2) via rejection-sampled Box-Muller, hand-rolled
/// so the stream is identical on every platform for a given engine state.
class TruncNormal {
 public:
  explicit TruncNormal(std::uint64_t seed) : engine_(seed) {}

  double sample(double stddev) {
    for (;;) {
      const double u1 = next_unit();
      const double u2 = next_unit();
      const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
      if (std::abs(z) <= 2.0) return z * stddev;
    }
  }

 private:
  double next_unit() {
    // (0, 1]: log() stays finite
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }
  std::mt19937_64 engine_;
};

}  // namespace detail

/// Seeded init: weights and embeddings truncated normal with std 0.02,
/// biases zero, layer-norm gains one.
inline Parameters init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Parameters p = Parameters::zeros(config);
  detail::TruncNormal rng(seed);
  auto fill = [&rng](Mat& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.sample(0.02);
  };
  fill(p.word_emb);
  fill(p.source_emb);
  fill(p.global_emb);
  for (auto& l : p.layers) {
    fill(l.wq);
    fill(l.wk);
    fill(l.wv);
    fill(l.wo);
    fill(l.w_ff1);
    fill(l.w_ff2);
    l.ln1_gain.setOnes();
    l.ln2_gain.setOnes();
  }
  fill(p.out_w);
  return p;
}

struct Checkpoint {
  ModelConfig config;
  Parameters params;
  long step = 0;
};

// Checkpoint file: 8-byte magic, u32 little-endian manifest length, JSON
// manifest {version, step, config, tensors: [{name, rows, cols}]}, then raw
// row-major little-endian f32 data in manifest order.
inline constexpr char kCheckpointMagic[8] = {'M', 'A', 'V', 'E', 'C', 'K', 'P', '1'};

inline void save_checkpoint(const std::string& path, const ModelConfig& config,
                            Parameters& params, long step) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open " + path + " for writing");

  nlohmann::ordered_json manifest;
  manifest["version"] = 1;
  manifest["step"] = step;
  manifest["config"] = {{"d", config.d},
                        {"n_layers", config.n_layers},
                        {"n_heads", config.n_heads},
                        {"local_radius", config.local_radius},
                        {"max_long", config.max_long},
                        {"max_global", config.max_global},
                        {"vocab_size", config.vocab_size},
                        {"encoder_mode", std::string(to_string(config.encoder_mode))}};
  auto table = tensor_table(params);
  manifest["tensors"] = nlohmann::ordered_json::array();
  for (const auto& nt : table)
    manifest["tensors"].push_back({{"name", nt.name},
                                   {"rows", nt.tensor->rows()},
                                   {"cols", nt.tensor->cols()}});
  const std::string m = manifest.dump();
  file.write(kCheckpointMagic, sizeof kCheckpointMagic);
  const std::uint32_t len = static_cast<std::uint32_t>(m.size());
  unsigned char len_le[4] = {static_cast<unsigned char>(len & 0xFF),
                             static_cast<unsigned char>((len >> 8) & 0xFF),
                             static_cast<unsigned char>((len >> 16) & 0xFF),
                             static_cast<unsigned char>((len >> 24) & 0xFF)};
  file.write(reinterpret_cast<const char*>(len_le), 4);
  file.write(m.data(), static_cast<std::streamsize>(m.size()));
  std::vector<float> buf;
  for (const auto& nt : table) {
    const Mat& t = *nt.tensor;
    buf.resize(static_cast<std::size_t>(t.size()));
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) buf[k++] = static_cast<float>(t(r, c));
    file.write(reinterpret_cast<const char*>(buf.data()),
               static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!file) throw IoError("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open " + path);
  char magic[8];
  file.read(magic, 8);
  if (!file || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw ValidationError(path + ": not a checkpoint file");
  unsigned char len_le[4];
  file.read(reinterpret_cast<char*>(len_le), 4);
  const std::uint32_t len = static_cast<std::uint32_t>(len_le[0]) |
                            (static_cast<std::uint32_t>(len_le[1]) << 8) |
                            (static_cast<std::uint32_t>(len_le[2]) << 16) |
                            (static_cast<std::uint32_t>(len_le[3]) << 24);
  std::string m(len, '\0');
  file.read(m.data(), len);
  if (!file) throw ValidationError(path + ": truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(m);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": bad manifest: " + e.what());
  }

  Checkpoint ckpt;
  const auto& jc = manifest.at("config");
  ckpt.config.d = jc.at("d").get<int>();
  ckpt.config.n_layers = jc.at("n_layers").get<int>();
  ckpt.config.n_heads = jc.at("n_heads").get<int>();
  ckpt.config.local_radius = jc.at("local_radius").get<int>();
  ckpt.config.max_long = jc.at("max_long").get<int>();
  ckpt.config.max_global = jc.at("max_global").get<int>();
  ckpt.config.vocab_size = jc.at("vocab_size").get<int>();
  ckpt.config.encoder_mode = encoder_mode_from_string(jc.at("encoder_mode").get<std::string>());
  ckpt.step = manifest.at("step").get<long>();
  ckpt.params = Parameters::zeros(ckpt.config);

  auto table = tensor_table(ckpt.params);
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != table.size())
    throw ValidationError(path + ": tensor count mismatch");
  std::vector<float> buf;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& jt = tensors.at(i);
    const auto rows = jt.at("rows").get<Eigen::Index>();
    const auto cols = jt.at("cols").get<Eigen::Index>();
    if (jt.at("name").get<std::string>() != table[i].name ||
        rows != table[i].tensor->rows() || cols != table[i].tensor->cols())
      throw ValidationError(path + ": tensor " + table[i].name + " shape or name mismatch");
    buf.resize(static_cast<std::size_t>(rows * cols));
    file.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!file) throw ValidationError(path + ": truncated tensor data");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) (*table[i].tensor)(r, c) = buf[k++];
  }
  return ckpt;
}

}  // namespace mave::model
