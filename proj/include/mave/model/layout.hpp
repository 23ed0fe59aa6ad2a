#pragma once

#include <cstdlib>
#include <vector>

#include "mave/errors.hpp"
#include "mave/model/config.hpp"

namespace mave::model {

/// The four attention mask relations over G global tokens and T long tokens:
///   g2g(i, j)  — every global attends to every global
///   g2l(g, t)  — a global attends to the long tokens of its own segment
///   l2g(t, g)  — every long token attends to every global
///   l2l(t, u)  — long tokens attend within their segment up to the local
///                radius (flat mode: across the whole long sequence)
struct AttentionLayout {
  int n_global = 0;
  int n_long = 0;
  std::vector<std::uint8_t> g2g, g2l, l2g, l2l;  // row-major

  bool g2g_at(int i, int j) const { return g2g[static_cast<std::size_t>(i * n_global + j)] != 0; }
  bool g2l_at(int g, int t) const { return g2l[static_cast<std::size_t>(g * n_long + t)] != 0; }
  bool l2g_at(int t, int g) const { return l2g[static_cast<std::size_t>(t * n_global + g)] != 0; }
  bool l2l_at(int t, int u) const { return l2l[static_cast<std::size_t>(t * n_long + u)] != 0; }

  /// Mask over the concatenated [global; long] sequence of size
  /// (G+T) x (G+T): allowed(i, j) is true iff position i may attend to j.
  bool allowed(int i, int j) const {
    const bool i_global = i < n_global;
    const bool j_global = j < n_global;
    if (i_global && j_global) return g2g_at(i, j);
    if (i_global) return g2l_at(i, j - n_global);
    if (j_global) return l2g_at(i - n_global, j);
    return l2l_at(i - n_global, j - n_global);
  }
};

/// Materializes the four mask relations for a segment map. `segment_of[t]`
/// is the segment (= global token) index of long position t; segment ids
/// must be dense 0..S-1.
inline AttentionLayout build_attention_layout(const std::vector<int>& segment_of,
                                              int n_segments, const ModelConfig& config) {
  for (const int s : segment_of)
    if (s < 0 || s >= n_segments)
      throw ContractError("segment index " + std::to_string(s) + " outside 0.." +
                          std::to_string(n_segments - 1));
  AttentionLayout layout;
  layout.n_global = n_segments;
  layout.n_long = static_cast<int>(segment_of.size());
  const int G = layout.n_global;
  const int T = layout.n_long;
  layout.g2g.assign(static_cast<std::size_t>(G) * static_cast<std::size_t>(G), 1);
  layout.l2g.assign(static_cast<std::size_t>(T) * static_cast<std::size_t>(G), 1);
  layout.g2l.assign(static_cast<std::size_t>(G) * static_cast<std::size_t>(T), 0);
  layout.l2l.assign(static_cast<std::size_t>(T) * static_cast<std::size_t>(T), 0);
  for (int t = 0; t < T; ++t)
    layout.g2l[static_cast<std::size_t>(segment_of[static_cast<std::size_t>(t)] * T + t)] = 1;
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u < T; ++u) {
      bool ok;
      if (config.encoder_mode == EncoderMode::flat) {
        ok = true;
      } else {
        ok = segment_of[static_cast<std::size_t>(t)] == segment_of[static_cast<std::size_t>(u)] &&
             std::abs(t - u) <= config.local_radius;
      }
      if (ok) layout.l2l[static_cast<std::size_t>(t * T + u)] = 1;
    }
  }
  return layout;
}

}  // namespace mave::model
