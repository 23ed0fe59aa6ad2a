#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mave/core.hpp"
#include "mave/errors.hpp"
#include "mave/model/config.hpp"
#include "mave/model/encode.hpp"
#include "mave/model/layout.hpp"
#include "mave/model/params.hpp"
#include "mave/utf8.hpp"

// Forward pass, sigmoid cross-entropy loss and full backward pass for the
// structured-attention encoder. The four attention patterns are realized as
// one masked multi-head attention over the concatenated [global; long]
// sequence; each layer is post-LN with a two-layer GELU feed-forward block.
// Everything computes in double; checkpoints store f32.

namespace mave::model {

inline constexpr double kProbEps = 1e-7;
inline constexpr double kLnEps = 1e-12;

namespace detail {

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_grad(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * phi;
}

/// Sinusoidal position encoding, restarting at 0 in every segment.
inline Mat position_encoding(const std::vector<int>& pos_in_segment, int d) {
  Mat pe = Mat::Zero(static_cast<Eigen::Index>(pos_in_segment.size()), d);
  for (Eigen::Index t = 0; t < pe.rows(); ++t) {
    const double pos = pos_in_segment[static_cast<std::size_t>(t)];
    for (int i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / d);
      pe(t, i) = std::sin(pos * freq);
      if (i + 1 < d) pe(t, i + 1) = std::cos(pos * freq);
    }
  }
  return pe;
}

struct LayerNormCache {
  Mat xhat;
  Eigen::VectorXd rstd;
};

inline Mat layer_norm(const Mat& x, const Mat& gain, const Mat& bias, LayerNormCache& cache) {
  const Eigen::Index n = x.rows(), d = x.cols();
  cache.xhat.resize(n, d);
  cache.rstd.resize(n);
  Mat out(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    const double rstd = 1.0 / std::sqrt(var + kLnEps);
    cache.rstd(r) = rstd;
    cache.xhat.row(r) = (x.row(r).array() - mu) * rstd;
    out.row(r) = cache.xhat.row(r).cwiseProduct(gain.row(0)) + bias.row(0);
  }
  return out;
}

inline Mat layer_norm_backward(const Mat& dy, const Mat& gain, const LayerNormCache& cache,
                               Mat& dgain, Mat& dbias) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  Mat dx(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(gain.row(0));
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(cache.xhat.row(r)).mean();
    dx.row(r) =
        cache.rstd(r) * (dxhat.array() - m1 - cache.xhat.row(r).array() * m2).matrix();
  }
  dgain.row(0) += dy.cwiseProduct(cache.xhat).colwise().sum();
  dbias.row(0) += dy.colwise().sum();
  return dx;
}

}  // namespace detail

struct LayerCache {
  Mat x_in, q, k, v;
  std::vector<Mat> head_logits;  // masked entries are -inf, pre-softmax
  std::vector<Mat> head_attn;    // post-softmax rows, masked entries 0
  Mat ctx, res1, ln1_out, ff_pre, ff_act, res2, out;
  detail::LayerNormCache ln1, ln2;
};

struct ForwardCache {
  AttentionLayout layout;
  Mat x0;
  std::vector<LayerCache> layers;
  Eigen::VectorXd logits, probs;
};

struct ForwardResult {
  Eigen::VectorXd long_probs;    // one per long position
  Eigen::VectorXd global_probs;  // one per segment
};

/// Embeds the example: long rows are [word | source] lookups plus the
/// per-segment position encoding; global rows are global-table lookups.
inline Mat embed(const EncodedInput& enc, const Parameters& params, const ModelConfig& config) {
  const int G = enc.n_global(), T = enc.n_long();
  Mat x(G + T, config.d);
  for (int g = 0; g < G; ++g)
    x.row(g) = params.global_emb.row(enc.global_ids[static_cast<std::size_t>(g)]);
  const Mat pe = detail::position_encoding(enc.pos_in_segment, config.d);
  for (int t = 0; t < T; ++t) {
    const int word = enc.long_ids[static_cast<std::size_t>(t)];
    const int seg = enc.segment_of[static_cast<std::size_t>(t)];
    x.row(G + t).head(config.d_word()) = params.word_emb.row(word);
    x.row(G + t).tail(config.d_source()) = params.source_emb.row(seg);
    x.row(G + t) += pe.row(t);
  }
  return x;
}

inline ForwardResult forward(const EncodedInput& enc, const Parameters& params,
                             const ModelConfig& config, ForwardCache* cache = nullptr) {
  const int G = enc.n_global(), T = enc.n_long();
  const int N = G + T;
  const int H = config.n_heads;
  const int dh = config.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const double neg_inf = -std::numeric_limits<double>::infinity();

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.layout = build_attention_layout(enc.segment_of, G, config);
  c.x0 = embed(enc, params, config);
  c.layers.assign(static_cast<std::size_t>(config.n_layers), LayerCache{});

  Mat x = c.x0;
  for (int li = 0; li < config.n_layers; ++li) {
    const auto& lp = params.layers[static_cast<std::size_t>(li)];
    LayerCache& lc = c.layers[static_cast<std::size_t>(li)];
    lc.x_in = x;
    lc.q = (x * lp.wq).rowwise() + lp.bq.row(0);
    lc.k = (x * lp.wk).rowwise() + lp.bk.row(0);
    lc.v = (x * lp.wv).rowwise() + lp.bv.row(0);
    lc.head_logits.assign(static_cast<std::size_t>(H), Mat());
    lc.head_attn.assign(static_cast<std::size_t>(H), Mat());
    lc.ctx.resize(N, config.d);
    for (int h = 0; h < H; ++h) {
      const auto qh = lc.q.middleCols(h * dh, dh);
      const auto kh = lc.k.middleCols(h * dh, dh);
      const auto vh = lc.v.middleCols(h * dh, dh);
      Mat logits = qh * kh.transpose() * scale;
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
          if (!c.layout.allowed(i, j)) logits(i, j) = neg_inf;
      Mat attn = Mat::Zero(N, N);
      for (int i = 0; i < N; ++i) {
        double row_max = neg_inf;
        for (int j = 0; j < N; ++j) row_max = std::max(row_max, logits(i, j));
        double denom = 0.0;
        for (int j = 0; j < N; ++j) {
          if (logits(i, j) == neg_inf) continue;
          const double e = std::exp(logits(i, j) - row_max);
          attn(i, j) = e;
          denom += e;
        }
        attn.row(i) /= denom;
      }
      lc.ctx.middleCols(h * dh, dh) = attn * vh;
      lc.head_logits[static_cast<std::size_t>(h)] = std::move(logits);
      lc.head_attn[static_cast<std::size_t>(h)] = std::move(attn);
    }
    const Mat attn_out = (lc.ctx * lp.wo).rowwise() + lp.bo.row(0);
    lc.res1 = x + attn_out;
    lc.ln1_out = detail::layer_norm(lc.res1, lp.ln1_gain, lp.ln1_bias, lc.ln1);
    lc.ff_pre = (lc.ln1_out * lp.w_ff1).rowwise() + lp.b_ff1.row(0);
    lc.ff_act = lc.ff_pre.unaryExpr([](double v) { return detail::gelu(v); });
    const Mat ff_out = (lc.ff_act * lp.w_ff2).rowwise() + lp.b_ff2.row(0);
    lc.res2 = lc.ln1_out + ff_out;
    lc.out = detail::layer_norm(lc.res2, lp.ln2_gain, lp.ln2_bias, lc.ln2);
    if (!lc.out.allFinite())
      throw NumericFault("non-finite activation in layer " + std::to_string(li));
    x = lc.out;
  }

  c.logits = (x * params.out_w).col(0) + Eigen::VectorXd::Constant(N, params.out_b(0, 0));
  c.probs = c.logits.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  ForwardResult result;
  result.global_probs = c.probs.head(G);
  result.long_probs = c.probs.tail(T);
  return result;
}

/// Sigmoid cross-entropy, SUM reduction over scored long tokens plus scored
/// global tokens. Probabilities are clamped to [eps, 1-eps].
inline double loss(const ForwardResult& result, const EncodedInput& enc) {
  auto term = [](double p, double y) {
    const double pc = std::min(std::max(p, kProbEps), 1.0 - kProbEps);
    return -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
  };
  double total = 0.0;
  for (int t = 0; t < enc.n_long(); ++t)
    if (enc.long_scored[static_cast<std::size_t>(t)])
      total += term(result.long_probs(t), enc.long_labels[static_cast<std::size_t>(t)]);
  for (int g = 0; g < enc.n_global(); ++g)
    if (enc.global_scored[static_cast<std::size_t>(g)])
      total += term(result.global_probs(g), enc.global_labels[static_cast<std::size_t>(g)]);
  return total;
}

/// Accumulates d(loss)/d(params) into `grads` by backpropagating through the
/// cached forward pass.
inline void backward(const EncodedInput& enc, const Parameters& params,
                     const ModelConfig& config, const ForwardCache& cache, Parameters& grads) {
  const int G = enc.n_global(), T = enc.n_long();
  const int N = G + T;
  const int H = config.n_heads;
  const int dh = config.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // d loss / d logit = p - y on scored, unclamped positions
  Eigen::VectorXd dlogits = Eigen::VectorXd::Zero(N);
  auto scored_grad = [&](int row, double y) {
    const double p = cache.probs(row);
    if (p <= kProbEps || p >= 1.0 - kProbEps) return;  // clamped: locally constant
    dlogits(row) = p - y;
  };
  for (int g = 0; g < G; ++g)
    if (enc.global_scored[static_cast<std::size_t>(g)])
      scored_grad(g, enc.global_labels[static_cast<std::size_t>(g)]);
  for (int t = 0; t < T; ++t)
    if (enc.long_scored[static_cast<std::size_t>(t)])
      scored_grad(G + t, enc.long_labels[static_cast<std::size_t>(t)]);

  const Mat& x_final = cache.layers.back().out;
  grads.out_w += x_final.transpose() * dlogits;
  grads.out_b(0, 0) += dlogits.sum();
  Mat dx = dlogits * params.out_w.transpose();

  for (int li = config.n_layers - 1; li >= 0; --li) {
    const auto& lp = params.layers[static_cast<std::size_t>(li)];
    auto& lg = grads.layers[static_cast<std::size_t>(li)];
    const LayerCache& lc = cache.layers[static_cast<std::size_t>(li)];

    // out = LN2(res2)
    Mat dres2 = detail::layer_norm_backward(dx, lp.ln2_gain, lc.ln2, lg.ln2_gain, lg.ln2_bias);

    // res2 = ln1_out + gelu(ln1_out*W1 + b1)*W2 + b2
    lg.w_ff2 += lc.ff_act.transpose() * dres2;
    lg.b_ff2.row(0) += dres2.colwise().sum();
    Mat dff_act = dres2 * lp.w_ff2.transpose();
    Mat dff_pre = dff_act.cwiseProduct(
        lc.ff_pre.unaryExpr([](double v) { return detail::gelu_grad(v); }));
    lg.w_ff1 += lc.ln1_out.transpose() * dff_pre;
    lg.b_ff1.row(0) += dff_pre.colwise().sum();
    Mat dln1_out = dres2 + dff_pre * lp.w_ff1.transpose();

    // ln1_out = LN1(res1)
    Mat dres1 =
        detail::layer_norm_backward(dln1_out, lp.ln1_gain, lc.ln1, lg.ln1_gain, lg.ln1_bias);

    // res1 = x_in + ctx*Wo + bo
    Mat dx_in = dres1;
    lg.wo += lc.ctx.transpose() * dres1;
    lg.bo.row(0) += dres1.colwise().sum();
    Mat dctx = dres1 * lp.wo.transpose();

    Mat dq = Mat::Zero(N, config.d), dk = Mat::Zero(N, config.d), dv = Mat::Zero(N, config.d);
    for (int h = 0; h < H; ++h) {
      const auto qh = lc.q.middleCols(h * dh, dh);
      const auto kh = lc.k.middleCols(h * dh, dh);
      const auto vh = lc.v.middleCols(h * dh, dh);
      const Mat& attn = lc.head_attn[static_cast<std::size_t>(h)];
      const auto dctx_h = dctx.middleCols(h * dh, dh);
      Mat dattn = dctx_h * vh.transpose();
      dv.middleCols(h * dh, dh) = attn.transpose() * dctx_h;
      // softmax rows: dS = A .* (dA - rowsum(dA .* A))
      Mat dscores(N, N);
      for (int i = 0; i < N; ++i) {
        const double s = attn.row(i).dot(dattn.row(i));
        dscores.row(i) = attn.row(i).cwiseProduct((dattn.row(i).array() - s).matrix());
      }
      dq.middleCols(h * dh, dh) = dscores * kh * scale;
      dk.middleCols(h * dh, dh) = dscores.transpose() * qh * scale;
    }
    lg.wq += lc.x_in.transpose() * dq;
    lg.bq.row(0) += dq.colwise().sum();
    lg.wk += lc.x_in.transpose() * dk;
    lg.bk.row(0) += dk.colwise().sum();
    lg.wv += lc.x_in.transpose() * dv;
    lg.bv.row(0) += dv.colwise().sum();
    dx_in += dq * lp.wq.transpose() + dk * lp.wk.transpose() + dv * lp.wv.transpose();
    dx = std::move(dx_in);
  }

  // embedding scatter
  for (int g = 0; g < G; ++g)
    grads.global_emb.row(enc.global_ids[static_cast<std::size_t>(g)]) += dx.row(g);
  for (int t = 0; t < T; ++t) {
    grads.word_emb.row(enc.long_ids[static_cast<std::size_t>(t)]) +=
        dx.row(G + t).head(config.d_word());
    grads.source_emb.row(enc.segment_of[static_cast<std::size_t>(t)]) +=
        dx.row(G + t).tail(config.d_source());
  }
}

/// Maximal runs of consecutive scored long tokens with p >= threshold inside
/// one segment, mapped back to character spans. An empty result means "no
/// value".
inline std::vector<Span> predict_spans(const Eigen::VectorXd& long_probs,
                                       const EncodedInput& enc, double threshold = 0.5) {
  std::vector<Span> spans;
  const int T = enc.n_long();
  int t = 0;
  while (t < T) {
    const bool hot = enc.long_scored[static_cast<std::size_t>(t)] != 0 &&
                     long_probs(t) >= threshold;
    if (!hot) {
      ++t;
      continue;
    }
    const int seg = enc.segment_of[static_cast<std::size_t>(t)];
    int last = t;
    while (last + 1 < T && enc.segment_of[static_cast<std::size_t>(last + 1)] == seg &&
           enc.long_scored[static_cast<std::size_t>(last + 1)] != 0 &&
           long_probs(last + 1) >= threshold)
      ++last;
    Span sp;
    sp.pid = enc.segment_pid[static_cast<std::size_t>(seg)];
    sp.begin = enc.char_begin[static_cast<std::size_t>(t)];
    sp.end = enc.char_end[static_cast<std::size_t>(last)];
    sp.value = utf8::substr(enc.source_texts[static_cast<std::size_t>(sp.pid)], sp.begin, sp.end);
    spans.push_back(std::move(sp));
    t = last + 1;
  }
  return spans;
}

}  // namespace mave::model
