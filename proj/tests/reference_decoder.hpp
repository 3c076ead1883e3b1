// Straight-line scalar reference of the hybrid decoder forward pass. Plain
// nested loops over std::vector<double>, no tensor or graph machinery, used
// as an independent oracle for the batched implementation.
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "core/optim.hpp"
#include "core/runconfig.hpp"

namespace refdec {

using Vec = std::vector<double>;
using Params = std::map<std::string, Vec>;

inline Params snapshot(const himap::ParamStore<double>& store) {
  Params out;
  for (const auto& [name, p] : store.params()) out[name] = *p.value;
  return out;
}

struct LayerOut {
  Vec class_logits;  // E*NC
  Vec points;        // E*P*2
  Vec mask_logits;   // E*HW
};

namespace detail {

inline const Vec& at(const Params& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw std::runtime_error("missing param " + name);
  return it->second;
}

// y[n*out] = x[n*in] * w[in*out] + b[out]
inline Vec linear(const Vec& x, int n, int in, const Vec& w, const Vec& b, int out) {
  Vec y(static_cast<size_t>(n) * out, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < in; ++k) {
      double xv = x[static_cast<size_t>(i) * in + k];
      for (int j = 0; j < out; ++j) y[static_cast<size_t>(i) * out + j] += xv * w[static_cast<size_t>(k) * out + j];
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < out; ++j) y[static_cast<size_t>(i) * out + j] += b[static_cast<size_t>(j)];
  return y;
}

inline Vec lin(const Params& p, const std::string& name, const Vec& x, int n, int in, int out) {
  return linear(x, n, in, at(p, name + ".w"), at(p, name + ".b"), out);
}

inline void softmax_rows(Vec& x, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double mx = x[static_cast<size_t>(r) * cols];
    for (int c = 1; c < cols; ++c) mx = std::max(mx, x[static_cast<size_t>(r) * cols + c]);
    double sum = 0;
    for (int c = 0; c < cols; ++c) {
      double e = std::exp(x[static_cast<size_t>(r) * cols + c] - mx);
      x[static_cast<size_t>(r) * cols + c] = e;
      sum += e;
    }
    for (int c = 0; c < cols; ++c) x[static_cast<size_t>(r) * cols + c] /= sum;
  }
}

inline Vec softmax_vec(const Vec& x) {
  Vec y = x;
  softmax_rows(y, 1, static_cast<int>(x.size()));
  return y;
}

inline void layernorm_rows(Vec& x, int rows, int cols, const Vec& g, const Vec& b,
                           double eps = 1e-5) {
  for (int r = 0; r < rows; ++r) {
    double mu = 0;
    for (int c = 0; c < cols; ++c) mu += x[static_cast<size_t>(r) * cols + c];
    mu /= cols;
    double var = 0;
    for (int c = 0; c < cols; ++c) {
      double d = x[static_cast<size_t>(r) * cols + c] - mu;
      var += d * d;
    }
    var /= cols;
    double rs = 1.0 / std::sqrt(var + eps);
    for (int c = 0; c < cols; ++c) {
      double xh = (x[static_cast<size_t>(r) * cols + c] - mu) * rs;
      x[static_cast<size_t>(r) * cols + c] = xh * g[static_cast<size_t>(c)] + b[static_cast<size_t>(c)];
    }
  }
}

inline double sigmoid(double v) {
  return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

inline void relu_inplace(Vec& x) {
  for (double& v : x) v = v > 0 ? v : 0.0;
}

// pre-norm FFN block with residual
inline Vec ffn_block(const Params& p, const std::string& name, const Vec& x, int n, int c,
                     int mult) {
  Vec t = x;
  layernorm_rows(t, n, c, at(p, name + ".ln.g"), at(p, name + ".ln.b"));
  Vec h = lin(p, name + ".fc1", t, n, c, c * mult);
  relu_inplace(h);
  Vec f = lin(p, name + ".fc2", h, n, c * mult, c);
  Vec y = x;
  for (size_t i = 0; i < y.size(); ++i) y[i] += f[i];
  return y;
}

// pre-norm multi-head self-attention with residual over n tokens
inline Vec mha_block(const Params& p, const std::string& name, const Vec& x, int n, int c,
                     int heads) {
  int dh = c / heads;
  Vec t = x;
  layernorm_rows(t, n, c, at(p, name + ".ln.g"), at(p, name + ".ln.b"));
  Vec q = lin(p, name + ".wq", t, n, c, c);
  Vec k = lin(p, name + ".wk", t, n, c, c);
  Vec v = lin(p, name + ".wv", t, n, c, c);
  Vec ctx(static_cast<size_t>(n) * c, 0.0);
  double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < n; ++i) {
      Vec logits(static_cast<size_t>(n));
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int d = 0; d < dh; ++d)
          s += q[static_cast<size_t>(i) * c + h * dh + d] * k[static_cast<size_t>(j) * c + h * dh + d];
        logits[static_cast<size_t>(j)] = s * scale;
      }
      softmax_rows(logits, 1, n);
      for (int j = 0; j < n; ++j)
        for (int d = 0; d < dh; ++d)
          ctx[static_cast<size_t>(i) * c + h * dh + d] +=
              logits[static_cast<size_t>(j)] * v[static_cast<size_t>(j) * c + h * dh + d];
    }
  }
  Vec proj = lin(p, name + ".wo", ctx, n, c, c);
  Vec y = x;
  for (size_t i = 0; i < y.size(); ++i) y[i] += proj[i];
  return y;
}

inline Vec sinusoidal(int hgrid, int wgrid, int c) {
  Vec out(static_cast<size_t>(hgrid) * wgrid * c, 0.0);
  int half = c / 2, pairs = half / 2;
  for (int r = 0; r < hgrid; ++r)
    for (int col = 0; col < wgrid; ++col) {
      double* p = out.data() + (static_cast<size_t>(r) * wgrid + col) * c;
      for (int k2 = 0; k2 < pairs; ++k2) {
        double freq = std::pow(10000.0, 2.0 * k2 / half);
        p[2 * k2 + 0] = std::sin(r / freq);
        p[2 * k2 + 1] = std::cos(r / freq);
        p[half + 2 * k2 + 0] = std::sin(col / freq);
        p[half + 2 * k2 + 1] = std::cos(col / freq);
      }
    }
  return out;
}

// bilinear sample of grid[h*w*c] at (x, y) in cell coordinates, zero padded
inline void bilinear(const Vec& grid, int h, int w, int c, double x, double y, double* out) {
  int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  double fx = x - x0, fy = y - y0;
  struct Corner {
    int xi, yi;
    double wgt;
  } corners[4] = {{x0, y0, (1 - fy) * (1 - fx)},
                  {x0 + 1, y0, (1 - fy) * fx},
                  {x0, y0 + 1, fy * (1 - fx)},
                  {x0 + 1, y0 + 1, fy * fx}};
  for (int k = 0; k < c; ++k) out[k] = 0.0;
  for (const Corner& cr : corners) {
    if (cr.xi < 0 || cr.xi >= w || cr.yi < 0 || cr.yi >= h) continue;
    const double* cell = grid.data() + (static_cast<size_t>(cr.yi) * w + cr.xi) * c;
    for (int k = 0; k < c; ++k) out[k] += cr.wgt * cell[k];
  }
}

}  // namespace detail

// Full forward pass: layer by layer, element by element, point by point.
inline std::vector<LayerOut> forward(const Params& params, const himap::DecoderConfig& cfg,
                                     const Vec& bev, int grid_h, int grid_w) {
  using namespace detail;
  const int E = cfg.elements, P = cfg.points, C = cfg.channels, K = cfg.sample_points;
  const int NC = cfg.num_classes, HW = grid_h * grid_w;

  Vec bx = sinusoidal(grid_h, grid_w, C);

  // learnable initial state
  Vec hiquery = at(params, "query.hiquery");  // E*(P+1)*C
  Vec anchors(static_cast<size_t>(E) * P * 2);
  {
    const Vec& logits = at(params, "query.anchor_logits");
    for (size_t i = 0; i < anchors.size(); ++i) anchors[i] = sigmoid(logits[i]);
  }
  Vec mask(static_cast<size_t>(E) * HW, 1.0);

  std::vector<LayerOut> result;
  for (int l = 0; l < cfg.layers; ++l) {
    auto ln = [l](const std::string& s) { return "layers." + std::to_string(l) + "." + s; };

    // decompose
    Vec qp(static_cast<size_t>(E) * P * C), qe(static_cast<size_t>(E) * C);
    for (int i = 0; i < E; ++i) {
      for (int j = 0; j < P; ++j)
        for (int k = 0; k < C; ++k)
          qp[(static_cast<size_t>(i) * P + j) * C + k] =
              hiquery[(static_cast<size_t>(i) * (P + 1) + j) * C + k];
      for (int k = 0; k < C; ++k)
        qe[static_cast<size_t>(i) * C + k] = hiquery[(static_cast<size_t>(i) * (P + 1) + P) * C + k];
    }

    // anchor position embedding
    Vec bp = lin(params, ln("wb"), anchors, E * P, 2, C);
    Vec qhat = qp;
    for (size_t i = 0; i < qhat.size(); ++i) qhat[i] += bp[i];

    // sampling offsets and weights
    Vec offsets = lin(params, ln("wo"), qhat, E * P, C, 2 * K);
    Vec weights = lin(params, ln("wa"), qhat, E * P, C, K);
    softmax_rows(weights, E * P, K);

    // deformable point feature extraction
    Vec xdot_p(static_cast<size_t>(E) * P * C);
    {
      const Vec& wv_w = at(params, ln("wv") + ".w");
      const Vec& wv_b = at(params, ln("wv") + ".b");
      Vec sampled(static_cast<size_t>(C));
      for (int j = 0; j < E * P; ++j) {
        Vec acc(static_cast<size_t>(C), 0.0);
        for (int k = 0; k < K; ++k) {
          double gx = anchors[static_cast<size_t>(j) * 2 + 0] * (grid_w - 1) +
                      offsets[static_cast<size_t>(j) * 2 * K + 2 * k + 0];
          double gy = anchors[static_cast<size_t>(j) * 2 + 1] * (grid_h - 1) +
                      offsets[static_cast<size_t>(j) * 2 * K + 2 * k + 1];
          bilinear(bev, grid_h, grid_w, C, gx, gy, sampled.data());
          // W_v applied to the sample, then the attention weight
          for (int a = 0; a < C; ++a) {
            double v = wv_b[static_cast<size_t>(a)];
            for (int bk = 0; bk < C; ++bk) v += sampled[static_cast<size_t>(bk)] * wv_w[static_cast<size_t>(bk) * C + a];
            acc[static_cast<size_t>(a)] += weights[static_cast<size_t>(j) * K + k] * v;
          }
        }
        for (int a = 0; a < C; ++a)
          xdot_p[static_cast<size_t>(j) * C + a] = acc[static_cast<size_t>(a)] + qp[static_cast<size_t>(j) * C + a];
      }
    }

    // shared position embedding for the element query
    Vec w_pe = softmax_vec(at(params, ln("w_pe")));
    Vec be(static_cast<size_t>(E) * C, 0.0);
    for (int i = 0; i < E; ++i)
      for (int j = 0; j < P; ++j)
        for (int k = 0; k < C; ++k)
          be[static_cast<size_t>(i) * C + k] += w_pe[static_cast<size_t>(j)] * bp[(static_cast<size_t>(i) * P + j) * C + k];

    // masked element attention
    Vec xdot_e(static_cast<size_t>(E) * C);
    {
      double scale = cfg.eq4_scale ? 1.0 / std::sqrt(static_cast<double>(C)) : 1.0;
      for (int i = 0; i < E; ++i) {
        Vec logits(static_cast<size_t>(HW));
        for (int s = 0; s < HW; ++s) {
          double acc = 0;
          for (int k = 0; k < C; ++k) {
            double qv = qe[static_cast<size_t>(i) * C + k] + be[static_cast<size_t>(i) * C + k];
            double xv = bev[static_cast<size_t>(s) * C + k] + bx[static_cast<size_t>(s) * C + k];
            acc += qv * xv;
          }
          logits[static_cast<size_t>(s)] = acc * scale;
        }
        softmax_rows(logits, 1, HW);
        for (int k = 0; k < C; ++k) {
          double acc = 0;
          for (int s = 0; s < HW; ++s)
            acc += mask[static_cast<size_t>(i) * HW + s] * logits[static_cast<size_t>(s)] *
                   bev[static_cast<size_t>(s) * C + k];
          xdot_e[static_cast<size_t>(i) * C + k] = acc + qe[static_cast<size_t>(i) * C + k];
        }
      }
    }

    // refinement: per-element single-head self-attention over points, then FFN
    Vec xddot_p;
    {
      Vec t = xdot_p;
      layernorm_rows(t, E * P, C, at(params, ln("frp.attn.ln.g")), at(params, ln("frp.attn.ln.b")));
      Vec q = lin(params, ln("frp.attn.wq"), t, E * P, C, C);
      Vec k = lin(params, ln("frp.attn.wk"), t, E * P, C, C);
      Vec v = lin(params, ln("frp.attn.wv"), t, E * P, C, C);
      Vec ctx(static_cast<size_t>(E) * P * C, 0.0);
      double scale = 1.0 / std::sqrt(static_cast<double>(C));
      for (int i = 0; i < E; ++i) {
        for (int a = 0; a < P; ++a) {
          Vec logits(static_cast<size_t>(P));
          for (int b = 0; b < P; ++b) {
            double s = 0;
            for (int d = 0; d < C; ++d)
              s += q[(static_cast<size_t>(i) * P + a) * C + d] * k[(static_cast<size_t>(i) * P + b) * C + d];
            logits[static_cast<size_t>(b)] = s * scale;
          }
          softmax_rows(logits, 1, P);
          for (int b = 0; b < P; ++b)
            for (int d = 0; d < C; ++d)
              ctx[(static_cast<size_t>(i) * P + a) * C + d] +=
                  logits[static_cast<size_t>(b)] * v[(static_cast<size_t>(i) * P + b) * C + d];
        }
      }
      Vec proj = lin(params, ln("frp.attn.wo"), ctx, E * P, C, C);
      xddot_p = xdot_p;
      for (size_t i = 0; i < xddot_p.size(); ++i) xddot_p[i] += proj[i];
      xddot_p = ffn_block(params, ln("frp.ffn"), xddot_p, E * P, C, cfg.ffn_mult);
    }
    Vec xddot_e = ffn_block(params, ln("fre.ffn"), xdot_e, E, C, cfg.ffn_mult);

    // cross-level query update
    Vec qp_new = xddot_p, qe_new = xddot_e;
    if (cfg.cross_level_update) {
      for (int i = 0; i < E; ++i)
        for (int j = 0; j < P; ++j)
          for (int k = 0; k < C; ++k)
            qp_new[(static_cast<size_t>(i) * P + j) * C + k] += xddot_e[static_cast<size_t>(i) * C + k];
      Vec w_cp = softmax_vec(at(params, ln("w_cp")));
      for (int i = 0; i < E; ++i)
        for (int j = 0; j < P; ++j)
          for (int k = 0; k < C; ++k)
            qe_new[static_cast<size_t>(i) * C + k] +=
                w_cp[static_cast<size_t>(j)] * xddot_p[(static_cast<size_t>(i) * P + j) * C + k];
    }

    // recompose and run the outer self-attention + FFN over all tokens
    Vec tokens(static_cast<size_t>(E) * (P + 1) * C);
    for (int i = 0; i < E; ++i) {
      for (int j = 0; j < P; ++j)
        for (int k = 0; k < C; ++k)
          tokens[(static_cast<size_t>(i) * (P + 1) + j) * C + k] = qp_new[(static_cast<size_t>(i) * P + j) * C + k];
      for (int k = 0; k < C; ++k)
        tokens[(static_cast<size_t>(i) * (P + 1) + P) * C + k] = qe_new[static_cast<size_t>(i) * C + k];
    }
    tokens = mha_block(params, ln("sa.attn"), tokens, E * (P + 1), C, cfg.self_attn_heads);
    tokens = ffn_block(params, ln("sa.ffn"), tokens, E * (P + 1), C, cfg.ffn_mult);
    hiquery = tokens;

    // heads
    Vec out_qp(static_cast<size_t>(E) * P * C), out_qe(static_cast<size_t>(E) * C);
    for (int i = 0; i < E; ++i) {
      for (int j = 0; j < P; ++j)
        for (int k = 0; k < C; ++k)
          out_qp[(static_cast<size_t>(i) * P + j) * C + k] =
              hiquery[(static_cast<size_t>(i) * (P + 1) + j) * C + k];
      for (int k = 0; k < C; ++k)
        out_qe[static_cast<size_t>(i) * C + k] = hiquery[(static_cast<size_t>(i) * (P + 1) + P) * C + k];
    }

    LayerOut out;
    {
      Vec h = lin(params, ln("head.cls.fc1"), out_qe, E, C, C);
      relu_inplace(h);
      h = lin(params, ln("head.cls.fc2"), h, E, C, C);
      out.class_logits = lin(params, ln("head.cls.out"), h, E, C, NC);
    }
    {
      Vec h1 = lin(params, ln("head.pt.fc1"), out_qp, E * P, C, C);
      Vec h = h1;
      relu_inplace(h);
      h = lin(params, ln("head.pt.fc2"), h, E * P, C, C);
      Vec raw = lin(params, ln("head.pt.out"), h, E * P, C, 2);
      out.points.resize(raw.size());
      for (size_t i = 0; i < raw.size(); ++i) out.points[i] = sigmoid(raw[i]);
    }
    {
      Vec h1 = lin(params, ln("head.mask.fc1"), out_qe, E, C, C);
      Vec h = h1;
      relu_inplace(h);
      h = lin(params, ln("head.mask.fc2"), h, E, C, C);
      out.mask_logits.assign(static_cast<size_t>(E) * HW, 0.0);
      for (int i = 0; i < E; ++i)
        for (int s = 0; s < HW; ++s) {
          double acc = 0;
          for (int k = 0; k < C; ++k) acc += h[static_cast<size_t>(i) * C + k] * bev[static_cast<size_t>(s) * C + k];
          out.mask_logits[static_cast<size_t>(i) * HW + s] = acc;
        }
    }

    // propagate anchors and masks
    if (l + 1 < cfg.layers) {
      anchors = out.points;
      for (int i = 0; i < E; ++i) {
        bool any = false;
        for (int s = 0; s < HW; ++s) {
          bool on = out.mask_logits[static_cast<size_t>(i) * HW + s] > 0.0;
          if (on) any = true;
          mask[static_cast<size_t>(i) * HW + s] = on ? 1.0 : 0.0;
        }
        if (!any)
          for (int s = 0; s < HW; ++s) mask[static_cast<size_t>(i) * HW + s] = 1.0;
      }
    }
    result.push_back(std::move(out));
  }
  return result;
}

}  // namespace refdec
