#pragma once

#include "core/tensor.hpp"

namespace himap {
namespace ops {

// Softmax along one axis; numerically stabilized by max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  int nd = x.ndim();
  if (axis < 0 || axis >= nd) throw Error(ErrorKind::usage, "softmax: bad axis");
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= x.dim(d);
  for (int d = axis + 1; d < nd; ++d) inner *= x.dim(d);
  int ax = x.dim(axis);

  Tensor<T> out = Tensor<T>::zeros(x.shape);
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t i = 0; i < inner; ++i) {
      const T* xp = x.ptr() + o * ax * inner + i;
      T* op = out.ptr() + o * ax * inner + i;
      T mx = xp[0];
      for (int a = 1; a < ax; ++a) mx = std::max(mx, xp[a * inner]);
      T sum = T(0);
      for (int a = 0; a < ax; ++a) {
        T e = std::exp(xp[a * inner] - mx);
        op[a * inner] = e;
        sum += e;
      }
      for (int a = 0; a < ax; ++a) op[a * inner] /= sum;
    }
  }
  if (Graph<T>* g = result_graph(x)) {
    out.graph = g;
    out.node = g->add_node(
        {x.node},
        [xn = x.node, od = out.data, outer, inner, ax](Graph<T>& g, const std::vector<T>& go) {
          // ds_i = s_i * (g_i - sum_j g_j s_j)
          auto& gx = g.grad_buf(xn);
          for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < inner; ++i) {
              int64_t base = o * ax * inner + i;
              T dot = T(0);
              for (int a = 0; a < ax; ++a)
                dot += go[static_cast<size_t>(base + a * inner)] *
                       (*od)[static_cast<size_t>(base + a * inner)];
              for (int a = 0; a < ax; ++a) {
                size_t idx = static_cast<size_t>(base + a * inner);
                gx[idx] += (*od)[idx] * (go[idx] - dot);
              }
            }
        },
        out.size());
  }
  return out;
}

// Unit-normalize along the last axis with an epsilon guard.
template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& x, T eps = T(1e-8)) {
  int nd = x.ndim();
  int c = x.dim(nd - 1);
  int64_t rows = x.size() / c;
  Tensor<T> out = Tensor<T>::zeros(x.shape);
  std::vector<T> norms(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const T* xp = x.ptr() + r * c;
    T s = T(0);
    for (int j = 0; j < c; ++j) s += xp[j] * xp[j];
    T nrm = std::sqrt(s) + eps;
    norms[static_cast<size_t>(r)] = nrm;
    for (int j = 0; j < c; ++j) out.ptr()[r * c + j] = xp[j] / nrm;
  }
  if (Graph<T>* g = result_graph(x)) {
    out.graph = g;
    out.node = g->add_node(
        {x.node},
        [xn = x.node, xd = x.data, norms, rows, c](Graph<T>& g, const std::vector<T>& go) {
          // y = x / (|x| + eps); dy/dx = I/(|x|+eps) - x x^T / (|x| (|x|+eps)^2)
          auto& gx = g.grad_buf(xn);
          for (int64_t r = 0; r < rows; ++r) {
            const T* xp = xd->data() + r * c;
            const T* gp = go.data() + r * c;
            T nrm = norms[static_cast<size_t>(r)];
            T raw = nrm;  // |x| + eps
            T xlen = T(0);
            for (int j = 0; j < c; ++j) xlen += xp[j] * xp[j];
            xlen = std::sqrt(xlen);
            T dot = T(0);
            for (int j = 0; j < c; ++j) dot += gp[j] * xp[j];
            T denom = std::max(xlen, T(1e-30)) * raw * raw;
            for (int j = 0; j < c; ++j)
              gx[static_cast<size_t>(r * c + j)] += gp[j] / raw - xp[j] * dot / denom;
          }
        },
        out.size());
  }
  return out;
}

// Layer normalization over the last axis: y = (x - mu) / sqrt(var + eps) * gamma + beta.
template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    T eps = T(1e-5)) {
  int nd = x.ndim();
  int c = x.dim(nd - 1);
  if (gamma.size() != c || beta.size() != c) {
    throw Error(ErrorKind::usage, "layernorm: param size mismatch");
  }
  int64_t rows = x.size() / c;
  Tensor<T> out = Tensor<T>::zeros(x.shape);
  auto xhat = std::make_shared<std::vector<T>>(x.data->size());
  auto rstd = std::make_shared<std::vector<T>>(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const T* xp = x.ptr() + r * c;
    T mu = T(0);
    for (int j = 0; j < c; ++j) mu += xp[j];
    mu /= static_cast<T>(c);
    T var = T(0);
    for (int j = 0; j < c; ++j) var += (xp[j] - mu) * (xp[j] - mu);
    var /= static_cast<T>(c);
    T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[static_cast<size_t>(r)] = rs;
    for (int j = 0; j < c; ++j) {
      T xh = (xp[j] - mu) * rs;
      (*xhat)[static_cast<size_t>(r * c + j)] = xh;
      out.ptr()[r * c + j] = xh * gamma.ptr()[j] + beta.ptr()[j];
    }
  }
  Graph<T>* g = result_graph(x, gamma);
  if (!g) g = result_graph(beta);
  if (g) {
    out.graph = g;
    out.node = g->add_node(
        {x.node, gamma.node, beta.node},
        [xn = x.node, gn = gamma.node, bn = beta.node, gd = gamma.data, xhat, rstd, rows, c](
            Graph<T>& g, const std::vector<T>& go) {
          for (int64_t r = 0; r < rows; ++r) {
            const T* gp = go.data() + r * c;
            const T* xh = xhat->data() + r * c;
            if (gn >= 0) {
              auto& gg = g.grad_buf(gn);
              for (int j = 0; j < c; ++j) gg[static_cast<size_t>(j)] += gp[j] * xh[j];
            }
            if (bn >= 0) {
              auto& gb = g.grad_buf(bn);
              for (int j = 0; j < c; ++j) gb[static_cast<size_t>(j)] += gp[j];
            }
            if (xn >= 0) {
              auto& gx = g.grad_buf(xn);
              T rs = (*rstd)[static_cast<size_t>(r)];
              T mean_dy = T(0), mean_dyxh = T(0);
              for (int j = 0; j < c; ++j) {
                T dy = gp[j] * (*gd)[static_cast<size_t>(j)];
                mean_dy += dy;
                mean_dyxh += dy * xh[j];
              }
              mean_dy /= static_cast<T>(c);
              mean_dyxh /= static_cast<T>(c);
              for (int j = 0; j < c; ++j) {
                T dy = gp[j] * (*gd)[static_cast<size_t>(j)];
                gx[static_cast<size_t>(r * c + j)] += rs * (dy - mean_dy - xh[j] * mean_dyxh);
              }
            }
          }
        },
        out.size());
  }
  return out;
}

// Bilinear sampling from grid [H,W,C] at locs [N,2] given as (x, y) in cell
// coordinates; valid domain [0, W-1] x [0, H-1]. Corners falling outside the
// grid contribute zero (zero padding). Differentiable in both the grid values
// and the locations.
template <typename T>
Tensor<T> bilinear_gather(const Tensor<T>& grid, const Tensor<T>& locs) {
  if (grid.ndim() != 3 || locs.ndim() != 2 || locs.dim(1) != 2) {
    throw Error(ErrorKind::usage, "bilinear_gather: grid " + grid.shape_str() + ", locs " +
                                      locs.shape_str());
  }
  int h = grid.dim(0), w = grid.dim(1), c = grid.dim(2);
  int n = locs.dim(0);
  Tensor<T> out = Tensor<T>::zeros({n, c});
  auto corner = [&](int yi, int xi) -> const T* {
    if (yi < 0 || yi >= h || xi < 0 || xi >= w) return nullptr;
    return grid.ptr() + (static_cast<int64_t>(yi) * w + xi) * c;
  };
  for (int i = 0; i < n; ++i) {
    T x = locs.ptr()[i * 2 + 0];
    T y = locs.ptr()[i * 2 + 1];
    int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    T fx = x - static_cast<T>(x0), fy = y - static_cast<T>(y0);
    const T* c00 = corner(y0, x0);
    const T* c01 = corner(y0, x0 + 1);
    const T* c10 = corner(y0 + 1, x0);
    const T* c11 = corner(y0 + 1, x0 + 1);
    T* op = out.ptr() + static_cast<int64_t>(i) * c;
    T w00 = (T(1) - fy) * (T(1) - fx), w01 = (T(1) - fy) * fx;
    T w10 = fy * (T(1) - fx), w11 = fy * fx;
    for (int k = 0; k < c; ++k) {
      T v = T(0);
      if (c00) v += w00 * c00[k];
      if (c01) v += w01 * c01[k];
      if (c10) v += w10 * c10[k];
      if (c11) v += w11 * c11[k];
      op[k] = v;
    }
  }
  if (Graph<T>* gph = result_graph(grid, locs)) {
    out.graph = gph;
    out.node = gph->add_node(
        {grid.node, locs.node},
        [gn = grid.node, ln = locs.node, gd = grid.data, ld = locs.data, h, w, c, n](
            Graph<T>& g, const std::vector<T>& go) {
          auto cell = [&](int yi, int xi) -> int64_t {
            if (yi < 0 || yi >= h || xi < 0 || xi >= w) return -1;
            return (static_cast<int64_t>(yi) * w + xi) * c;
          };
          for (int i = 0; i < n; ++i) {
            T x = (*ld)[static_cast<size_t>(i) * 2 + 0];
            T y = (*ld)[static_cast<size_t>(i) * 2 + 1];
            int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
            T fx = x - static_cast<T>(x0), fy = y - static_cast<T>(y0);
            int64_t i00 = cell(y0, x0), i01 = cell(y0, x0 + 1);
            int64_t i10 = cell(y0 + 1, x0), i11 = cell(y0 + 1, x0 + 1);
            const T* gop = go.data() + static_cast<int64_t>(i) * c;
            if (gn >= 0) {
              auto& gg = g.grad_buf(gn);
              T w00 = (T(1) - fy) * (T(1) - fx), w01 = (T(1) - fy) * fx;
              T w10 = fy * (T(1) - fx), w11 = fy * fx;
              for (int k = 0; k < c; ++k) {
                if (i00 >= 0) gg[static_cast<size_t>(i00 + k)] += w00 * gop[k];
                if (i01 >= 0) gg[static_cast<size_t>(i01 + k)] += w01 * gop[k];
                if (i10 >= 0) gg[static_cast<size_t>(i10 + k)] += w10 * gop[k];
                if (i11 >= 0) gg[static_cast<size_t>(i11 + k)] += w11 * gop[k];
              }
            }
            if (ln >= 0) {
              auto& gl = g.grad_buf(ln);
              T dx = T(0), dy = T(0);
              for (int k = 0; k < c; ++k) {
                T v00 = i00 >= 0 ? (*gd)[static_cast<size_t>(i00 + k)] : T(0);
                T v01 = i01 >= 0 ? (*gd)[static_cast<size_t>(i01 + k)] : T(0);
                T v10 = i10 >= 0 ? (*gd)[static_cast<size_t>(i10 + k)] : T(0);
                T v11 = i11 >= 0 ? (*gd)[static_cast<size_t>(i11 + k)] : T(0);
                // d/dfx and d/dfy of the bilinear blend
                dx += gop[k] * ((T(1) - fy) * (v01 - v00) + fy * (v11 - v10));
                dy += gop[k] * ((T(1) - fx) * (v10 - v00) + fx * (v11 - v01));
              }
              gl[static_cast<size_t>(i) * 2 + 0] += dx;
              gl[static_cast<size_t>(i) * 2 + 1] += dy;
            }
          }
        },
        out.size());
  }
  return out;
}

// Elementwise binary cross entropy on logits against constant targets,
// computed in the numerically stable max(z,0) - z*y + log(1+exp(-|z|)) form.
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& z, const Tensor<T>& target) {
  check_same_shape("bce_with_logits", z, target);
  if (target.tracked()) throw Error(ErrorKind::usage, "bce_with_logits: target must be constant");
  Tensor<T> out = Tensor<T>::zeros(z.shape);
  int64_t n = z.size();
  for (int64_t i = 0; i < n; ++i) {
    T zi = z.ptr()[i], yi = target.ptr()[i];
    T az = zi < T(0) ? -zi : zi;
    out.ptr()[i] = std::max(zi, T(0)) - zi * yi + std::log1p(std::exp(-az));
  }
  if (Graph<T>* g = result_graph(z)) {
    out.graph = g;
    out.node = g->add_node(
        {z.node},
        [zn = z.node, zd = z.data, td = target.data, n](Graph<T>& g, const std::vector<T>& go) {
          auto& gz = g.grad_buf(zn);
          for (int64_t i = 0; i < n; ++i) {
            T zi = (*zd)[static_cast<size_t>(i)];
            T p = zi >= T(0) ? T(1) / (T(1) + std::exp(-zi))
                             : std::exp(zi) / (T(1) + std::exp(zi));
            gz[static_cast<size_t>(i)] +=
                go[static_cast<size_t>(i)] * (p - (*td)[static_cast<size_t>(i)]);
          }
        },
        n);
  }
  return out;
}

// Elementwise sigmoid focal loss on logits against constant 0/1 targets:
// FL = -alpha_t * (1 - p_t)^gamma * log(p_t).
template <typename T>
Tensor<T> focal_bce_with_logits(const Tensor<T>& z, const Tensor<T>& target, T gamma, T alpha) {
  check_same_shape("focal_bce_with_logits", z, target);
  if (target.tracked()) throw Error(ErrorKind::usage, "focal loss: target must be constant");
  int64_t n = z.size();
  Tensor<T> out = Tensor<T>::zeros(z.shape);
  auto stable_sigmoid = [](T v) {
    return v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
  };
  // log(p_t) in stable form: y=1 -> -softplus(-z); y=0 -> -softplus(z)
  auto softplus = [](T v) { return v > T(30) ? v : std::log1p(std::exp(v)); };
  for (int64_t i = 0; i < n; ++i) {
    T zi = z.ptr()[i], yi = target.ptr()[i];
    T p = stable_sigmoid(zi);
    T pt = yi * p + (T(1) - yi) * (T(1) - p);
    T at = yi * alpha + (T(1) - yi) * (T(1) - alpha);
    T logpt = yi > T(0.5) ? -softplus(-zi) : -softplus(zi);
    out.ptr()[i] = -at * std::pow(T(1) - pt, gamma) * logpt;
  }
  if (Graph<T>* g = result_graph(z)) {
    out.graph = g;
    out.node = g->add_node(
        {z.node},
        [zn = z.node, zd = z.data, td = target.data, gamma, alpha, n, stable_sigmoid, softplus](
            Graph<T>& g, const std::vector<T>& go) {
          auto& gz = g.grad_buf(zn);
          for (int64_t i = 0; i < n; ++i) {
            T zi = (*zd)[static_cast<size_t>(i)];
            T yi = (*td)[static_cast<size_t>(i)];
            T p = stable_sigmoid(zi);
            T pt = yi * p + (T(1) - yi) * (T(1) - p);
            T at = yi * alpha + (T(1) - yi) * (T(1) - alpha);
            T logpt = yi > T(0.5) ? -softplus(-zi) : -softplus(zi);
            T one_m = T(1) - pt;
            // dL/dpt = at * (gamma * (1-pt)^(gamma-1) * log(pt) - (1-pt)^gamma / pt)
            T dldpt = at * (gamma * (gamma == T(0) ? T(0) : std::pow(one_m, gamma - T(1))) * logpt -
                            std::pow(one_m, gamma) / std::max(pt, T(1e-30)));
            // dpt/dz = (2y - 1) * p * (1 - p)
            T dptdz = (T(2) * yi - T(1)) * p * (T(1) - p);
            gz[static_cast<size_t>(i)] += go[static_cast<size_t>(i)] * dldpt * dptdz;
          }
        },
        n);
  }
  return out;
}

// Swap the first two axes of a 3D tensor: [A,B,C] -> [B,A,C].
template <typename T>
Tensor<T> swap01(const Tensor<T>& x) {
  if (x.ndim() != 3) throw Error(ErrorKind::usage, "swap01: need 3D, got " + x.shape_str());
  int a = x.dim(0), b = x.dim(1), c = x.dim(2);
  Tensor<T> out = Tensor<T>::zeros({b, a, c});
  for (int i = 0; i < a; ++i)
    for (int j = 0; j < b; ++j)
      std::copy(x.ptr() + (static_cast<int64_t>(i) * b + j) * c,
                x.ptr() + (static_cast<int64_t>(i) * b + j + 1) * c,
                out.ptr() + (static_cast<int64_t>(j) * a + i) * c);
  if (Graph<T>* g = result_graph(x)) {
    out.graph = g;
    out.node = g->add_node(
        {x.node},
        [xn = x.node, a, b, c](Graph<T>& g, const std::vector<T>& go) {
          auto& gx = g.grad_buf(xn);
          for (int i = 0; i < a; ++i)
            for (int j = 0; j < b; ++j)
              for (int k = 0; k < c; ++k)
                gx[(static_cast<size_t>(i) * b + j) * c + static_cast<size_t>(k)] +=
                    go[(static_cast<size_t>(j) * a + i) * c + static_cast<size_t>(k)];
        },
        out.size());
  }
  return out;
}

// Fixed 2D sinusoidal position embedding for an H x W grid, C channels.
// First half of the channels encodes the row coordinate, second half the
// column coordinate, with the usual interleaved sin/cos at temperature 10000.
template <typename T>
Tensor<T> sinusoidal_embedding_2d(int h, int w, int c) {
  if (c % 4 != 0) throw Error(ErrorKind::usage, "sinusoidal embedding needs channels % 4 == 0");
  Tensor<T> out = Tensor<T>::zeros({h, w, c});
  int half = c / 2;
  int pairs = half / 2;
  const double temperature = 10000.0;
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      T* p = out.ptr() + (static_cast<int64_t>(r) * w + col) * c;
      for (int k = 0; k < pairs; ++k) {
        double freq = std::pow(temperature, 2.0 * k / half);
        p[2 * k + 0] = static_cast<T>(std::sin(r / freq));
        p[2 * k + 1] = static_cast<T>(std::cos(r / freq));
        p[half + 2 * k + 0] = static_cast<T>(std::sin(col / freq));
        p[half + 2 * k + 1] = static_cast<T>(std::cos(col / freq));
      }
    }
  }
  return out;
}

}  // namespace ops
}  // namespace himap
