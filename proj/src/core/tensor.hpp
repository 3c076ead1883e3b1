#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace himap {

template <typename T>
class Graph;

// Dense multi-dimensional array. Data is shared (copy-on-construct only);
// tensors are immutable once built. A tensor created through a Graph op
// carries the node id used by reverse-mode differentiation.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::shared_ptr<std::vector<T>> data;
  Graph<T>* graph = nullptr;
  int node = -1;

  Tensor() : data(std::make_shared<std::vector<T>>()) {}

  static int64_t numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<T>>(numel(t.shape), T(0));
    return t;
  }

  static Tensor full(std::vector<int> shape, T value) {
    Tensor t = zeros(std::move(shape));
    for (T& v : *t.data) v = value;
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<T> values) {
    if (numel(shape) != static_cast<int64_t>(values.size())) {
      throw Error(ErrorKind::internal, "tensor init size mismatch");
    }
    Tensor t;
    t.shape = std::move(shape);
    t.data = std::make_shared<std::vector<T>>(std::move(values));
    return t;
  }

  static Tensor scalar(T value) { return from({1}, {value}); }

  int64_t size() const { return static_cast<int64_t>(data->size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape.size()); }
  T* ptr() { return data->data(); }
  const T* ptr() const { return data->data(); }
  T item() const {
    if (size() != 1) throw Error(ErrorKind::usage, "item() on non-scalar tensor");
    return (*data)[0];
  }
  bool tracked() const { return node >= 0; }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
  }
};

// Reverse-mode tape. Nodes are appended in forward order; backward walks the
// tape in reverse, so parents always precede children. Gradients accumulate
// (sum) across multiple uses of a tensor.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const std::vector<T>&)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Registers value as a differentiable leaf; shares its storage.
  Tensor<T> leaf(const Tensor<T>& value) {
    Tensor<T> t = value;
    t.graph = this;
    t.node = add_node({}, nullptr, t.size());
    return t;
  }

  int add_node(std::vector<int> parents, BackwardFn backward, int64_t out_size) {
    nodes_.push_back(Node{std::move(parents), std::move(backward), out_size});
    grads_.emplace_back();
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::vector<T>& grad_buf(int node) {
    auto& g = grads_[static_cast<size_t>(node)];
    if (g.empty()) g.assign(static_cast<size_t>(nodes_[static_cast<size_t>(node)].out_size), T(0));
    return g;
  }

  void backward(const Tensor<T>& loss) {
    if (loss.size() != 1) throw Error(ErrorKind::usage, "backward requires a scalar loss");
    if (loss.graph != this || loss.node < 0) {
      throw Error(ErrorKind::usage, "loss is not connected to this graph");
    }
    grad_buf(loss.node)[0] = T(1);
    for (int id = loss.node; id >= 0; --id) {
      Node& n = nodes_[static_cast<size_t>(id)];
      auto& g = grads_[static_cast<size_t>(id)];
      if (g.empty() || !n.backward) continue;
      n.backward(*this, g);
    }
  }

  // Gradient of a leaf/op output after backward(); null if untouched.
  const std::vector<T>* grad(const Tensor<T>& t) const {
    if (t.graph != this || t.node < 0) return nullptr;
    const auto& g = grads_[static_cast<size_t>(t.node)];
    return g.empty() ? nullptr : &g;
  }

  Tensor<T> grad_tensor(const Tensor<T>& t) const {
    const std::vector<T>* g = grad(t);
    if (!g) return Tensor<T>::zeros(t.shape);
    return Tensor<T>::from(t.shape, *g);
  }

  size_t num_nodes() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    grads_.clear();
  }

 private:
  struct Node {
    std::vector<int> parents;
    BackwardFn backward;
    int64_t out_size;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<T>> grads_;
};

namespace ops {

template <typename T>
Graph<T>* result_graph(const Tensor<T>& a) {
  return a.tracked() ? a.graph : nullptr;
}

template <typename T>
Graph<T>* result_graph(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.tracked() && b.tracked() && a.graph != b.graph) {
    throw Error(ErrorKind::usage, "operands belong to different graphs");
  }
  return a.tracked() ? a.graph : (b.tracked() ? b.graph : nullptr);
}

template <typename T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape != b.shape) {
    throw Error(ErrorKind::usage, std::string(op) + ": shape mismatch " + a.shape_str() +
                                      " vs " + b.shape_str());
  }
}

template <typename T>
void accumulate(Graph<T>& g, int node, const T* src, int64_t n) {
  if (node < 0) return;
  auto& buf = g.grad_buf(node);
  for (int64_t i = 0; i < n; ++i) buf[static_cast<size_t>(i)] += src[i];
}

// Metadata-only view with a new shape; shares data and graph node.
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, std::vector<int> shape) {
  if (Tensor<T>::numel(shape) != x.size()) {
    throw Error(ErrorKind::usage, "reshape: size mismatch " + x.shape_str());
  }
  Tensor<T> out = x;
  out.shape = std::move(shape);
  return out;
}

template <typename T, typename Fwd, typename Bwd>
Tensor<T> unary_elementwise(const Tensor<T>& x, Fwd fwd, Bwd dfdx) {
  Tensor<T> out = Tensor<T>::zeros(x.shape);
  const T* xd = x.ptr();
  T* od = out.ptr();
  int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) od[i] = fwd(xd[i]);
  if (Graph<T>* g = result_graph(x)) {
    out.graph = g;
    out.node = g->add_node(
        {x.node},
        [xn = x.node, xdat = x.data, odat = out.data, dfdx, n](Graph<T>& g,
                                                               const std::vector<T>& go) {
          auto& gx = g.grad_buf(xn);
          for (int64_t i = 0; i < n; ++i) {
            gx[static_cast<size_t>(i)] +=
                go[static_cast<size_t>(i)] * dfdx((*xdat)[static_cast<size_t>(i)],
                                                  (*odat)[static_cast<size_t>(i)]);
          }
        },
        n);
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("add", a, b);
  Tensor<T> out = Tensor<T>::zeros(a.shape);
  int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.ptr()[i] = a.ptr()[i] + b.ptr()[i];
  if (Graph<T>* g = result_graph(a, b)) {
    out.graph = g;
    out.node = g->add_node(
        {a.node, b.node},
        [an = a.node, bn = b.node, n](Graph<T>& g, const std::vector<T>& go) {
          accumulate(g, an, go.data(), n);
          accumulate(g, bn, go.data(), n);
        },
        n);
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("sub", a, b);
  Tensor<T> out = Tensor<T>::zeros(a.shape);
  int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.ptr()[i] = a.ptr()[i] - b.ptr()[i];
  if (Graph<T>* g = result_graph(a, b)) {
    out.graph = g;
    out.node = g->add_node(
        {a.node, b.node},
        [an = a.node, bn = b.node, n](Graph<T>& g, const std::vector<T>& go) {
          accumulate(g, an, go.data(), n);
          if (bn >= 0) {
            auto& gb = g.grad_buf(bn);
            for (int64_t i = 0; i < n; ++i) gb[static_cast<size_t>(i)] -= go[static_cast<size_t>(i)];
          }
        },
        n);
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("mul", a, b);
  Tensor<T> out = Tensor<T>::zeros(a.shape);
  int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.ptr()[i] = a.ptr()[i] * b.ptr()[i];
  if (Graph<T>* g = result_graph(a, b)) {
    out.graph = g;
    out.node = g->add_node(
        {a.node, b.node},
        [an = a.node, bn = b.node, ad = a.data, bd = b.data, n](Graph<T>& g,
                                                                const std::vector<T>& go) {
          if (an >= 0) {
            auto& ga = g.grad_buf(an);
            for (int64_t i = 0; i < n; ++i)
              ga[static_cast<size_t>(i)] += go[static_cast<size_t>(i)] * (*bd)[static_cast<size_t>(i)];
          }
          if (bn >= 0) {
            auto& gb = g.grad_buf(bn);
            for (int64_t i = 0; i < n; ++i)
              gb[static_cast<size_t>(i)] += go[static_cast<size_t>(i)] * (*ad)[static_cast<size_t>(i)];
          }
        },
        n);
  }
  return out;
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape("div", a, b);
  Tensor<T> out = Tensor<T>::zeros(a.shape);
  int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.ptr()[i] = a.ptr()[i] / b.ptr()[i];
  if (Graph<T>* g = result_graph(a, b)) {
    out.graph = g;
    out.node = g->add_node(
        {a.node, b.node},
        [an = a.node, bn = b.node, ad = a.data, bd = b.data, n](Graph<T>& g,
                                                                const std::vector<T>& go) {
          if (an >= 0) {
            auto& ga = g.grad_buf(an);
            for (int64_t i = 0; i < n; ++i)
              ga[static_cast<size_t>(i)] += go[static_cast<size_t>(i)] / (*bd)[static_cast<size_t>(i)];
          }
          if (bn >= 0) {
            auto& gb = g.grad_buf(bn);
            for (int64_t i = 0; i < n; ++i) {
              T bi = (*bd)[static_cast<size_t>(i)];
              gb[static_cast<size_t>(i)] -=
                  go[static_cast<size_t>(i)] * (*ad)[static_cast<size_t>(i)] / (bi * bi);
            }
          }
        },
        n);
  }
  return out;
}

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
  return unary_elementwise(x, [](T v) { return -v; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
  return unary_elementwise(x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, T c) {
  return unary_elementwise(x, [c](T v) { return v * c; }, [c](T, T) { return c; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  auto fwd = [](T v) {
    if (v >= T(0)) {
      T e = std::exp(-v);
      return T(1) / (T(1) + e);
    }
    T e = std::exp(v);
    return e / (T(1) + e);
  };
  return unary_elementwise(x, fwd, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary_elementwise(
      x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary_elementwise(x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return unary_elementwise(x, [](T v) { return std::log(v); },
                           [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
  return unary_elementwise(
      x, [](T v) { return v < T(0) ? -v : v; },
      [](T v, T) { return v < T(0) ? T(-1) : (v > T(0) ? T(1) : T(0)); });
}

// a: [M,K], b: [K,N] -> [M,N]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw Error(ErrorKind::usage,
                "matmul: incompatible shapes " + a.shape_str() + " x " + b.shape_str());
  }
  int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out = Tensor<T>::zeros({m, n});
  const T* ad = a.ptr();
  const T* bd = b.ptr();
  T* od = out.ptr();
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      T av = ad[i * k + p];
      if (av == T(0)) continue;
      const T* brow = bd + p * n;
      T* orow = od + i * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  if (Graph<T>* g = result_graph(a, b)) {
    out.graph = g;
    out.node = g->add_node(
        {a.node, b.node},
        [an = a.node, bn = b.node, ad2 = a.data, bd2 = b.data, m, k, n](
            Graph<T>& g, const std::vector<T>& go) {
          if (an >= 0) {  // dA = dOut * B^T
            auto& ga = g.grad_buf(an);
            for (int i = 0; i < m; ++i)
              for (int j = 0; j < n; ++j) {
                T gv = go[static_cast<size_t>(i) * n + j];
                if (gv == T(0)) continue;
                for (int p = 0; p < k; ++p)
                  ga[static_cast<size_t>(i) * k + p] += gv * (*bd2)[static_cast<size_t>(p) * n + j];
              }
          }
          if (bn >= 0) {  // dB = A^T * dOut
            auto& gb = g.grad_buf(bn);
            for (int i = 0; i < m; ++i)
              for (int p = 0; p < k; ++p) {
                T av = (*ad2)[static_cast<size_t>(i) * k + p];
                if (av == T(0)) continue;
                for (int j = 0; j < n; ++j)
                  gb[static_cast<size_t>(p) * n + j] += av * go[static_cast<size_t>(i) * n + j];
              }
          }
        },
        static_cast<int64_t>(m) * n);
  }
  return out;
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& x) {
  if (x.ndim() != 2) throw Error(ErrorKind::usage, "transpose2d: need 2D, got " + x.shape_str());
  int m = x.dim(0), n = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.ptr()[j * m + i] = x.ptr()[i * n + j];
  if (Graph<T>* g = result_graph(x)) {
    out.graph = g;
    out.node = g->add_node(
        {x.node},
        [xn = x.node, m, n](Graph<T>& g, const std::vector<T>& go) {
          auto& gx = g.grad_buf(xn);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
              gx[static_cast<size_t>(i) * n + j] += go[static_cast<size_t>(j) * m + i];
        },
        static_cast<int64_t>(m) * n);
  }
  return out;
}

// a: [B,M,K], b: [B,K,N] -> [B,M,N]
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    throw Error(ErrorKind::usage,
                "bmm: incompatible shapes " + a.shape_str() + " x " + b.shape_str());
  }
  int bsz = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  Tensor<T> out = Tensor<T>::zeros({bsz, m, n});
  for (int bi = 0; bi < bsz; ++bi) {
    const T* ad = a.ptr() + static_cast<int64_t>(bi) * m * k;
    const T* bd = b.ptr() + static_cast<int64_t>(bi) * k * n;
    T* od = out.ptr() + static_cast<int64_t>(bi) * m * n;
    for (int i = 0; i < m; ++i)
      for (int p = 0; p < k; ++p) {
        T av = ad[i * k + p];
        if (av == T(0)) continue;
        for (int j = 0; j < n; ++j) od[i * n + j] += av * bd[p * n + j];
      }
  }
  if (Graph<T>* g = result_graph(a, b)) {
    out.graph = g;
    out.node = g->add_node(
        {a.node, b.node},
        [an = a.node, bn = b.node, ad2 = a.data, bd2 = b.data, bsz, m, k, n](
            Graph<T>& g, const std::vector<T>& go) {
          for (int bi = 0; bi < bsz; ++bi) {
            const T* ad = ad2->data() + static_cast<int64_t>(bi) * m * k;
            const T* bd = bd2->data() + static_cast<int64_t>(bi) * k * n;
            const T* god = go.data() + static_cast<int64_t>(bi) * m * n;
            if (an >= 0) {
              T* ga = g.grad_buf(an).data() + static_cast<int64_t>(bi) * m * k;
              for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                  T gv = god[i * n + j];
                  if (gv == T(0)) continue;
                  for (int p = 0; p < k; ++p) ga[i * k + p] += gv * bd[p * n + j];
                }
            }
            if (bn >= 0) {
              T* gb = g.grad_buf(bn).data() + static_cast<int64_t>(bi) * k * n;
              for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p) {
                  T av = ad[i * k + p];
                  if (av == T(0)) continue;
                  for (int j = 0; j < n; ++j) gb[p * n + j] += av * god[i * n + j];
                }
            }
          }
        },
        static_cast<int64_t>(bsz) * m * n);
  }
  return out;
}

// a: [B,M,K], b: [B,N,K] -> [B,M,N], i.e. bmm with b transposed in-place.
template <typename T>
Tensor<T> bmm_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2)) {
    throw Error(ErrorKind::usage,
                "bmm_nt: incompatible shapes " + a.shape_str() + " x " + b.shape_str());
  }
  int bsz = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(1);
  Tensor<T> out = Tensor<T>::zeros({bsz, m, n});
  for (int bi = 0; bi < bsz; ++bi) {
    const T* ad = a.ptr() + static_cast<int64_t>(bi) * m * k;
    const T* bd = b.ptr() + static_cast<int64_t>(bi) * n * k;
    T* od = out.ptr() + static_cast<int64_t>(bi) * m * n;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        T s = T(0);
        for (int p = 0; p < k; ++p) s += ad[i * k + p] * bd[j * k + p];
        od[i * n + j] = s;
      }
  }
  if (Graph<T>* g = result_graph(a, b)) {
    out.graph = g;
    out.node = g->add_node(
        {a.node, b.node},
        [an = a.node, bn = b.node, ad2 = a.data, bd2 = b.data, bsz, m, k, n](
            Graph<T>& g, const std::vector<T>& go) {
          for (int bi = 0; bi < bsz; ++bi) {
            const T* ad = ad2->data() + static_cast<int64_t>(bi) * m * k;
            const T* bd = bd2->data() + static_cast<int64_t>(bi) * n * k;
            const T* god = go.data() + static_cast<int64_t>(bi) * m * n;
            if (an >= 0) {
              T* ga = g.grad_buf(an).data() + static_cast<int64_t>(bi) * m * k;
              for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                  T gv = god[i * n + j];
                  if (gv == T(0)) continue;
                  for (int p = 0; p < k; ++p) ga[i * k + p] += gv * bd[j * k + p];
                }
            }
            if (bn >= 0) {
              T* gb = g.grad_buf(bn).data() + static_cast<int64_t>(bi) * n * k;
              for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                  T gv = god[i * n + j];
                  if (gv == T(0)) continue;
                  for (int p = 0; p < k; ++p) gb[j * k + p] += gv * ad[i * k + p];
                }
            }
          }
        },
        static_cast<int64_t>(bsz) * m * n);
  }
  return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw Error(ErrorKind::usage, "concat: no inputs");
  int nd = parts[0].ndim();
  if (axis < 0 || axis >= nd) throw Error(ErrorKind::usage, "concat: bad axis");
  std::vector<int> shape = parts[0].shape;
  int total_axis = 0;
  for (const auto& p : parts) {
    if (p.ndim() != nd) throw Error(ErrorKind::usage, "concat: rank mismatch");
    for (int d = 0; d < nd; ++d) {
      if (d != axis && p.dim(d) != shape[static_cast<size_t>(d)]) {
        throw Error(ErrorKind::usage, "concat: shape mismatch " + p.shape_str());
      }
    }
    total_axis += p.dim(axis);
  }
  shape[static_cast<size_t>(axis)] = total_axis;

  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= shape[static_cast<size_t>(d)];
  for (int d = axis + 1; d < nd; ++d) inner *= shape[static_cast<size_t>(d)];

  Tensor<T> out = Tensor<T>::zeros(shape);
  Graph<T>* g = nullptr;
  std::vector<int> parent_nodes;
  for (const auto& p : parts) {
    if (p.tracked()) {
      if (g && p.graph != g) throw Error(ErrorKind::usage, "concat: mixed graphs");
      g = p.graph;
    }
    parent_nodes.push_back(p.node);
  }
  std::vector<int> axis_sizes;
  for (const auto& p : parts) axis_sizes.push_back(p.dim(axis));

  int64_t axis_offset = 0;
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    const Tensor<T>& p = parts[pi];
    int pa = axis_sizes[pi];
    for (int64_t o = 0; o < outer; ++o) {
      const T* src = p.ptr() + o * pa * inner;
      T* dst = out.ptr() + (o * total_axis + axis_offset) * inner;
      std::copy(src, src + static_cast<int64_t>(pa) * inner, dst);
    }
    axis_offset += pa;
  }
  if (g) {
    out.graph = g;
    out.node = g->add_node(
        parent_nodes,
        [parent_nodes, axis_sizes, outer, inner, total_axis](Graph<T>& g,
                                                             const std::vector<T>& go) {
          int64_t axis_offset = 0;
          for (size_t pi = 0; pi < parent_nodes.size(); ++pi) {
            int pa = axis_sizes[pi];
            if (parent_nodes[pi] >= 0) {
              auto& gp = g.grad_buf(parent_nodes[pi]);
              for (int64_t o = 0; o < outer; ++o) {
                const T* src = go.data() + (o * total_axis + axis_offset) * inner;
                T* dst = gp.data() + o * pa * inner;
                for (int64_t i = 0; i < static_cast<int64_t>(pa) * inner; ++i) dst[i] += src[i];
              }
            }
            axis_offset += pa;
          }
        },
        out.size());
  }
  return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, int start, int len) {
  int nd = x.ndim();
  if (axis < 0 || axis >= nd) throw Error(ErrorKind::usage, "slice: bad axis");
  if (start < 0 || len <= 0 || start + len > x.dim(axis)) {
    throw Error(ErrorKind::usage, "slice: out of range on " + x.shape_str());
  }
  std::vector<int> shape = x.shape;
  shape[static_cast<size_t>(axis)] = len;
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= x.dim(d);
  for (int d = axis + 1; d < nd; ++d) inner *= x.dim(d);
  int ax = x.dim(axis);

  Tensor<T> out = Tensor<T>::zeros(shape);
  for (int64_t o = 0; o < outer; ++o) {
    const T* src = x.ptr() + (o * ax + start) * inner;
    std::copy(src, src + static_cast<int64_t>(len) * inner, out.ptr() + o * len * inner);
  }
  if (Graph<T>* g = result_graph(x)) {
    out.graph = g;
    out.node = g->add_node(
        {x.node},
        [xn = x.node, outer, inner, ax, start, len](Graph<T>& g, const std::vector<T>& go) {
          auto& gx = g.grad_buf(xn);
          for (int64_t o = 0; o < outer; ++o) {
            const T* src = go.data() + o * len * inner;
            T* dst = gx.data() + (o * ax + start) * inner;
            for (int64_t i = 0; i < static_cast<int64_t>(len) * inner; ++i) dst[i] += src[i];
          }
        },
        out.size());
  }
  return out;
}

// Repeat x along a new leading dimension: [s...] -> [n, s...].
template <typename T>
Tensor<T> broadcast_leading(const Tensor<T>& x, int n) {
  if (n <= 0) throw Error(ErrorKind::usage, "broadcast_leading: n must be positive");
  std::vector<int> shape;
  shape.push_back(n);
  for (int d : x.shape) shape.push_back(d);
  Tensor<T> out = Tensor<T>::zeros(shape);
  int64_t sz = x.size();
  for (int i = 0; i < n; ++i) std::copy(x.ptr(), x.ptr() + sz, out.ptr() + i * sz);
  if (Graph<T>* g = result_graph(x)) {
    out.graph = g;
    out.node = g->add_node(
        {x.node},
        [xn = x.node, n, sz](Graph<T>& g, const std::vector<T>& go) {
          auto& gx = g.grad_buf(xn);
          for (int i = 0; i < n; ++i)
            for (int64_t j = 0; j < sz; ++j)
              gx[static_cast<size_t>(j)] += go[static_cast<size_t>(i * sz + j)];
        },
        out.size());
  }
  return out;
}

// Copy [E,C] across a new middle axis: -> [E,P,C].
template <typename T>
Tensor<T> expand_middle(const Tensor<T>& x, int p) {
  if (x.ndim() != 2) throw Error(ErrorKind::usage, "expand_middle: need 2D");
  int e = x.dim(0), c = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros({e, p, c});
  for (int i = 0; i < e; ++i)
    for (int j = 0; j < p; ++j)
      std::copy(x.ptr() + static_cast<int64_t>(i) * c, x.ptr() + static_cast<int64_t>(i + 1) * c,
                out.ptr() + (static_cast<int64_t>(i) * p + j) * c);
  if (Graph<T>* g = result_graph(x)) {
    out.graph = g;
    out.node = g->add_node(
        {x.node},
        [xn = x.node, e, p, c](Graph<T>& g, const std::vector<T>& go) {
          auto& gx = g.grad_buf(xn);
          for (int i = 0; i < e; ++i)
            for (int j = 0; j < p; ++j)
              for (int k = 0; k < c; ++k)
                gx[static_cast<size_t>(i) * c + k] +=
                    go[(static_cast<size_t>(i) * p + j) * c + k];
        },
        out.size());
  }
  return out;
}

template <typename T>
Tensor<T> reduce_sum_all(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros({1});
  T s = T(0);
  for (int64_t i = 0; i < x.size(); ++i) s += x.ptr()[i];
  out.ptr()[0] = s;
  if (Graph<T>* g = result_graph(x)) {
    out.graph = g;
    out.node = g->add_node(
        {x.node},
        [xn = x.node, n = x.size()](Graph<T>& g, const std::vector<T>& go) {
          auto& gx = g.grad_buf(xn);
          for (int64_t i = 0; i < n; ++i) gx[static_cast<size_t>(i)] += go[0];
        },
        1);
  }
  return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
  return mul_scalar(reduce_sum_all(x), T(1) / static_cast<T>(x.size()));
}

// Sum over one axis of an arbitrary-rank tensor.
template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x, int axis) {
  int nd = x.ndim();
  if (axis < 0 || axis >= nd) throw Error(ErrorKind::usage, "reduce_sum: bad axis");
  std::vector<int> shape;
  for (int d = 0; d < nd; ++d)
    if (d != axis) shape.push_back(x.dim(d));
  if (shape.empty()) shape.push_back(1);
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= x.dim(d);
  for (int d = axis + 1; d < nd; ++d) inner *= x.dim(d);
  int ax = x.dim(axis);

  Tensor<T> out = Tensor<T>::zeros(shape);
  for (int64_t o = 0; o < outer; ++o)
    for (int a = 0; a < ax; ++a)
      for (int64_t i = 0; i < inner; ++i)
        out.ptr()[o * inner + i] += x.ptr()[(o * ax + a) * inner + i];
  if (Graph<T>* g = result_graph(x)) {
    out.graph = g;
    out.node = g->add_node(
        {x.node},
        [xn = x.node, outer, inner, ax](Graph<T>& g, const std::vector<T>& go) {
          auto& gx = g.grad_buf(xn);
          for (int64_t o = 0; o < outer; ++o)
            for (int a = 0; a < ax; ++a)
              for (int64_t i = 0; i < inner; ++i)
                gx[static_cast<size_t>((o * ax + a) * inner + i)] +=
                    go[static_cast<size_t>(o * inner + i)];
        },
        out.size());
  }
  return out;
}

// Scale row i of [M,N] by s[i].
template <typename T>
Tensor<T> scale_rows(const Tensor<T>& x, const Tensor<T>& s) {
  if (x.ndim() != 2 || s.ndim() != 1 || s.dim(0) != x.dim(0)) {
    throw Error(ErrorKind::usage,
                "scale_rows: shapes " + x.shape_str() + " vs " + s.shape_str());
  }
  int m = x.dim(0), n = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.ptr()[i * n + j] = x.ptr()[i * n + j] * s.ptr()[i];
  if (Graph<T>* g = result_graph(x, s)) {
    out.graph = g;
    out.node = g->add_node(
        {x.node, s.node},
        [xn = x.node, sn = s.node, xd = x.data, sd = s.data, m, n](Graph<T>& g,
                                                                   const std::vector<T>& go) {
          if (xn >= 0) {
            auto& gx = g.grad_buf(xn);
            for (int i = 0; i < m; ++i)
              for (int j = 0; j < n; ++j)
                gx[static_cast<size_t>(i) * n + j] +=
                    go[static_cast<size_t>(i) * n + j] * (*sd)[static_cast<size_t>(i)];
          }
          if (sn >= 0) {
            auto& gs = g.grad_buf(sn);
            for (int i = 0; i < m; ++i) {
              T acc = T(0);
              for (int j = 0; j < n; ++j)
                acc += go[static_cast<size_t>(i) * n + j] * (*xd)[static_cast<size_t>(i) * n + j];
              gs[static_cast<size_t>(i)] += acc;
            }
          }
        },
        static_cast<int64_t>(m) * n);
  }
  return out;
}

// y[e,:] = sum_p w[p] * x[e,p,:] for x: [E,P,C], w: [P].
template <typename T>
Tensor<T> axis1_weighted_sum(const Tensor<T>& x, const Tensor<T>& w) {
  if (x.ndim() != 3 || w.ndim() != 1 || w.dim(0) != x.dim(1)) {
    throw Error(ErrorKind::usage,
                "axis1_weighted_sum: shapes " + x.shape_str() + " vs " + w.shape_str());
  }
  int e = x.dim(0), p = x.dim(1), c = x.dim(2);
  Tensor<T> out = Tensor<T>::zeros({e, c});
  for (int i = 0; i < e; ++i)
    for (int j = 0; j < p; ++j) {
      T wv = w.ptr()[j];
      const T* row = x.ptr() + (static_cast<int64_t>(i) * p + j) * c;
      T* orow = out.ptr() + static_cast<int64_t>(i) * c;
      for (int k = 0; k < c; ++k) orow[k] += wv * row[k];
    }
  if (Graph<T>* g = result_graph(x, w)) {
    out.graph = g;
    out.node = g->add_node(
        {x.node, w.node},
        [xn = x.node, wn = w.node, xd = x.data, wd = w.data, e, p, c](
            Graph<T>& g, const std::vector<T>& go) {
          if (xn >= 0) {
            auto& gx = g.grad_buf(xn);
            for (int i = 0; i < e; ++i)
              for (int j = 0; j < p; ++j)
                for (int k = 0; k < c; ++k)
                  gx[(static_cast<size_t>(i) * p + j) * c + k] +=
                      go[static_cast<size_t>(i) * c + k] * (*wd)[static_cast<size_t>(j)];
          }
          if (wn >= 0) {
            auto& gw = g.grad_buf(wn);
            for (int j = 0; j < p; ++j) {
              T acc = T(0);
              for (int i = 0; i < e; ++i)
                for (int k = 0; k < c; ++k)
                  acc += go[static_cast<size_t>(i) * c + k] *
                         (*xd)[(static_cast<size_t>(i) * p + j) * c + k];
              gw[static_cast<size_t>(j)] += acc;
            }
          }
        },
        static_cast<int64_t>(e) * c);
  }
  return out;
}

// Gather rows of a 2D tensor; backward scatters.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<int>& rows) {
  if (x.ndim() != 2) throw Error(ErrorKind::usage, "gather_rows: need 2D");
  int n = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros({static_cast<int>(rows.size()), n});
  for (size_t i = 0; i < rows.size(); ++i) {
    int r = rows[i];
    if (r < 0 || r >= x.dim(0)) throw Error(ErrorKind::usage, "gather_rows: index out of range");
    std::copy(x.ptr() + static_cast<int64_t>(r) * n, x.ptr() + static_cast<int64_t>(r + 1) * n,
              out.ptr() + static_cast<int64_t>(i) * n);
  }
  if (Graph<T>* g = result_graph(x)) {
    out.graph = g;
    out.node = g->add_node(
        {x.node},
        [xn = x.node, rows, n](Graph<T>& g, const std::vector<T>& go) {
          auto& gx = g.grad_buf(xn);
          for (size_t i = 0; i < rows.size(); ++i)
            for (int j = 0; j < n; ++j)
              gx[static_cast<size_t>(rows[i]) * n + j] += go[i * static_cast<size_t>(n) + j];
        },
        out.size());
  }
  return out;
}

// out[g,p,:] = x[rows[g], perm[g][p], :] for x: [E,P,D]. Used to pull matched
// predictions under the point ordering chosen during assignment.
template <typename T>
Tensor<T> gather_points(const Tensor<T>& x, const std::vector<int>& rows,
                        const std::vector<std::vector<int>>& perms) {
  if (x.ndim() != 3) throw Error(ErrorKind::usage, "gather_points: need 3D");
  if (rows.size() != perms.size()) throw Error(ErrorKind::usage, "gather_points: size mismatch");
  int p = x.dim(1), d = x.dim(2);
  int gcount = static_cast<int>(rows.size());
  Tensor<T> out = Tensor<T>::zeros({gcount, p, d});
  for (int gi = 0; gi < gcount; ++gi) {
    if (static_cast<int>(perms[static_cast<size_t>(gi)].size()) != p) {
      throw Error(ErrorKind::usage, "gather_points: bad permutation length");
    }
    for (int j = 0; j < p; ++j) {
      int src = perms[static_cast<size_t>(gi)][static_cast<size_t>(j)];
      const T* sp = x.ptr() + (static_cast<int64_t>(rows[static_cast<size_t>(gi)]) * p + src) * d;
      T* op = out.ptr() + (static_cast<int64_t>(gi) * p + j) * d;
      std::copy(sp, sp + d, op);
    }
  }
  if (Graph<T>* g = result_graph(x)) {
    out.graph = g;
    out.node = g->add_node(
        {x.node},
        [xn = x.node, rows, perms, p, d](Graph<T>& g, const std::vector<T>& go) {
          auto& gx = g.grad_buf(xn);
          for (size_t gi = 0; gi < rows.size(); ++gi)
            for (int j = 0; j < p; ++j) {
              int src = perms[gi][static_cast<size_t>(j)];
              for (int k = 0; k < d; ++k)
                gx[(static_cast<size_t>(rows[gi]) * p + src) * d + static_cast<size_t>(k)] +=
                    go[(gi * static_cast<size_t>(p) + static_cast<size_t>(j)) * d +
                       static_cast<size_t>(k)];
            }
        },
        out.size());
  }
  return out;
}

// Repeat each row of [N,D] k times -> [N*k, D].
template <typename T>
Tensor<T> repeat_rows(const Tensor<T>& x, int k) {
  if (x.ndim() != 2) throw Error(ErrorKind::usage, "repeat_rows: need 2D");
  int n = x.dim(0), d = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros({n * k, d});
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < k; ++r)
      std::copy(x.ptr() + static_cast<int64_t>(i) * d, x.ptr() + static_cast<int64_t>(i + 1) * d,
                out.ptr() + (static_cast<int64_t>(i) * k + r) * d);
  if (Graph<T>* g = result_graph(x)) {
    out.graph = g;
    out.node = g->add_node(
        {x.node},
        [xn = x.node, n, d, k](Graph<T>& g, const std::vector<T>& go) {
          auto& gx = g.grad_buf(xn);
          for (int i = 0; i < n; ++i)
            for (int r = 0; r < k; ++r)
              for (int j = 0; j < d; ++j)
                gx[static_cast<size_t>(i) * d + j] +=
                    go[(static_cast<size_t>(i) * k + r) * d + static_cast<size_t>(j)];
        },
        out.size());
  }
  return out;
}

}  // namespace ops
}  // namespace himap
