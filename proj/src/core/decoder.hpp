#pragma once

#include <optional>

#include "core/nn_ops.hpp"
#include "core/optim.hpp"
#include "core/runconfig.hpp"

namespace himap {

// Fetches parameters either as graph leaves (training) or as plain constants
// (inference) depending on whether a graph is attached.
template <typename T>
struct ParamAccess {
  ParamStore<T>* store = nullptr;
  Graph<T>* graph = nullptr;

  Tensor<T> operator()(const std::string& name) const {
    return graph ? store->bind(*graph, name) : store->tensor(name);
  }
};

template <typename T>
struct LinearParams {
  Tensor<T> w;  // [in, out]
  Tensor<T> b;  // [out]
};

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const LinearParams<T>& p) {
  using namespace ops;
  Tensor<T> y = matmul(x, p.w);
  return add(y, broadcast_leading(p.b, y.dim(0)));
}

namespace decoder_ops {

using namespace ops;

// Position embedding of the anchors and the position-aware point query.
template <typename T>
struct PosEmbedResult {
  Tensor<T> bp;     // [EP, C]
  Tensor<T> qhat;   // [EP, C]
};

template <typename T>
PosEmbedResult<T> point_position_embed(const Tensor<T>& anchors,  // [EP, 2] in [0,1]
                                       const LinearParams<T>& wb, const Tensor<T>& qp) {
  Tensor<T> bp = linear(anchors, wb);
  return {bp, add(qp, bp)};
}

// Per-point sampling offsets (grid cells) and softmax-normalized
// attention weights over the K samples.
template <typename T>
struct SamplingResult {
  Tensor<T> offsets;  // [EP, 2K]
  Tensor<T> weights;  // [EP, K]
};

template <typename T>
SamplingResult<T> sampling_offsets_weights(const Tensor<T>& qhat, const LinearParams<T>& wo,
                                           const LinearParams<T>& wa) {
  Tensor<T> offsets = linear(qhat, wo);
  Tensor<T> weights = softmax(linear(qhat, wa), 1);
  return {offsets, weights};
}

// Weighted deformable sampling of the BEV grid around each anchor.
// Anchors are normalized; sampling locations are anchor * (dim - 1) plus the
// raw offsets in grid cells. Out-of-grid samples contribute zero.
template <typename T>
struct DeformableResult {
  Tensor<T> xdot_p;  // [EP, C]
  Tensor<T> locs;    // [EP*K, 2] grid coordinates (values used by inspect)
};

template <typename T>
DeformableResult<T> deformable_point_extract(const Tensor<T>& bev,      // [H, W, C]
                                             const Tensor<T>& anchors,  // [EP, 2]
                                             const Tensor<T>& offsets,  // [EP, 2K]
                                             const Tensor<T>& weights,  // [EP, K]
                                             const LinearParams<T>& wv,
                                             const Tensor<T>& qp) {
  int h = bev.dim(0), w = bev.dim(1), c = bev.dim(2);
  int ep = anchors.dim(0);
  int k = weights.dim(1);

  Tensor<T> scale = Tensor<T>::zeros({ep, 2});
  for (int i = 0; i < ep; ++i) {
    scale.ptr()[i * 2 + 0] = static_cast<T>(w - 1);
    scale.ptr()[i * 2 + 1] = static_cast<T>(h - 1);
  }
  Tensor<T> anchors_grid = mul(anchors, scale);
  Tensor<T> locs = add(repeat_rows(anchors_grid, k), reshape(offsets, {ep * k, 2}));

  Tensor<T> sampled = bilinear_gather(bev, locs);              // [EP*K, C]
  Tensor<T> valued = linear(sampled, wv);                      // [EP*K, C]
  Tensor<T> weighted = scale_rows(valued, reshape(weights, {ep * k}));
  Tensor<T> xp = reduce_sum(reshape(weighted, {ep, k, c}), 1);  // [EP, C]
  return {add(xp, qp), locs};
}

// Shared position embedding for the element query: softmax(w_pe)-weighted sum
// of the point embeddings within each element.
template <typename T>
Tensor<T> element_position_embed(const Tensor<T>& bp3,  // [E, P, C]
                                 const Tensor<T>& w_pe) {
  return axis1_weighted_sum(bp3, softmax(w_pe, 0));
}

// Masked single-head cross-attention from element queries onto the
// BEV grid. The mask multiplies the softmax output without renormalization;
// all-zero mask rows must already be replaced by ones by the caller.
template <typename T>
struct MaskedExtractResult {
  Tensor<T> xdot_e;  // [E, C]
  Tensor<T> attn;    // [E, HW] after masking
};

template <typename T>
MaskedExtractResult<T> masked_element_extract(const Tensor<T>& bev_flat,  // [HW, C]
                                              const Tensor<T>& bx_flat,   // [HW, C] constant
                                              const Tensor<T>& qe,        // [E, C]
                                              const Tensor<T>& be,        // [E, C]
                                              const Tensor<T>& mask,      // [E, HW] constant
                                              bool scale_logits) {
  int c = bev_flat.dim(1);
  Tensor<T> qhat_e = add(qe, be);
  Tensor<T> xhat = add(bev_flat, bx_flat);
  Tensor<T> logits = matmul(qhat_e, transpose2d(xhat));  // [E, HW]
  if (scale_logits) logits = mul_scalar(logits, static_cast<T>(1.0 / std::sqrt(double(c))));
  Tensor<T> attn = mul(softmax(logits, 1), mask);
  Tensor<T> xe = matmul(attn, bev_flat);
  return {add(xe, qe), attn};
}

template <typename T>
struct AttnBlockParams {
  Tensor<T> ln_g, ln_b;
  LinearParams<T> wq, wk, wv, wo;
};

template <typename T>
struct FfnBlockParams {
  Tensor<T> ln_g, ln_b;
  LinearParams<T> fc1, fc2;
};

template <typename T>
Tensor<T> ffn_block(const Tensor<T>& x2d, const FfnBlockParams<T>& p) {
  Tensor<T> t = layernorm(x2d, p.ln_g, p.ln_b);
  return add(x2d, linear(relu(linear(t, p.fc1)), p.fc2));
}

// Pre-norm multi-head self-attention with residual; x2d is [N, C].
template <typename T>
Tensor<T> mha_block(const Tensor<T>& x2d, const AttnBlockParams<T>& p, int heads) {
  int n = x2d.dim(0), c = x2d.dim(1);
  int dh = c / heads;
  Tensor<T> t = layernorm(x2d, p.ln_g, p.ln_b);
  Tensor<T> q = swap01(reshape(linear(t, p.wq), {n, heads, dh}));  // [h, N, dh]
  Tensor<T> k = swap01(reshape(linear(t, p.wk), {n, heads, dh}));
  Tensor<T> v = swap01(reshape(linear(t, p.wv), {n, heads, dh}));
  Tensor<T> logits = mul_scalar(bmm_nt(q, k), static_cast<T>(1.0 / std::sqrt(double(dh))));
  Tensor<T> ctx = bmm(softmax(logits, 2), v);                      // [h, N, dh]
  Tensor<T> merged = reshape(swap01(ctx), {n, c});
  return add(x2d, linear(merged, p.wo));
}

// Single-level refinement. Point features get per-element single-head
// self-attention over their P points plus an FFN; element features get an
// FFN. Element-level mixing is left to the outer self-attention.
template <typename T>
struct HybriderParams {
  AttnBlockParams<T> point_attn;
  FfnBlockParams<T> point_ffn;
  FfnBlockParams<T> elem_ffn;
};

template <typename T>
struct RefineResult {
  Tensor<T> xddot_p;  // [E, P, C]
  Tensor<T> xddot_e;  // [E, C]
};

template <typename T>
RefineResult<T> hybrider_refine(const Tensor<T>& xdot_p3,  // [E, P, C]
                                const Tensor<T>& xdot_e,   // [E, C]
                                const HybriderParams<T>& p) {
  int e = xdot_p3.dim(0), pts = xdot_p3.dim(1), c = xdot_p3.dim(2);
  // per-element single-head attention, batched over E
  Tensor<T> t = layernorm(reshape(xdot_p3, {e * pts, c}), p.point_attn.ln_g, p.point_attn.ln_b);
  Tensor<T> q = reshape(linear(t, p.point_attn.wq), {e, pts, c});
  Tensor<T> k = reshape(linear(t, p.point_attn.wk), {e, pts, c});
  Tensor<T> v = reshape(linear(t, p.point_attn.wv), {e, pts, c});
  Tensor<T> logits = mul_scalar(bmm_nt(q, k), static_cast<T>(1.0 / std::sqrt(double(c))));
  Tensor<T> ctx = bmm(softmax(logits, 2), v);  // [E, P, C]
  Tensor<T> xp = add(reshape(xdot_p3, {e * pts, c}),
                     linear(reshape(ctx, {e * pts, c}), p.point_attn.wo));
  xp = ffn_block(xp, p.point_ffn);
  Tensor<T> xe = ffn_block(xdot_e, p.elem_ffn);
  return {reshape(xp, {e, pts, c}), xe};
}

// Cross-level query update. The element branch is copied across the P
// points of its element; the point branch is pooled back with a learnable
// softmax-normalized weight vector. Disabled => plain pass-through.
template <typename T>
struct CrossLevelResult {
  Tensor<T> qp3;      // [E, P, C]
  Tensor<T> qe;       // [E, C]
  Tensor<T> hiquery;  // [E, P+1, C]
};

template <typename T>
CrossLevelResult<T> cross_level_update(const Tensor<T>& xddot_p3, const Tensor<T>& xddot_e,
                                       const Tensor<T>& w_cp, bool enabled) {
  int e = xddot_p3.dim(0), pts = xddot_p3.dim(1), c = xddot_p3.dim(2);
  Tensor<T> qp3 = xddot_p3;
  Tensor<T> qe = xddot_e;
  if (enabled) {
    qp3 = add(xddot_p3, expand_middle(xddot_e, pts));
    qe = add(xddot_e, axis1_weighted_sum(xddot_p3, softmax(w_cp, 0)));
  }
  Tensor<T> hiquery = concat<T>({qp3, reshape(qe, {e, 1, c})}, 1);
  return {qp3, qe, hiquery};
}

}  // namespace decoder_ops

// Per-layer predictions plus the intermediate head representations used by
// the point-element consistency constraint.
template <typename T>
struct LayerPrediction {
  Tensor<T> class_logits;  // [E, NC]
  Tensor<T> points;        // [E, P, 2] in (0,1)
  Tensor<T> mask_logits;   // [E, HW]
  Tensor<T> point_tap;     // [E, P, C] after the point head's first linear
  Tensor<T> elem_tap;      // [E, C]    after the mask head's first linear
};

// Binarize mask logits at probability 0.5 (logit > 0); rows that come out
// all-zero fall back to all-ones so the element still attends somewhere.
template <typename T>
Tensor<T> binarize_anchor_mask(const Tensor<T>& mask_logits) {
  int e = mask_logits.dim(0), hw = mask_logits.dim(1);
  Tensor<T> mask = Tensor<T>::zeros({e, hw});
  const T* logits = mask_logits.ptr();
  for (int i = 0; i < e; ++i) {
    bool any = false;
    for (int j = 0; j < hw; ++j) {
      bool on = logits[static_cast<int64_t>(i) * hw + j] > T(0);
      if (on) any = true;
      mask.ptr()[static_cast<int64_t>(i) * hw + j] = on ? T(1) : T(0);
    }
    if (!any) {
      for (int j = 0; j < hw; ++j) mask.ptr()[static_cast<int64_t>(i) * hw + j] = T(1);
    }
  }
  return mask;
}

// Raw values captured during forward for the inspect dump.
template <typename T>
struct LayerCapture {
  std::vector<T> anchors;         // EP*2, the anchors this layer consumed
  std::vector<T> effective_mask;  // E*HW after the all-zero fallback
  std::vector<T> attention;       // E*HW masked attention rows
  std::vector<T> sample_locs;     // EP*K*2 grid coords
  std::vector<T> sample_weights;  // EP*K
};

template <typename T>
struct ForwardOptions {
  // When set, layer l > 0 uses fixed_masks[l] (size E*HW, zero-row fallback
  // already applied) instead of binarizing the previous mask logits. Used by
  // the finite-difference harness, which must hold discrete structure fixed.
  const std::vector<std::vector<T>>* fixed_masks = nullptr;
  std::vector<LayerCapture<T>>* capture = nullptr;
};

template <typename T>
struct DecoderForwardResult {
  std::vector<LayerPrediction<T>> layers;
  const LayerPrediction<T>& final() const { return layers.back(); }
};

template <typename T>
class HybridDecoder {
 public:
  explicit HybridDecoder(const DecoderConfig& cfg, int grid_h, int grid_w)
      : cfg_(cfg), grid_h_(grid_h), grid_w_(grid_w) {}

  const DecoderConfig& config() const { return cfg_; }

  // Creates every decoder parameter (queries, anchors, per-layer weights).
  void init_params(ParamStore<T>& store, uint64_t seed) const;

  DecoderForwardResult<T> forward(ParamAccess<T> P, const Tensor<T>& bev,
                                  const ForwardOptions<T>& opts = {}) const;

 private:
  struct Layer {
    LinearParams<T> wb, wo, wa, wv;
    Tensor<T> w_pe, w_cp, w_ps;
    decoder_ops::HybriderParams<T> hybrider;
    decoder_ops::AttnBlockParams<T> self_attn;
    decoder_ops::FfnBlockParams<T> self_ffn;
    LinearParams<T> cls_fc1, cls_fc2, cls_out;
    LinearParams<T> pt_fc1, pt_fc2, pt_out;
    LinearParams<T> mask_fc1, mask_fc2;
  };
  Layer fetch_layer(ParamAccess<T>& P, int l) const;

  DecoderConfig cfg_;
  int grid_h_;
  int grid_w_;
};

// --- implementation ---

namespace detail {

inline std::string layer_name(int l, const std::string& suffix) {
  return "layers." + std::to_string(l) + "." + suffix;
}

template <typename T>
void create_linear(ParamStore<T>& store, const std::string& name, int in, int out, uint64_t seed,
                   double bias_init = 0.0) {
  double limit = std::sqrt(6.0 / (in + out));
  store.create(name + ".w", {in, out},
               [limit](Rng& r) { return static_cast<T>(r.uniform(-limit, limit)); }, seed);
  store.create(name + ".b", {out},
               [bias_init](Rng&) { return static_cast<T>(bias_init); }, seed);
}

template <typename T>
void create_layernorm(ParamStore<T>& store, const std::string& name, int c, uint64_t seed) {
  store.create(name + ".g", {c}, [](Rng&) { return T(1); }, seed);
  store.create(name + ".b", {c}, [](Rng&) { return T(0); }, seed);
}

template <typename T>
void create_attn_block(ParamStore<T>& store, const std::string& name, int c, uint64_t seed) {
  create_layernorm(store, name + ".ln", c, seed);
  create_linear(store, name + ".wq", c, c, seed);
  create_linear(store, name + ".wk", c, c, seed);
  create_linear(store, name + ".wv", c, c, seed);
  create_linear(store, name + ".wo", c, c, seed);
}

template <typename T>
void create_ffn_block(ParamStore<T>& store, const std::string& name, int c, int mult,
                      uint64_t seed) {
  create_layernorm(store, name + ".ln", c, seed);
  create_linear(store, name + ".fc1", c, c * mult, seed);
  create_linear(store, name + ".fc2", c * mult, c, seed);
}

template <typename T>
LinearParams<T> fetch_linear(ParamAccess<T>& P, const std::string& name) {
  return {P(name + ".w"), P(name + ".b")};
}

template <typename T>
decoder_ops::AttnBlockParams<T> fetch_attn_block(ParamAccess<T>& P, const std::string& name) {
  return {P(name + ".ln.g"), P(name + ".ln.b"), fetch_linear(P, name + ".wq"),
          fetch_linear(P, name + ".wk"), fetch_linear(P, name + ".wv"),
          fetch_linear(P, name + ".wo")};
}

template <typename T>
decoder_ops::FfnBlockParams<T> fetch_ffn_block(ParamAccess<T>& P, const std::string& name) {
  return {P(name + ".ln.g"), P(name + ".ln.b"), fetch_linear(P, name + ".fc1"),
          fetch_linear(P, name + ".fc2")};
}

}  // namespace detail

template <typename T>
void HybridDecoder<T>::init_params(ParamStore<T>& store, uint64_t seed) const {
  using namespace detail;
  const DecoderConfig& c = cfg_;
  store.create("query.hiquery", {c.elements, c.points + 1, c.channels},
               [](Rng& r) { return static_cast<T>(r.normal()); }, seed);
  // Layer-1 anchors parameterized through a sigmoid so they always stay in
  // [0,1]; initial values are uniform in (0,1).
  store.create("query.anchor_logits", {c.elements, c.points, 2},
               [](Rng& r) {
                 double u = std::clamp(r.uniform(), 1e-6, 1.0 - 1e-6);
                 return static_cast<T>(std::log(u / (1.0 - u)));
               },
               seed);
  for (int l = 0; l < c.layers; ++l) {
    auto ln = [l](const std::string& s) { return layer_name(l, s); };
    create_linear(store, ln("wb"), 2, c.channels, seed);
    create_linear(store, ln("wo"), c.channels, 2 * c.sample_points, seed);
    create_linear(store, ln("wa"), c.channels, c.sample_points, seed);
    create_linear(store, ln("wv"), c.channels, c.channels, seed);
    store.create(ln("w_pe"), {c.points}, [](Rng&) { return T(0); }, seed);
    store.create(ln("w_cp"), {c.points}, [](Rng&) { return T(0); }, seed);
    store.create(ln("w_ps"), {c.points}, [](Rng&) { return T(0); }, seed);
    create_attn_block(store, ln("frp.attn"), c.channels, seed);
    create_ffn_block(store, ln("frp.ffn"), c.channels, c.ffn_mult, seed);
    create_ffn_block(store, ln("fre.ffn"), c.channels, c.ffn_mult, seed);
    create_attn_block(store, ln("sa.attn"), c.channels, seed);
    create_ffn_block(store, ln("sa.ffn"), c.channels, c.ffn_mult, seed);
    create_linear(store, ln("head.cls.fc1"), c.channels, c.channels, seed);
    create_linear(store, ln("head.cls.fc2"), c.channels, c.channels, seed);
    create_linear(store, ln("head.cls.out"), c.channels, c.num_classes, seed, -2.0);
    create_linear(store, ln("head.pt.fc1"), c.channels, c.channels, seed);
    create_linear(store, ln("head.pt.fc2"), c.channels, c.channels, seed);
    create_linear(store, ln("head.pt.out"), c.channels, 2, seed);
    create_linear(store, ln("head.mask.fc1"), c.channels, c.channels, seed);
    create_linear(store, ln("head.mask.fc2"), c.channels, c.channels, seed);
  }
}

template <typename T>
typename HybridDecoder<T>::Layer HybridDecoder<T>::fetch_layer(ParamAccess<T>& P, int l) const {
  using namespace detail;
  auto ln = [l](const std::string& s) { return layer_name(l, s); };
  Layer out;
  out.wb = fetch_linear(P, ln("wb"));
  out.wo = fetch_linear(P, ln("wo"));
  out.wa = fetch_linear(P, ln("wa"));
  out.wv = fetch_linear(P, ln("wv"));
  out.w_pe = P(ln("w_pe"));
  out.w_cp = P(ln("w_cp"));
  out.w_ps = P(ln("w_ps"));
  out.hybrider.point_attn = fetch_attn_block(P, ln("frp.attn"));
  out.hybrider.point_ffn = fetch_ffn_block(P, ln("frp.ffn"));
  out.hybrider.elem_ffn = fetch_ffn_block(P, ln("fre.ffn"));
  out.self_attn = fetch_attn_block(P, ln("sa.attn"));
  out.self_ffn = fetch_ffn_block(P, ln("sa.ffn"));
  out.cls_fc1 = fetch_linear(P, ln("head.cls.fc1"));
  out.cls_fc2 = fetch_linear(P, ln("head.cls.fc2"));
  out.cls_out = fetch_linear(P, ln("head.cls.out"));
  out.pt_fc1 = fetch_linear(P, ln("head.pt.fc1"));
  out.pt_fc2 = fetch_linear(P, ln("head.pt.fc2"));
  out.pt_out = fetch_linear(P, ln("head.pt.out"));
  out.mask_fc1 = fetch_linear(P, ln("head.mask.fc1"));
  out.mask_fc2 = fetch_linear(P, ln("head.mask.fc2"));
  return out;
}

template <typename T>
DecoderForwardResult<T> HybridDecoder<T>::forward(ParamAccess<T> P, const Tensor<T>& bev,
                                                  const ForwardOptions<T>& opts) const {
  using namespace ops;
  using namespace decoder_ops;
  const DecoderConfig& c = cfg_;
  const int e = c.elements, pts = c.points, ch = c.channels;
  const int hw = grid_h_ * grid_w_;
  if (bev.dim(0) != grid_h_ || bev.dim(1) != grid_w_ || bev.dim(2) != ch) {
    throw Error(ErrorKind::usage, "decoder_forward: bev shape " + bev.shape_str() +
                                      " does not match the configured grid");
  }

  Tensor<T> bev_flat = reshape(bev, {hw, ch});
  Tensor<T> bx = sinusoidal_embedding_2d<T>(grid_h_, grid_w_, ch);
  Tensor<T> bx_flat = reshape(bx, {hw, ch});

  Tensor<T> hiquery = P("query.hiquery");
  Tensor<T> anchors = sigmoid(reshape(P("query.anchor_logits"), {e * pts, 2}));
  Tensor<T> mask = Tensor<T>::full({e, hw}, T(1));  // layer 1: all ones

  DecoderForwardResult<T> result;
  for (int l = 0; l < c.layers; ++l) {
    Layer lp = fetch_layer(P, l);

    Tensor<T> hq3 = reshape(hiquery, {e, pts + 1, ch});
    Tensor<T> qp3 = slice(hq3, 1, 0, pts);
    Tensor<T> qe = reshape(slice(hq3, 1, pts, 1), {e, ch});
    Tensor<T> qp = reshape(qp3, {e * pts, ch});

    auto pe = point_position_embed(anchors, lp.wb, qp);
    auto sw = sampling_offsets_weights(pe.qhat, lp.wo, lp.wa);
    auto de = deformable_point_extract(bev, anchors, sw.offsets, sw.weights, lp.wv, qp);
    Tensor<T> be = element_position_embed(reshape(pe.bp, {e, pts, ch}), lp.w_pe);
    auto me = masked_element_extract(bev_flat, bx_flat, qe, be, mask, c.eq4_scale);
    auto rf = hybrider_refine(reshape(de.xdot_p, {e, pts, ch}), me.xdot_e, lp.hybrider);
    auto cl = cross_level_update(rf.xddot_p, rf.xddot_e, lp.w_cp, c.cross_level_update);

    Tensor<T> tokens = reshape(cl.hiquery, {e * (pts + 1), ch});
    tokens = mha_block(tokens, lp.self_attn, c.self_attn_heads);
    tokens = ffn_block(tokens, lp.self_ffn);
    hiquery = reshape(tokens, {e, pts + 1, ch});

    Tensor<T> out_qp = reshape(slice(hiquery, 1, 0, pts), {e * pts, ch});
    Tensor<T> out_qe = reshape(slice(hiquery, 1, pts, 1), {e, ch});

    LayerPrediction<T> pred;
    Tensor<T> cls_h = relu(linear(out_qe, lp.cls_fc1));
    cls_h = linear(cls_h, lp.cls_fc2);
    pred.class_logits = linear(cls_h, lp.cls_out);

    Tensor<T> pt_h1 = linear(out_qp, lp.pt_fc1);
    pred.point_tap = reshape(pt_h1, {e, pts, ch});
    Tensor<T> pt_h = linear(relu(pt_h1), lp.pt_fc2);
    pred.points = reshape(sigmoid(linear(pt_h, lp.pt_out)), {e, pts, 2});

    Tensor<T> mk_h1 = linear(out_qe, lp.mask_fc1);
    pred.elem_tap = mk_h1;
    Tensor<T> mk_h = linear(relu(mk_h1), lp.mask_fc2);
    pred.mask_logits = matmul(mk_h, transpose2d(bev_flat));  // [E, HW]

    if (opts.capture) {
      LayerCapture<T> cap;
      cap.anchors = *anchors.data;
      cap.effective_mask = *mask.data;
      cap.attention = *me.attn.data;
      cap.sample_locs = *de.locs.data;
      cap.sample_weights = *sw.weights.data;
      opts.capture->push_back(std::move(cap));
    }

    // Next layer consumes this layer's point outputs as anchors and the
    // binarized mask predictions as the anchor mask (threshold 0.5 on the
    // sigmoid, i.e. logit > 0). Binarization detaches by construction.
    if (l + 1 < c.layers) {
      anchors = reshape(pred.points, {e * pts, 2});
      if (opts.fixed_masks) {
        mask = Tensor<T>::from({e, hw}, (*opts.fixed_masks)[static_cast<size_t>(l + 1)]);
      } else {
        mask = binarize_anchor_mask(pred.mask_logits);
      }
    }
    result.layers.push_back(std::move(pred));
  }
  return result;
}

}  // namespace himap
