#pragma once

#include <cstdint>
#include <utility>

#include "bof/model_base.hpp"

namespace bof::model {

struct BlastOFormerConfig {
  std::size_t patch_size = 1;
  std::size_t input_embed = 96;
  std::size_t seq_embed = 256;
  std::size_t encoder_layers = 6;
  std::size_t heads = 4;
  std::size_t rff_dim = 64;
  double rff_sigma = 1.0;
  double pos_scale = 1.0;  // RoPE coordinate scale; identity for the 10 m domain
  std::uint64_t model_seed = 0;

  void validate(std::size_t nx, std::size_t ny) const {
    if (patch_size == 0 || nx % patch_size != 0 || ny % patch_size != 0)
      throw std::invalid_argument("blastoformer: patch size " + std::to_string(patch_size) +
                                  " does not divide the grid");
    if (seq_embed % heads != 0)
      throw std::invalid_argument("blastoformer: seq_embed must be divisible by heads");
    if ((seq_embed / heads) % 4 != 0)
      throw std::invalid_argument("blastoformer: head dim must be divisible by 4 for RoPE");
  }

  nlohmann::json to_json() const {
    return {{"patch_size", patch_size}, {"input_embed", input_embed}, {"seq_embed", seq_embed},
            {"encoder_layers", encoder_layers}, {"heads", heads},     {"rff_dim", rff_dim},
            {"rff_sigma", rff_sigma},           {"pos_scale", pos_scale},
            {"model_seed", model_seed}};
  }

  static BlastOFormerConfig from_json(const nlohmann::json& j) {
    BlastOFormerConfig c;
    c.patch_size = j.at("patch_size").get<std::size_t>();
    c.input_embed = j.at("input_embed").get<std::size_t>();
    c.seq_embed = j.at("seq_embed").get<std::size_t>();
    c.encoder_layers = j.at("encoder_layers").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.rff_dim = j.at("rff_dim").get<std::size_t>();
    c.rff_sigma = j.at("rff_sigma").get<double>();
    c.pos_scale = j.at("pos_scale").get<double>();
    c.model_seed = j.at("model_seed").get<std::uint64_t>();
    return c;
  }
};

// Closed-form parameter accounting; kept in sync with construction below and
// checked against the instantiated sum in tests.
inline std::size_t blastoformer_param_count(const BlastOFormerConfig& c,
                                            const scene::GridSpec& g) {
  (void)g;
  const std::size_t p2 = c.patch_size * c.patch_size;
  const std::size_t e = c.input_embed, d = c.seq_embed;
  std::size_t n = 0;
  n += p2 * 4 * 4 + 4 + p2 * 2 * 2 + 2;                   // patch projections
  n += 4 * e + e + 2 * e + e + e * d + d;                 // embeddings
  n += 2 * d;                                             // input layer norm
  n += c.encoder_layers * (2 * d + 4 * (d * d + d) + 2 * d + d * 2 * d + 2 * d + 2 * d * d + d);
  n += 2 * d;                                             // final layer norm
  n += 2 * c.rff_dim * d + d;                             // query projection
  n += 3 * (d * d + d);                                   // key/value/output projections
  n += d * p2 + p2;                                       // output head
  n += p2 * p2 + p2;                                      // depatchification
  return n;
}

// The grid-to-grid attention surrogate: patchify, spatial encoder with RoPE
// self-attention, pointwise cross-attention decoder over RFF query
// embeddings, linear depatchification.
template <class S>
class BlastOFormer final : public ModelIface<S> {
 public:
  BlastOFormer(const BlastOFormerConfig& cfg, const scene::GridSpec& grid)
      : cfg_(cfg), grid_(grid) {
    cfg_.validate(grid.nx, grid.ny);
    Rng64 rng(cfg_.model_seed);
    const std::size_t p2 = cfg_.patch_size * cfg_.patch_size;
    const std::size_t e = cfg_.input_embed, d = cfg_.seq_embed;

    w_val_ = &ps_.add("patch.w_val", uniform_init<S>(rng, {p2 * 4, 4}, p2 * 4));
    b_val_ = &ps_.add("patch.b_val", Tensor<S>::zeros({4}));
    w_pos_ = &ps_.add("patch.w_pos", uniform_init<S>(rng, {p2 * 2, 2}, p2 * 2));
    b_pos_ = &ps_.add("patch.b_pos", Tensor<S>::zeros({2}));

    embed_val_w_ = &ps_.add("embed.val_w", uniform_init<S>(rng, {4, e}, 4));
    embed_val_b_ = &ps_.add("embed.val_b", Tensor<S>::zeros({e}));
    embed_pos_w_ = &ps_.add("embed.pos_w", uniform_init<S>(rng, {2, e}, 2));
    embed_pos_b_ = &ps_.add("embed.pos_b", Tensor<S>::zeros({e}));
    to_seq_w_ = &ps_.add("embed.seq_w", uniform_init<S>(rng, {e, d}, e));
    to_seq_b_ = &ps_.add("embed.seq_b", Tensor<S>::zeros({d}));

    ln_in_g_ = &ps_.add("enc.ln_in.g", Tensor<S>::full({d}, S(1)));
    ln_in_b_ = &ps_.add("enc.ln_in.b", Tensor<S>::zeros({d}));
    layers_.resize(cfg_.encoder_layers);
    for (std::size_t l = 0; l < cfg_.encoder_layers; ++l) {
      const std::string pre = "enc.layer" + std::to_string(l) + ".";
      EncoderLayer& ly = layers_[l];
      ly.ln_attn_g = &ps_.add(pre + "ln_attn.g", Tensor<S>::full({d}, S(1)));
      ly.ln_attn_b = &ps_.add(pre + "ln_attn.b", Tensor<S>::zeros({d}));
      ly.wq = &ps_.add(pre + "wq", uniform_init<S>(rng, {d, d}, d));
      ly.bq = &ps_.add(pre + "bq", Tensor<S>::zeros({d}));
      ly.wk = &ps_.add(pre + "wk", uniform_init<S>(rng, {d, d}, d));
      ly.bk = &ps_.add(pre + "bk", Tensor<S>::zeros({d}));
      ly.wv = &ps_.add(pre + "wv", uniform_init<S>(rng, {d, d}, d));
      ly.bv = &ps_.add(pre + "bv", Tensor<S>::zeros({d}));
      ly.wo = &ps_.add(pre + "wo", uniform_init<S>(rng, {d, d}, d));
      ly.bo = &ps_.add(pre + "bo", Tensor<S>::zeros({d}));
      ly.ln_ff_g = &ps_.add(pre + "ln_ff.g", Tensor<S>::full({d}, S(1)));
      ly.ln_ff_b = &ps_.add(pre + "ln_ff.b", Tensor<S>::zeros({d}));
      ly.ff1_w = &ps_.add(pre + "ff1_w", uniform_init<S>(rng, {d, 2 * d}, d));
      ly.ff1_b = &ps_.add(pre + "ff1_b", Tensor<S>::zeros({2 * d}));
      ly.ff2_w = &ps_.add(pre + "ff2_w", uniform_init<S>(rng, {2 * d, d}, 2 * d));
      ly.ff2_b = &ps_.add(pre + "ff2_b", Tensor<S>::zeros({d}));
    }
    ln_out_g_ = &ps_.add("enc.ln_out.g", Tensor<S>::full({d}, S(1)));
    ln_out_b_ = &ps_.add("enc.ln_out.b", Tensor<S>::zeros({d}));

    // RFF projection is frozen at construction, not trained.
    rff_b_ = gaussian_init<S>(rng, {2, cfg_.rff_dim}, cfg_.rff_sigma);
    q_proj_w_ = &ps_.add("dec.q_w", uniform_init<S>(rng, {2 * cfg_.rff_dim, d}, 2 * cfg_.rff_dim));
    q_proj_b_ = &ps_.add("dec.q_b", Tensor<S>::zeros({d}));
    k_proj_w_ = &ps_.add("dec.k_w", uniform_init<S>(rng, {d, d}, d));
    k_proj_b_ = &ps_.add("dec.k_b", Tensor<S>::zeros({d}));
    v_proj_w_ = &ps_.add("dec.v_w", uniform_init<S>(rng, {d, d}, d));
    v_proj_b_ = &ps_.add("dec.v_b", Tensor<S>::zeros({d}));
    attn_out_w_ = &ps_.add("dec.out_w", uniform_init<S>(rng, {d, d}, d));
    attn_out_b_ = &ps_.add("dec.out_b", Tensor<S>::zeros({d}));
    head_w_ = &ps_.add("dec.head_w", uniform_init<S>(rng, {d, p2}, d));
    head_b_ = &ps_.add("dec.head_b", Tensor<S>::zeros({p2}));
    depatch_w_ = &ps_.add("depatch.w", uniform_init<S>(rng, {p2, p2}, p2));
    depatch_b_ = &ps_.add("depatch.b", Tensor<S>::zeros({p2}));

    centers_ = patch_centers();
  }

  std::string kind() const override { return "blastoformer"; }
  nlohmann::json config_json() const override { return cfg_.to_json(); }
  const std::vector<Param<S>*>& params() const override { return ps_.params(); }
  std::size_t param_count() const override { return ps_.count_values(); }
  const BlastOFormerConfig& config() const { return cfg_; }
  const scene::GridSpec& grid() const { return grid_; }
  const Tensor<S>& rff_projection() const { return rff_b_; }
  const Tensor<S>& patch_center_positions() const { return centers_; }

  std::size_t token_count() const {
    return (grid_.nx / cfg_.patch_size) * (grid_.ny / cfg_.patch_size);
  }

  // Patch-wise linear projections to 4-wide value tokens and 2-wide position
  // tokens, row-major over patches.
  std::pair<ops::Var<S>, ops::Var<S>> patchify(Tape<S>& t, const scene::InputTensor& in) {
    check_shape(in.values, {grid_.ny, grid_.nx, 4}, "patchify values");
    check_shape(in.coords, {grid_.ny, grid_.nx, 2}, "patchify coords");
    ops::Var<S> vals = t.constant(in.values.template cast<S>());
    ops::Var<S> crds = t.constant(in.coords.template cast<S>());
    ops::Var<S> vtok = ops::linear(t, ops::gather_patches(t, vals, cfg_.patch_size), *w_val_, *b_val_);
    ops::Var<S> ptok = ops::linear(t, ops::gather_patches(t, crds, cfg_.patch_size), *w_pos_, *b_pos_);
    return {vtok, ptok};
  }

  // Projection to the sequence width, then pre-norm residual self-attention
  // blocks with RoPE on queries and keys, each followed by a residual
  // feed-forward, and a final layer norm.
  ops::Var<S> encode(Tape<S>& t, ops::Var<S> value_tokens, ops::Var<S> pos_tokens,
                     const Tensor<S>& positions) {
    ops::Var<S> emb = ops::add(t, ops::linear(t, value_tokens, *embed_val_w_, *embed_val_b_),
                               ops::linear(t, pos_tokens, *embed_pos_w_, *embed_pos_b_));
    ops::Var<S> z = ops::linear(t, emb, *to_seq_w_, *to_seq_b_);
    z = ops::layer_norm(t, z, *ln_in_g_, *ln_in_b_);
    const std::size_t n = z->value.dim(0), d = cfg_.seq_embed;
    const std::size_t dh = d / cfg_.heads;
    for (EncoderLayer& ly : layers_) {
      ops::Var<S> h = ops::layer_norm(t, z, *ly.ln_attn_g, *ly.ln_attn_b);
      ops::Var<S> q = ops::reshape(t, ops::linear(t, h, *ly.wq, *ly.bq), {n, cfg_.heads, dh});
      ops::Var<S> k = ops::reshape(t, ops::linear(t, h, *ly.wk, *ly.bk), {n, cfg_.heads, dh});
      ops::Var<S> v = ops::reshape(t, ops::linear(t, h, *ly.wv, *ly.bv), {n, cfg_.heads, dh});
      q = ops::rope_apply(t, q, positions, cfg_.pos_scale);
      k = ops::rope_apply(t, k, positions, cfg_.pos_scale);
      ops::Var<S> a = ops::reshape(t, ops::softmax_attention(t, q, k, v), {n, d});
      z = ops::add(t, z, ops::linear(t, a, *ly.wo, *ly.bo));
      ops::Var<S> f = ops::layer_norm(t, z, *ly.ln_ff_g, *ly.ln_ff_b);
      f = ops::linear(t, ops::relu(t, ops::linear(t, f, *ly.ff1_w, *ly.ff1_b)), *ly.ff2_w,
                      *ly.ff2_b);
      z = ops::add(t, z, f);
    }
    return ops::layer_norm(t, z, *ln_out_g_, *ln_out_b_);
  }

  // One residual cross-attention block over RFF query embeddings, then the
  // output head producing p^2 values per query token.
  ops::Var<S> decode(Tape<S>& t, ops::Var<S> z, const Tensor<S>& query_pos,
                     const Tensor<S>& key_pos) {
    if (z->value.rank() != 2 || z->value.dim(1) != cfg_.seq_embed)
      throw std::invalid_argument("decode: encoder width mismatch");
    const std::size_t nq = query_pos.dim(0), nk = z->value.dim(0);
    const std::size_t d = cfg_.seq_embed, dh = d / cfg_.heads;
    ops::Var<S> qe = t.constant(ops::rff_features(query_pos, rff_b_));
    ops::Var<S> q_emb = ops::linear(t, qe, *q_proj_w_, *q_proj_b_);
    ops::Var<S> q = ops::reshape(t, q_emb, {nq, cfg_.heads, dh});
    ops::Var<S> k =
        ops::reshape(t, ops::linear(t, z, *k_proj_w_, *k_proj_b_), {nk, cfg_.heads, dh});
    ops::Var<S> v =
        ops::reshape(t, ops::linear(t, z, *v_proj_w_, *v_proj_b_), {nk, cfg_.heads, dh});
    q = ops::rope_apply(t, q, query_pos, cfg_.pos_scale);
    k = ops::rope_apply(t, k, key_pos, cfg_.pos_scale);
    ops::Var<S> a = ops::reshape(t, ops::softmax_attention(t, q, k, v), {nq, d});
    // Residual on the query path: with zeroed attention output weights the
    // decoder is a pure function of the query embedding.
    ops::Var<S> zp = ops::add(t, q_emb, ops::linear(t, a, *attn_out_w_, *attn_out_b_));
    return ops::linear(t, zp, *head_w_, *head_b_);
  }

  ops::Var<S> depatchify(Tape<S>& t, ops::Var<S> u) {
    ops::Var<S> cells = ops::linear(t, u, *depatch_w_, *depatch_b_);
    return ops::scatter_patches(t, cells, cfg_.patch_size, grid_.ny, grid_.nx);
  }

  // Normalized log-pressure field for one input tensor.
  ops::Var<S> forward(Tape<S>& t, const scene::InputTensor& in) {
    auto [vtok, ptok] = patchify(t, in);
    ops::Var<S> z = encode(t, vtok, ptok, centers_);
    ops::Var<S> u = decode(t, z, centers_, centers_);
    return depatchify(t, u);
  }

  ops::Var<S> predict(Tape<S>& t, const data::Sample& sample) override {
    return forward(t, sample.input);
  }

  Tensor<S> patch_centers() const {
    const std::size_t p = cfg_.patch_size;
    const std::size_t by = grid_.ny / p, bx = grid_.nx / p;
    Tensor<S> c({by * bx, 2});
    for (std::size_t ty = 0; ty < by; ++ty)
      for (std::size_t tx = 0; tx < bx; ++tx) {
        c.at2(ty * bx + tx, 0) = S(grid_.x0 + (double(tx * p) + double(p - 1) / 2.0) * grid_.dx);
        c.at2(ty * bx + tx, 1) = S(grid_.y0 + (double(ty * p) + double(p - 1) / 2.0) * grid_.dy);
      }
    return c;
  }

 private:
  struct EncoderLayer {
    Param<S>*ln_attn_g, *ln_attn_b, *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
    Param<S>*ln_ff_g, *ln_ff_b, *ff1_w, *ff1_b, *ff2_w, *ff2_b;
  };

  BlastOFormerConfig cfg_;
  scene::GridSpec grid_;
  ParamSet<S> ps_;
  Param<S>*w_val_, *b_val_, *w_pos_, *b_pos_;
  Param<S>*embed_val_w_, *embed_val_b_, *embed_pos_w_, *embed_pos_b_, *to_seq_w_, *to_seq_b_;
  Param<S>*ln_in_g_, *ln_in_b_, *ln_out_g_, *ln_out_b_;
  std::vector<EncoderLayer> layers_;
  Tensor<S> rff_b_;
  Param<S>*q_proj_w_, *q_proj_b_, *k_proj_w_, *k_proj_b_, *v_proj_w_, *v_proj_b_;
  Param<S>*attn_out_w_, *attn_out_b_, *head_w_, *head_b_, *depatch_w_, *depatch_b_;
  Tensor<S> centers_;
};

// ---------------------------------------------------------------------------
// Auxiliary correction network mapping log-pressure fields to unscaled Pa.
// Six 3x3 convolutions with an encoder-decoder channel profile; the last
// layer carries a fixed 1e6 Pa unit scale so optimization runs at O(1)
// magnitudes. Emission clamps at 1 Pa.
struct UnscalerConfig {
  std::vector<std::size_t> widths = {32, 64, 128, 64, 32};
  std::uint64_t model_seed = 0;

  nlohmann::json to_json() const { return {{"widths", widths}, {"model_seed", model_seed}}; }
  static UnscalerConfig from_json(const nlohmann::json& j) {
    UnscalerConfig c;
    c.widths = j.at("widths").get<std::vector<std::size_t>>();
    c.model_seed = j.at("model_seed").get<std::uint64_t>();
    return c;
  }
};

inline constexpr double kUnscalerOutputScale = 1e6;  // network units -> Pa
inline constexpr double kUnscalerFloorPa = 1.0;

template <class S>
class UnscalerCnn {
 public:
  explicit UnscalerCnn(const UnscalerConfig& cfg) : cfg_(cfg) {
    Rng64 rng(cfg_.model_seed);
    std::vector<std::size_t> chans;
    chans.push_back(1);
    for (std::size_t w : cfg_.widths) chans.push_back(w);
    chans.push_back(1);
    for (std::size_t l = 0; l + 1 < chans.size(); ++l) {
      const std::string pre = "unscaler.conv" + std::to_string(l) + ".";
      kernels_.push_back(&ps_.add(
          pre + "w", uniform_init<S>(rng, {chans[l + 1], chans[l], 3, 3}, chans[l] * 9)));
      biases_.push_back(&ps_.add(pre + "b", Tensor<S>::zeros({chans[l + 1]})));
    }
  }

  const UnscalerConfig& config() const { return cfg_; }
  const std::vector<Param<S>*>& params() const { return ps_.params(); }

  // Raw network output in scaled units (Pa / 1e6), on the tape for training.
  ops::Var<S> forward_raw(Tape<S>& t, const Tensor<S>& log_field) {
    if (log_field.rank() != 2) throw std::invalid_argument("unscaler: field must be [ny, nx]");
    const std::size_t ny = log_field.dim(0), nx = log_field.dim(1);
    Tensor<S> in({1, ny, nx}, log_field.data);
    ops::Var<S> x = t.constant(std::move(in));
    for (std::size_t l = 0; l < kernels_.size(); ++l) {
      x = ops::conv2d(t, x, *kernels_[l], *biases_[l]);
      if (l + 1 < kernels_.size()) x = ops::relu(t, x);
    }
    return ops::reshape(t, x, {ny, nx});
  }

  // Pressure in Pa, clamped at 1 Pa on emission.
  scene::Field forward(const scene::Field& log_field) {
    Tape<S> t;
    t.set_recording(false);
    ops::Var<S> raw = forward_raw(t, log_field.template cast<S>());
    scene::Field out({log_field.dim(0), log_field.dim(1)});
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = float(std::max(double(raw->value[i]) * kUnscalerOutputScale, kUnscalerFloorPa));
    return out;
  }

 private:
  UnscalerConfig cfg_;
  ParamSet<S> ps_;
  std::vector<Param<S>*> kernels_, biases_;
};

}  // namespace bof::model
