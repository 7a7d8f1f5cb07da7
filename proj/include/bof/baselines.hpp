#pragma once

#include <cstdint>

#include "bof/model_base.hpp"

namespace bof::model {

// ---------------------------------------------------------------------------
// Plain convolutional baseline: 3x3 kernels, ReLU between layers, none after
// the last; spatial size preserved throughout.
struct CnnConfig {
  std::size_t layers = 6;
  std::size_t base_channels = 128;
  std::uint64_t model_seed = 0;

  void validate() const {
    if (layers < 2) throw std::invalid_argument("cnn: need at least input and output layers");
    if (base_channels == 0) throw std::invalid_argument("cnn: base_channels must be positive");
  }

  nlohmann::json to_json() const {
    return {{"layers", layers}, {"base_channels", base_channels}, {"model_seed", model_seed}};
  }
  static CnnConfig from_json(const nlohmann::json& j) {
    CnnConfig c;
    c.layers = j.at("layers").get<std::size_t>();
    c.base_channels = j.at("base_channels").get<std::size_t>();
    c.model_seed = j.at("model_seed").get<std::uint64_t>();
    return c;
  }
};

inline std::size_t cnn_param_count(const CnnConfig& c) {
  std::size_t n = 0;
  std::size_t prev = 4;
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::size_t next = (l + 1 == c.layers) ? 1 : c.base_channels;
    n += next * prev * 9 + next;
    prev = next;
  }
  return n;
}

template <class S>
class CnnModel final : public ModelIface<S> {
 public:
  CnnModel(const CnnConfig& cfg, const scene::GridSpec& grid) : cfg_(cfg), grid_(grid) {
    cfg_.validate();
    Rng64 rng(cfg_.model_seed);
    std::size_t prev = 4;
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      const std::size_t next = (l + 1 == cfg_.layers) ? 1 : cfg_.base_channels;
      const std::string pre = "cnn.conv" + std::to_string(l) + ".";
      kernels_.push_back(&ps_.add(pre + "w", uniform_init<S>(rng, {next, prev, 3, 3}, prev * 9)));
      biases_.push_back(&ps_.add(pre + "b", Tensor<S>::zeros({next})));
      prev = next;
    }
  }

  std::string kind() const override { return "cnn"; }
  nlohmann::json config_json() const override { return cfg_.to_json(); }
  const std::vector<Param<S>*>& params() const override { return ps_.params(); }
  std::size_t param_count() const override { return ps_.count_values(); }
  const CnnConfig& config() const { return cfg_; }

  // Channel-first SDF stack in, normalized log-pressure out.
  ops::Var<S> forward(Tape<S>& t, const scene::InputTensor& in) {
    check_shape(in.values, {grid_.ny, grid_.nx, 4}, "cnn input");
    Tensor<S> x({4, grid_.ny, grid_.nx});
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t j = 0; j < grid_.ny; ++j)
        for (std::size_t i = 0; i < grid_.nx; ++i)
          x.at3(c, j, i) = S(in.values.at3(j, i, c));
    ops::Var<S> h = t.constant(std::move(x));
    for (std::size_t l = 0; l < kernels_.size(); ++l) {
      h = ops::conv2d(t, h, *kernels_[l], *biases_[l]);
      if (l + 1 < kernels_.size()) h = ops::relu(t, h);
    }
    return ops::reshape(t, h, {grid_.ny, grid_.nx});
  }

  ops::Var<S> predict(Tape<S>& t, const data::Sample& sample) override {
    return forward(t, sample.input);
  }

 private:
  CnnConfig cfg_;
  scene::GridSpec grid_;
  ParamSet<S> ps_;
  std::vector<Param<S>*> kernels_, biases_;
};

// ---------------------------------------------------------------------------
// Fourier neural operator baseline. The charge channel is the primary input;
// the scenario enters as 21 constant conditioning channels at the lift.
struct FnoConfig {
  std::size_t modes1 = 6, modes2 = 6;
  std::size_t width = 24;
  std::size_t layers = 4;
  std::size_t proj_hidden = 128;
  std::uint64_t model_seed = 0;

  nlohmann::json to_json() const {
    return {{"modes1", modes1}, {"modes2", modes2},           {"width", width},
            {"layers", layers}, {"proj_hidden", proj_hidden}, {"model_seed", model_seed}};
  }
  static FnoConfig from_json(const nlohmann::json& j) {
    FnoConfig c;
    c.modes1 = j.at("modes1").get<std::size_t>();
    c.modes2 = j.at("modes2").get<std::size_t>();
    c.width = j.at("width").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.proj_hidden = j.at("proj_hidden").get<std::size_t>();
    c.model_seed = j.at("model_seed").get<std::uint64_t>();
    return c;
  }
};

inline constexpr std::size_t kConditioningWidth = 21;

inline std::size_t fno_param_count(const FnoConfig& c) {
  std::size_t n = 0;
  n += c.width * (kConditioningWidth + 1) + c.width;                       // lift
  n += c.layers * (c.width * c.width * c.modes1 * c.modes2 * 2 +           // spectral
                   c.width * c.width + c.width);                           // pointwise skip
  n += c.proj_hidden * c.width + c.proj_hidden + 1 * c.proj_hidden + 1;    // projection
  return n;
}

// 18 obstacle bounds plus charge (x, y, mass), each affinely rescaled to
// [-1, 1] over its sampling interval; degenerate intervals map to 0.
template <class S>
Tensor<S> conditioning_vector(const scene::Scenario& s) {
  static constexpr double kIv[21][2] = {
      {-4.9, -4.5}, {-2.5, 2.25}, {2.0, 3.0}, {2.5, 4.0}, {0.0, 0.0}, {0.5, 2.0},  // obstacle 1
      {-2.0, -1.9}, {1.0, 1.5},   {2.0, 3.0}, {2.5, 4.0}, {0.0, 0.0}, {0.5, 2.0},  // obstacle 2
      {1.5, 2.5},   {4.5, 4.9},   {2.0, 3.0}, {2.5, 4.0}, {0.0, 0.0}, {0.5, 2.0},  // obstacle 3
      {-4.9, 4.9},  {-4.9, 2.0},  {5.0, 50.0}};                                    // charge
  double raw[21];
  for (int k = 0; k < 3; ++k) {
    const scene::Obstacle& o = s.obstacles[std::size_t(k)];
    raw[6 * k + 0] = o.x_min;
    raw[6 * k + 1] = o.x_max;
    raw[6 * k + 2] = o.y_min;
    raw[6 * k + 3] = o.y_max;
    raw[6 * k + 4] = o.z_min;
    raw[6 * k + 5] = o.z_max;
  }
  raw[18] = s.charge.x;
  raw[19] = s.charge.y;
  raw[20] = s.charge.mass;

  Tensor<S> out({kConditioningWidth});
  for (std::size_t k = 0; k < kConditioningWidth; ++k) {
    const double mid = (kIv[k][0] + kIv[k][1]) / 2.0;
    const double half = (kIv[k][1] - kIv[k][0]) / 2.0;
    out[k] = half > 0.0 ? S((raw[k] - mid) / half) : S(0);
  }
  return out;
}

template <class S>
class FnoModel final : public ModelIface<S> {
 public:
  FnoModel(const FnoConfig& cfg, const scene::GridSpec& grid) : cfg_(cfg), grid_(grid) {
    if (cfg_.modes1 > grid.ny || cfg_.modes2 > grid.nx / 2 + 1)
      throw std::invalid_argument("fno: modes exceed the grid transform sizes");
    Rng64 rng(cfg_.model_seed);
    const std::size_t w = cfg_.width;
    lift_w_ = &ps_.add("fno.lift_w",
                       uniform_init<S>(rng, {w, kConditioningWidth + 1}, kConditioningWidth + 1));
    lift_b_ = &ps_.add("fno.lift_b", Tensor<S>::zeros({w}));
    const double spectral_scale = 1.0 / double(w * w);
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      const std::string pre = "fno.layer" + std::to_string(l) + ".";
      Tensor<S> sw({w, w, cfg_.modes1, cfg_.modes2, 2});
      for (S& v : sw.data) v = S(rng.uniform(-spectral_scale, spectral_scale));
      spectral_.push_back(&ps_.add(pre + "spectral", std::move(sw)));
      skip_w_.push_back(&ps_.add(pre + "skip_w", uniform_init<S>(rng, {w, w}, w)));
      skip_b_.push_back(&ps_.add(pre + "skip_b", Tensor<S>::zeros({w})));
    }
    proj1_w_ = &ps_.add("fno.proj1_w", uniform_init<S>(rng, {cfg_.proj_hidden, w}, w));
    proj1_b_ = &ps_.add("fno.proj1_b", Tensor<S>::zeros({cfg_.proj_hidden}));
    proj2_w_ = &ps_.add("fno.proj2_w", uniform_init<S>(rng, {1, cfg_.proj_hidden}, cfg_.proj_hidden));
    proj2_b_ = &ps_.add("fno.proj2_b", Tensor<S>::zeros({1}));
  }

  std::string kind() const override { return "fno"; }
  nlohmann::json config_json() const override { return cfg_.to_json(); }
  const std::vector<Param<S>*>& params() const override { return ps_.params(); }
  std::size_t param_count() const override { return ps_.count_values(); }
  const FnoConfig& config() const { return cfg_; }

  ops::Var<S> forward(Tape<S>& t, const scene::Scenario& sc, const scene::InputTensor& in) {
    check_shape(in.values, {grid_.ny, grid_.nx, 4}, "fno input");
    const std::size_t ny = grid_.ny, nx = grid_.nx;
    const Tensor<S> cond = conditioning_vector<S>(sc);
    Tensor<S> x({kConditioningWidth + 1, ny, nx});
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t i = 0; i < nx; ++i) x.at3(0, j, i) = S(in.values.at3(j, i, 3));
    for (std::size_t c = 0; c < kConditioningWidth; ++c)
      for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i) x.at3(c + 1, j, i) = cond[c];

    ops::Var<S> h = ops::conv1x1(t, t.constant(std::move(x)), *lift_w_, *lift_b_);
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      ops::Var<S> spec = ops::spectral_conv2d(t, h, *spectral_[l]);
      ops::Var<S> skip = ops::conv1x1(t, h, *skip_w_[l], *skip_b_[l]);
      h = ops::add(t, spec, skip);
      if (l + 1 < cfg_.layers) h = ops::relu(t, h);
    }
    h = ops::relu(t, ops::conv1x1(t, h, *proj1_w_, *proj1_b_));
    h = ops::conv1x1(t, h, *proj2_w_, *proj2_b_);
    return ops::reshape(t, h, {ny, nx});
  }

  ops::Var<S> predict(Tape<S>& t, const data::Sample& sample) override {
    return forward(t, sample.scenario, sample.input);
  }

 private:
  FnoConfig cfg_;
  scene::GridSpec grid_;
  ParamSet<S> ps_;
  Param<S>*lift_w_, *lift_b_, *proj1_w_, *proj1_b_, *proj2_w_, *proj2_b_;
  std::vector<Param<S>*> spectral_, skip_w_, skip_b_;
};

}  // namespace bof::model
