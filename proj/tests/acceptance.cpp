// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line. Criterion 4 trains the three models at desk scale and leaves its
// dataset and checkpoints in BOF_ACCEPT_DIR for criteria 5 and 8; when run
// standalone those criteria rebuild what they need.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>
#include <fstream>

#include "bof/harness.hpp"
#include "bof/image.hpp"
#include "bof/optim.hpp"
#include "bof/threads.hpp"
#include "test_support.hpp"

using namespace bof;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

fs::path accept_dir() {
  if (const char* env = std::getenv("BOF_ACCEPT_DIR")) return fs::path(env);
  return fs::temp_directory_path() / "bof_acceptance";
}

std::string cli_path() {
  if (const char* env = std::getenv("BOF_CLI")) return env;
  return "";
}

void report(int criterion, const char* what, bool pass) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, what);
  std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  return std::string(std::istreambuf_iterator<char>(is), {});
}

double elapsed_s(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- shared desk-scale settings (criterion 4 pins n=300, 33x33, p=3) ----
constexpr std::size_t kDeskSamples = 300;
constexpr std::uint64_t kDeskSeed = 2025;
constexpr std::size_t kDeskSide = 33;

model::BlastOFormerConfig desk_bof_config() {
  model::BlastOFormerConfig c;
  c.patch_size = 3;
  c.input_embed = 32;
  c.seq_embed = 64;
  c.encoder_layers = 2;
  c.heads = 4;
  c.rff_dim = 32;
  c.model_seed = 11;
  return c;
}

model::CnnConfig desk_cnn_config() {
  model::CnnConfig c;
  c.layers = 6;
  c.base_channels = 24;
  c.model_seed = 13;
  return c;
}

model::FnoConfig desk_fno_config() {
  model::FnoConfig c;
  c.modes1 = 6;
  c.modes2 = 6;
  c.width = 16;
  c.layers = 4;
  c.proj_hidden = 64;
  c.model_seed = 17;
  return c;
}

data::Dataset desk_dataset() {
  return data::generate_dataset(kDeskSamples, kDeskSeed, scene::GridSpec::square(kDeskSide));
}

// Criterion 5 reuses criterion 4's BlastOFormer; rebuilt here when the
// fixture artifacts are absent (standalone runs).
Checkpoint desk_bof_checkpoint(const data::Dataset& ds) {
  const fs::path ck = accept_dir() / "blastoformer_desk.ckpt";
  if (fs::exists(ck)) return read_checkpoint(ck);
  model::BlastOFormer<float> m(desk_bof_config(), ds.grid);
  harness::TrainConfig tc = harness::TrainConfig::defaults_for("blastoformer");
  tc.max_epochs = 600;
  tc.seed = 7;
  const harness::TrainResult r = harness::train_model(m, ds, tc);
  const Checkpoint c = harness::make_checkpoint(m, ds.grid, tc.to_json(), ds.norm, &r.best_params);
  fs::create_directories(accept_dir());
  write_checkpoint(c, ck);
  return c;
}

int run_cli(const std::string& args, const fs::path& stdout_file = {}) {
  const std::string cli = cli_path();
  REQUIRE_MESSAGE(!cli.empty(), "BOF_CLI must point at the bof binary");
  std::string cmd = cli + " " + args;
  if (!stdout_file.empty()) cmd += " > " + stdout_file.string() + " 2>&1";
  else cmd += " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

// ---------------------------------------------------------------------------
TEST_CASE("criterion 1: gradient suite under two minutes") {
  const auto t0 = Clock::now();
  Rng64 rng(101);

  // every differentiable op, >= 20 random shapes each
  for (int it = 0; it < 20; ++it) {
    const std::size_t rows = 1 + rng.below(4), din = 1 + rng.below(5), dout = 1 + rng.below(5);
    Param<double> x("x", testsup::random_tensor(rng, {rows, din}));
    Param<double> w("w", testsup::random_tensor(rng, {din, dout}));
    Param<double> b("b", testsup::random_tensor(rng, {dout}));
    const Tensor<double> probe = testsup::random_tensor(rng, {rows, dout});
    testsup::check_param_gradients({&x, &w, &b}, [&](Tape<double>& t) {
      return ops::dot_const(t, ops::linear(t, t.leaf(x), w, b), probe);
    });
  }
  for (int it = 0; it < 20; ++it) {
    const std::size_t rows = 1 + rng.below(4), d = 2 + rng.below(8);
    Param<double> x("x", testsup::random_tensor(rng, {rows, d}));
    Param<double> g("g", testsup::random_tensor(rng, {d}, 0.5, 1.5));
    Param<double> b("b", testsup::random_tensor(rng, {d}));
    const Tensor<double> probe = testsup::random_tensor(rng, {rows, d});
    testsup::check_param_gradients({&x, &g, &b}, [&](Tape<double>& t) {
      return ops::dot_const(t, ops::layer_norm(t, t.leaf(x), g, b), probe);
    });
  }
  for (int it = 0; it < 20; ++it) {
    const std::size_t nq = 1 + rng.below(3), nk = 1 + rng.below(4);
    const std::size_t h = 1 + rng.below(2), dh = 1 + rng.below(4);
    Param<double> q("q", testsup::random_tensor(rng, {nq, h, dh}));
    Param<double> k("k", testsup::random_tensor(rng, {nk, h, dh}));
    Param<double> v("v", testsup::random_tensor(rng, {nk, h, dh}));
    const Tensor<double> probe = testsup::random_tensor(rng, {nq, h, dh});
    testsup::check_param_gradients({&q, &k, &v}, [&](Tape<double>& t) {
      return ops::dot_const(t, ops::softmax_attention(t, t.leaf(q), t.leaf(k), t.leaf(v)), probe);
    });
  }
  for (int it = 0; it < 20; ++it) {
    const std::size_t n = 1 + rng.below(4), h = 1 + rng.below(3);
    const std::size_t dh = 4 * (1 + rng.below(3));
    Param<double> x("x", testsup::random_tensor(rng, {n, h, dh}));
    const Tensor<double> pos = testsup::random_tensor(rng, {n, 2}, -4, 4);
    const Tensor<double> probe = testsup::random_tensor(rng, {n, h, dh});
    testsup::check_param_gradients({&x}, [&](Tape<double>& t) {
      return ops::dot_const(t, ops::rope_apply(t, t.leaf(x), pos), probe);
    });
  }
  for (int it = 0; it < 20; ++it) {
    const std::size_t cin = 1 + rng.below(2), cout = 1 + rng.below(2);
    const std::size_t hh = 2 + rng.below(3), ww = 2 + rng.below(3);
    Param<double> x("x", testsup::random_tensor(rng, {cin, hh, ww}));
    Param<double> k("k", testsup::random_tensor(rng, {cout, cin, 3, 3}));
    Param<double> b("b", testsup::random_tensor(rng, {cout}));
    const Tensor<double> probe = testsup::random_tensor(rng, {cout, hh, ww});
    testsup::check_param_gradients({&x, &k, &b}, [&](Tape<double>& t) {
      return ops::dot_const(t, ops::conv2d(t, t.leaf(x), k, b), probe);
    });
  }
  for (int it = 0; it < 20; ++it) {
    const std::size_t cin = 1 + rng.below(3), cout = 1 + rng.below(3);
    const std::size_t hh = 3 + rng.below(3), ww = 3 + rng.below(4);
    const std::size_t m1 = 1 + rng.below(hh), m2 = 1 + rng.below(ww / 2 + 1);
    Param<double> x("x", testsup::random_tensor(rng, {cin, hh, ww}));
    Param<double> w("w", testsup::random_tensor(rng, {cout, cin, m1, m2, 2}));
    const Tensor<double> probe = testsup::random_tensor(rng, {cout, hh, ww});
    testsup::check_param_gradients({&x, &w}, [&](Tape<double>& t) {
      return ops::dot_const(t, ops::spectral_conv2d(t, t.leaf(x), w), probe);
    });
  }

  // full models at tiny configs, 64-bit
  {
    model::BlastOFormerConfig c;
    c.patch_size = 3;
    c.input_embed = 16;
    c.seq_embed = 32;
    c.encoder_layers = 1;
    c.heads = 2;
    c.rff_dim = 8;
    c.model_seed = 5;
    const scene::GridSpec g = scene::GridSpec::square(9);
    model::BlastOFormer<double> m(c, g);
    data::Sample s;
    s.scenario = scene::sample_scenario(9);
    s.input = scene::build_model_input(s.scenario, g);
    const Tensor<double> target = testsup::random_tensor(rng, {9, 9});
    testsup::check_param_gradients(m.params(), [&](Tape<double>& t) {
      return ops::loss_l1(t, m.forward(t, s.input), target);
    });
  }
  {
    model::CnnConfig c;
    c.layers = 3;
    c.base_channels = 3;
    c.model_seed = 2;
    const scene::GridSpec g = scene::GridSpec::square(8);
    model::CnnModel<double> m(c, g);
    data::Sample s;
    s.scenario = scene::sample_scenario(12);
    s.input = scene::build_model_input(s.scenario, g);
    const Tensor<double> target = testsup::random_tensor(rng, {8, 8});
    testsup::check_param_gradients(m.params(), [&](Tape<double>& t) {
      return ops::loss_l1(t, m.forward(t, s.input), target);
    });
  }
  {
    model::FnoConfig c;
    c.width = 4;
    c.modes1 = 2;
    c.modes2 = 2;
    c.layers = 2;
    c.proj_hidden = 6;
    c.model_seed = 6;
    const scene::GridSpec g = scene::GridSpec::square(8);
    model::FnoModel<double> m(c, g);
    data::Sample s;
    s.scenario = scene::sample_scenario(16);
    s.input = scene::build_model_input(s.scenario, g);
    const Tensor<double> target = testsup::random_tensor(rng, {8, 8});
    testsup::check_param_gradients(m.params(), [&](Tape<double>& t) {
      return ops::loss_l1(t, m.predict(t, s), target);
    });
  }

  const double secs = elapsed_s(t0);
  const bool in_budget = secs < 120.0;
  CHECK(in_budget);
  report(1, "gradient suite (ops + full models, 64-bit central differences)", in_budget);
  std::printf("  runtime: %.1f s (budget 120 s)\n", secs);
}

// ---------------------------------------------------------------------------
TEST_CASE("criterion 2: oracle equivalences under one minute") {
  const auto t0 = Clock::now();
  Rng64 rng(202);
  bool all = true;

  // spectral conv vs naive DFT sum on 8x8, tol 1e-9
  {
    Param<double> w("w", testsup::random_tensor(rng, {3, 2, 3, 3, 2}));
    const Tensor<double> x = testsup::random_tensor(rng, {2, 8, 8});
    Tape<double> t;
    const double diff = testsup::max_abs_diff(
        ops::spectral_conv2d(t, t.constant(x), w)->value, testsup::spectral_oracle(x, w.value, 3, 3));
    all = all && diff < 1e-9;
    CHECK(diff < 1e-9);
  }
  // conv2d, linear, attention vs loop oracles, tol 1e-12
  for (int it = 0; it < 5; ++it) {
    Param<double> k("k", testsup::random_tensor(rng, {2, 3, 3, 3}));
    Param<double> b("b", testsup::random_tensor(rng, {2}));
    const Tensor<double> x = testsup::random_tensor(rng, {3, 6, 5});
    Tape<double> t;
    const double diff = testsup::max_abs_diff(ops::conv2d(t, t.constant(x), k, b)->value,
                                              testsup::conv2d_oracle(x, k.value, b.value));
    all = all && diff < 1e-12;
    CHECK(diff < 1e-12);
  }
  for (int it = 0; it < 5; ++it) {
    Param<double> w("w", testsup::random_tensor(rng, {7, 4}));
    Param<double> b("b", testsup::random_tensor(rng, {4}));
    const Tensor<double> x = testsup::random_tensor(rng, {6, 7});
    Tape<double> t;
    const double diff = testsup::max_abs_diff(ops::linear(t, t.constant(x), w, b)->value,
                                              testsup::linear_oracle(x, w.value, b.value));
    all = all && diff < 1e-12;
    CHECK(diff < 1e-12);
  }
  for (int it = 0; it < 5; ++it) {
    const Tensor<double> q = testsup::random_tensor(rng, {4, 2, 6});
    const Tensor<double> k = testsup::random_tensor(rng, {5, 2, 6});
    const Tensor<double> v = testsup::random_tensor(rng, {5, 2, 6});
    Tape<double> t;
    const double diff = testsup::max_abs_diff(
        ops::softmax_attention(t, t.constant(q), t.constant(k), t.constant(v))->value,
        testsup::attention_oracle(q, k, v));
    all = all && diff < 1e-12;
    CHECK(diff < 1e-12);
  }
  // metrics vs naive loops, tol 1e-12
  {
    scene::Field p({4, 5}), tr({4, 5});
    for (std::size_t i = 0; i < 20; ++i) {
      p[i] = float(rng.uniform(-3, 3));
      tr[i] = float(rng.uniform(1, 4));
    }
    double mae = 0, mape = 0, mean = 0;
    for (std::size_t i = 0; i < 20; ++i) mean += double(tr[i]) / 20;
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < 20; ++i) {
      mae += std::abs(double(p[i]) - double(tr[i])) / 20;
      mape += std::abs(double(p[i]) - double(tr[i])) / std::abs(double(tr[i])) / 20 * 100;
      ss_res += (double(p[i]) - double(tr[i])) * (double(p[i]) - double(tr[i]));
      ss_tot += (double(tr[i]) - mean) * (double(tr[i]) - mean);
    }
    const bool ok = std::abs(harness::metric_mae({p}, {tr}) - mae) < 1e-12 &&
                    std::abs(harness::metric_mape({p}, {tr}) - mape) < 1e-12 &&
                    std::abs(harness::metric_r2({p}, {tr}) - (1 - ss_res / ss_tot)) < 1e-12;
    all = all && ok;
    CHECK(ok);
  }
  // box SDF vs boundary sampling at 1e5 random points, tol 1e-3 m
  {
    std::size_t bad = 0;
    for (int it = 0; it < 100000; ++it) {
      const scene::Scenario s = scene::sample_scenario(rng.next_u64() % 100000);
      const scene::Obstacle& o = s.obstacles[rng.below(3)];
      const double px = rng.uniform(-5.5, 5.5), py = rng.uniform(-5.5, 5.5);
      const double got = scene::box_sdf_footprint(px, py, o);
      if (o.footprint_contains(px, py)) {
        if (got != -1.0) ++bad;
        continue;
      }
      // two-pass boundary sampling: coarse scan plus local refinement
      const double per = 2.0 * ((o.x_max - o.x_min) + (o.y_max - o.y_min));
      auto bd = [&](double sarc) {
        sarc = std::fmod(std::fmod(sarc, per) + per, per);
        double bx, by;
        if (sarc < o.x_max - o.x_min) {
          bx = o.x_min + sarc;
          by = o.y_min;
        } else if ((sarc -= o.x_max - o.x_min) < o.y_max - o.y_min) {
          bx = o.x_max;
          by = o.y_min + sarc;
        } else if ((sarc -= o.y_max - o.y_min) < o.x_max - o.x_min) {
          bx = o.x_max - sarc;
          by = o.y_max;
        } else {
          sarc -= o.x_max - o.x_min;
          bx = o.x_min;
          by = o.y_max - sarc;
        }
        return std::hypot(px - bx, py - by);
      };
      double best = 1e300, best_s = 0;
      const std::size_t coarse = 1500;
      for (std::size_t i = 0; i < coarse; ++i) {
        const double d = bd(per * double(i) / double(coarse));
        if (d < best) {
          best = d;
          best_s = per * double(i) / double(coarse);
        }
      }
      const double step = per / double(coarse);
      for (int i = 0; i <= 3000; ++i)
        best = std::min(best, bd(best_s - step + 2 * step * double(i) / 3000.0));
      if (std::abs(got - best) >= 1e-3) ++bad;
    }
    all = all && bad == 0;
    CHECK(bad == 0);
  }

  const double secs = elapsed_s(t0);
  const bool in_budget = secs < 60.0;
  CHECK(in_budget);
  all = all && in_budget;
  report(2, "oracle equivalences (spectral DFT, loop oracles, SDF sampling)", all);
  std::printf("  runtime: %.1f s (budget 60 s)\n", secs);
}

// ---------------------------------------------------------------------------
TEST_CASE("criterion 3: structural laws") {
  bool all = true;
  // token count law on the 99x99 grid
  {
    const scene::GridSpec g;
    for (std::size_t p : {1, 3, 9, 11}) {
      model::BlastOFormerConfig c;
      c.patch_size = p;
      c.input_embed = 8;
      c.seq_embed = 16;
      c.encoder_layers = 1;
      c.heads = 2;
      c.rff_dim = 4;
      model::BlastOFormer<double> m(c, g);
      const bool ok = m.token_count() == 9801 / (p * p);
      all = all && ok;
      CHECK(ok);
    }
  }
  // patchify / depatchify identity round trip under identity projections
  {
    Rng64 rng(303);
    for (std::size_t p : {1, 3}) {
      Tensor<double> grid = testsup::random_tensor(rng, {9, 9, 1});
      Tape<double> t;
      ops::Var<double> tok = ops::gather_patches(t, t.constant(grid), p);
      ops::Var<double> back = ops::scatter_patches(t, tok, p, 9, 9);
      const Tensor<double> flat({9, 9}, grid.data);
      const bool ok = testsup::max_abs_diff(back->value, flat) == 0.0;
      all = all && ok;
      CHECK(ok);
    }
  }
  // RoPE norm preservation and relative-offset identity, tol 1e-9
  {
    Rng64 rng(304);
    for (int it = 0; it < 50; ++it) {
      const Tensor<double> x = testsup::random_tensor(rng, {2, 2, 16});
      Tensor<double> pos = testsup::random_tensor(rng, {2, 2}, -5, 5);
      Tape<double> t;
      ops::Var<double> y = ops::rope_apply(t, t.constant(x), pos);
      double nx = 0, ny = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        nx += x[i] * x[i];
        ny += y->value[i] * y->value[i];
      }
      bool ok = std::abs(std::sqrt(nx) - std::sqrt(ny)) < 1e-9;

      const double dx = rng.uniform(-3, 3), dy = rng.uniform(-3, 3);
      Tensor<double> shifted = pos;
      for (std::size_t i = 0; i < 2; ++i) {
        shifted.at2(i, 0) += dx;
        shifted.at2(i, 1) += dy;
      }
      auto dot_of = [&](const Tensor<double>& p) {
        Tape<double> tt;
        ops::Var<double> r = ops::rope_apply(tt, tt.constant(x), p);
        double acc = 0;
        for (std::size_t d = 0; d < 16; ++d)
          acc += r->value.at3(0, 0, d) * r->value.at3(1, 0, d);
        return acc;
      };
      ok = ok && std::abs(dot_of(pos) - dot_of(shifted)) < 1e-9;
      all = all && ok;
      CHECK(ok);
    }
  }
  // encoder permutation equivariance, tol 1e-6
  {
    const scene::GridSpec g = scene::GridSpec::square(10);
    model::BlastOFormerConfig c;
    c.patch_size = 2;
    c.input_embed = 16;
    c.seq_embed = 32;
    c.encoder_layers = 2;
    c.heads = 2;
    c.rff_dim = 8;
    c.model_seed = 21;
    model::BlastOFormer<double> m(c, g);
    data::Sample s;
    s.scenario = scene::sample_scenario(31);
    s.input = scene::build_model_input(s.scenario, g);

    Tape<double> t;
    auto [vtok, ptok] = m.patchify(t, s.input);
    const Tensor<double> pos = m.patch_center_positions();
    ops::Var<double> z = m.encode(t, vtok, ptok, pos);
    const std::size_t n = vtok->value.dim(0);
    auto rot = [n](const Tensor<double>& src, std::size_t k) {
      Tensor<double> out(src.shape);
      const std::size_t w = src.size() / n;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < w; ++j)
          out.data[((i + k) % n) * w + j] = src.data[i * w + j];
      return out;
    };
    Tape<double> t2;
    ops::Var<double> z2 = m.encode(t2, t2.constant(rot(vtok->value, 11)),
                                   t2.constant(rot(ptok->value, 11)), rot(pos, 11));
    const bool ok = testsup::max_abs_diff(z2->value, rot(z->value, 11)) < 1e-6;
    all = all && ok;
    CHECK(ok);
  }
  report(3, "structural laws (token count, round trip, RoPE, equivariance)", all);
}

// ---------------------------------------------------------------------------
TEST_CASE("criterion 4: desk-scale learning across all three models") {
  const auto t0 = Clock::now();
  fs::create_directories(accept_dir());
  const data::Dataset ds = desk_dataset();
  data::write_dataset(ds, accept_dir() / "desk_dataset");

  struct Run {
    const char* kind;
    double r2_log;
    harness::MetricsReport rep;
  };
  std::vector<Run> runs;
  std::vector<harness::MetricsReport> reports;

  auto train_and_eval = [&](const std::string& kind, auto config, std::size_t max_epochs,
                            std::uint64_t seed) {
    auto m = harness::build_model(kind, config.to_json(), ds.grid);
    harness::TrainConfig tc = harness::TrainConfig::defaults_for(kind);
    tc.max_epochs = max_epochs;  // capped at 3000 per the criterion
    tc.seed = seed;
    REQUIRE(tc.max_epochs <= 3000);
    const harness::TrainResult r = harness::train_model(*m, ds, tc);
    const Checkpoint c =
        harness::make_checkpoint(*m, ds.grid, tc.to_json(), ds.norm, &r.best_params);
    write_checkpoint(c, accept_dir() / (kind + "_desk.ckpt"));
    std::ofstream hist(accept_dir() / (kind + "_desk.history.csv"));
    hist << harness::history_csv(r.history);
    harness::MetricsReport rep = harness::evaluate(c, ds, data::Split::test);
    std::printf("  %s: %zu epochs (best val %.4f at %zu), test log R2 %.4f, unscaled R2 %.4f\n",
                kind.c_str(), r.history.size(), r.best_val, r.best_epoch, rep.r2_log,
                rep.r2_unscaled);
    std::fflush(stdout);
    runs.push_back({kind == "blastoformer" ? "blastoformer" : kind == "fno" ? "fno" : "cnn",
                    rep.r2_log, rep});
    reports.push_back(rep);
  };

  train_and_eval("blastoformer", desk_bof_config(), 600, 7);
  train_and_eval("fno", desk_fno_config(), 600, 7);
  train_and_eval("cnn", desk_cnn_config(), 400, 7);

  bool all = true;
  for (const Run& r : runs) {
    const double bar = std::string(r.kind) == "blastoformer" ? 0.90 : 0.80;
    const bool ok = r.r2_log >= bar;
    std::printf("  %s test log R2 %.4f (required >= %.2f) %s\n", r.kind, r.r2_log, bar,
                ok ? "ok" : "MISS");
    all = all && ok;
    CHECK(ok);
  }

  const std::string table = harness::comparison_table(reports);
  std::ofstream(accept_dir() / "comparison_table.txt") << table;
  std::printf("%s", table.c_str());
  std::printf("  (ordering vs the published table is reported, not asserted; published "
              "best unscaled R2 is BlastOFormer)\n");

  const double secs = elapsed_s(t0);
  const bool in_budget = secs < 7200.0;
  CHECK(in_budget);
  all = all && in_budget;
  report(4, "desk-scale learning (BlastOFormer >= 0.90, baselines >= 0.80, <= 2 h)", all);
  std::printf("  wall time: %.0f s (budget 7200 s)\n", secs);
}

// ---------------------------------------------------------------------------
TEST_CASE("criterion 5: unscaler non-degradation and single-pair overfit") {
  const data::Dataset ds = desk_dataset();
  const Checkpoint ck = desk_bof_checkpoint(ds);
  harness::LoadedModel lm = harness::load_model(ck);

  // log predictions for every sample
  std::vector<scene::Field> log_pred(ds.samples.size()), pa_truth(ds.samples.size());
  parallel_for(ds.samples.size(), [&](std::size_t i) {
    log_pred[i] = harness::predict_log_field(*lm.model, lm.norm, ds.samples[i]);
    pa_truth[i] = ds.samples[i].pressure;
  });

  model::UnscalerConfig uc;  // full 1-32-64-128-64-32-1 widths
  uc.model_seed = 23;
  model::UnscalerCnn<float> u(uc);
  harness::UnscalerTrainConfig utc;
  utc.lr = 1e-3;
  utc.max_epochs = 60;
  utc.early_stop_patience = 60;
  utc.batch_size = 8;
  utc.seed = 5;
  const harness::TrainResult tr = harness::train_unscaler(
      u, log_pred, pa_truth, ds.indices_of(data::Split::train), ds.indices_of(data::Split::val),
      utc);
  std::printf("  unscaler: %zu epochs, best val MSE %.6g at %zu\n", tr.history.size(),
              tr.best_val, tr.best_epoch);

  const std::vector<std::size_t> test_idx = ds.indices_of(data::Split::test);
  std::vector<scene::Field> exp_pred, un_pred, truth;
  for (std::size_t i : test_idx) {
    exp_pred.push_back(data::unlog(log_pred[i]));
    un_pred.push_back(u.forward(log_pred[i]));
    truth.push_back(pa_truth[i]);
  }
  const double mape_exp = harness::metric_mape(exp_pred, truth);
  const double mape_un = harness::metric_mape(un_pred, truth);
  std::printf("  test unscaled MAPE: plain exponentiation %.4f%%, unscaler %.4f%%\n", mape_exp,
              mape_un);
  const bool non_degrading = mape_un <= mape_exp;
  CHECK(non_degrading);

  // single-pair overfit at the published widths: relative MSE < 1e-2 within
  // 2000 steps
  model::UnscalerCnn<float> solo(model::UnscalerConfig{{32, 64, 128, 64, 32}, 31});
  const scene::GridSpec g9 = scene::GridSpec::square(9);
  const scene::Scenario sc = scene::sample_scenario(77);
  const scene::Field pa = data::oracle_pressure(sc, g9);
  const double rel = harness::unscaler_overfit_pair(solo, data::log_transform(pa), pa, 2000, 1e-3);
  std::printf("  single-pair overfit relative MSE: %.3g (required < 1e-2)\n", rel);
  const bool overfit_ok = rel < 1e-2;
  CHECK(overfit_ok);

  report(5, "unscaler (MAPE non-degradation, single-pair overfit)", non_degrading && overfit_ok);
}

// ---------------------------------------------------------------------------
TEST_CASE("criterion 6: dataset pipeline at n=1500") {
  const scene::GridSpec g = scene::GridSpec::square(9);
  const data::Dataset ds = data::generate_dataset(1500, 99, g);
  std::size_t train = 0, val = 0, test = 0;
  for (data::Split s : ds.split) {
    if (s == data::Split::train) ++train;
    if (s == data::Split::val) ++val;
    if (s == data::Split::test) ++test;
  }
  const bool sizes_ok = train == 1100 && val == 200 && test == 200;
  CHECK(sizes_ok);

  // bit-exact serialization round trip
  const fs::path dir = accept_dir() / "c6";
  fs::remove_all(dir);
  fs::create_directories(dir);
  data::write_sample(ds.samples[7], dir / "s.bin");
  const data::Sample back = data::read_sample(dir / "s.bin");
  data::write_sample(back, dir / "s2.bin");
  const bool roundtrip_ok = slurp(dir / "s.bin") == slurp(dir / "s2.bin") &&
                            back.pressure.data == ds.samples[7].pressure.data &&
                            back.input.values.data == ds.samples[7].input.values.data;
  CHECK(roundtrip_ok);

  // identical seeds produce byte-identical dataset directories
  const data::Dataset ds_a = data::generate_dataset(40, 123, g);
  const data::Dataset ds_b = data::generate_dataset(40, 123, g);
  data::write_dataset(ds_a, dir / "a");
  data::write_dataset(ds_b, dir / "b");
  bool bytes_ok = true;
  for (const auto& entry : fs::directory_iterator(dir / "a")) {
    const fs::path rel = entry.path().filename();
    bytes_ok = bytes_ok && slurp(dir / "a" / rel) == slurp(dir / "b" / rel);
  }
  CHECK(bytes_ok);

  fs::remove_all(dir);
  report(6, "dataset pipeline (1100/200/200 split, bit-exact io, seed determinism)",
         sizes_ok && roundtrip_ok && bytes_ok);
}

// ---------------------------------------------------------------------------
TEST_CASE("criterion 7: probe ingestion, including the paper-scale grid") {
  Rng64 rng(707);
  bool all = true;

  // 99x99: 9801 probes parse to exact per-probe maxima
  {
    const scene::GridSpec g;  // paper grid
    scene::Field target({g.ny, g.nx});
    for (float& v : target.data) v = float(rng.uniform(1e5, 1e7));
    std::vector<std::vector<double>> rows(3, std::vector<double>(g.nx * g.ny));
    for (std::size_t k = 0; k < g.nx * g.ny; ++k) {
      rows[0][k] = double(target.data[k]) * 0.5;
      rows[1][k] = double(target.data[k]);
      rows[2][k] = double(target.data[k]) * 0.75;
    }
    const fs::path dir = accept_dir() / "c7";
    fs::create_directories(dir);
    data::write_probe_file(dir / "probes99.txt", g, {1e-7, 2e-7, 3e-7}, rows);
    const scene::Field parsed = data::parse_probe_file(slurp(dir / "probes99.txt"), g);
    const bool ok = parsed.data == target.data;
    all = all && ok;
    CHECK(ok);
    fs::remove_all(dir);
  }
  // malformed inputs raise the specified errors
  {
    scene::GridSpec g;
    g.nx = g.ny = 2;
    g.x0 = g.y0 = 0;
    g.dx = g.dy = 1;
    const std::string header =
        "# Probe 0 (0 0 1)\n# Probe 1 (1 0 1)\n# Probe 2 (0 1 1)\n# Probe 3 (1 1 1)\n"
        "# Time p0 p1 p2 p3\n";
    bool ok = true;
    try {
      data::parse_probe_file(header, g);
      ok = false;
    } catch (const DataError&) {
    }
    try {
      data::parse_probe_file(header + "0 1 2 3\n", g);  // short row
      ok = false;
    } catch (const DataError&) {
    }
    try {
      data::parse_probe_file(header + "0 1 2 x 4\n", g);  // non-numeric
      ok = false;
    } catch (const DataError&) {
    }
    try {
      data::parse_probe_file("# Probe 0 (0 0 1)\n# Time p0\n0 1\n", g);  // count mismatch
      ok = false;
    } catch (const DataError&) {
    }
    try {
      data::parse_probe_file(
          "# Probe 0 (0.5 0 1)\n# Probe 1 (1 0 1)\n# Probe 2 (0 1 1)\n# Probe 3 (1 1 1)\n"
          "# Time p0 p1 p2 p3\n0 1 2 3 4\n",
          g);  // off-lattice
      ok = false;
    } catch (const DataError&) {
    }
    all = all && ok;
    CHECK(ok);
  }
  report(7, "probe ingestion (9801-probe maxima, malformed-input errors)", all);
}

// ---------------------------------------------------------------------------
TEST_CASE("criterion 8: CLI determinism and latency ordering") {
  const fs::path dir = accept_dir() / "c8";
  fs::remove_all(dir);
  fs::create_directories(dir);
  bool all = true;

  // gen-data determinism
  all = all && run_cli("gen-data --n 16 --seed 4 --grid-side 9 --out " + (dir / "d1").string()) == 0;
  all = all && run_cli("gen-data --n 16 --seed 4 --grid-side 9 --out " + (dir / "d2").string()) == 0;
  for (const auto& e : fs::directory_iterator(dir / "d1"))
    all = all && slurp(e.path()) == slurp(dir / "d2" / e.path().filename());
  CHECK(all);

  // gen-cases determinism
  all = all && run_cli("gen-cases --n 2 --seed 9 --out " + (dir / "k1").string()) == 0;
  all = all && run_cli("gen-cases --n 2 --seed 9 --out " + (dir / "k2").string()) == 0;
  for (const char* rel : {"case_0000/scenario.json", "case_0001/system/probes",
                          "case_0001/constant/phaseProperties"})
    all = all && slurp(dir / "k1" / rel) == slurp(dir / "k2" / rel);
  CHECK(all);

  // train determinism (checkpoint and history bytes)
  {
    std::ofstream cfg(dir / "tiny.json");
    cfg << R"({"train": {"max_epochs": 5, "early_stop_patience": 5, "lr": 1e-3, "batch_size": 4,
                "seed": 3},
       "model": {"patch_size": 3, "input_embed": 16, "seq_embed": 32, "encoder_layers": 1,
                "heads": 2, "rff_dim": 8, "model_seed": 2}})";
    cfg.close();
    const std::string base = " --model blastoformer --data " + (dir / "d1").string() +
                             " --config " + (dir / "tiny.json").string();
    all = all && run_cli("train" + base + " --out " + (dir / "m1.ckpt").string()) == 0;
    all = all && run_cli("train" + base + " --out " + (dir / "m2.ckpt").string()) == 0;
    all = all && slurp(dir / "m1.ckpt") == slurp(dir / "m2.ckpt");
    all = all && slurp(dir / "m1.ckpt.history.csv") == slurp(dir / "m2.ckpt.history.csv");
    CHECK(all);
  }

  // eval reports: byte-identical up to the measured inference_ms field
  {
    const std::string base = "eval --checkpoint " + (dir / "m1.ckpt").string() + " --data " +
                             (dir / "d1").string() + " --split test --report ";
    all = all && run_cli(base + (dir / "r1.json").string()) == 0;
    all = all && run_cli(base + (dir / "r2.json").string()) == 0;
    nlohmann::json r1 = nlohmann::json::parse(slurp(dir / "r1.json"));
    nlohmann::json r2 = nlohmann::json::parse(slurp(dir / "r2.json"));
    const bool timing_ok = r1.at("inference_ms").get<double>() > 0 &&
                           r2.at("inference_ms").get<double>() > 0;
    r1.erase("inference_ms");
    r2.erase("inference_ms");
    all = all && timing_ok && r1.dump() == r2.dump();
    CHECK(all);
  }

  // predict and plot: field, image, and replotted image bytes
  {
    const std::string sc = (dir / "k1" / "case_0000" / "scenario.json").string();
    const std::string base = "predict --checkpoint " + (dir / "m1.ckpt").string() +
                             " --scenario " + sc;
    all = all && run_cli(base + " --out-field " + (dir / "f1.bin").string() + " --out-image " +
                         (dir / "f1.ppm").string()) == 0;
    all = all && run_cli(base + " --out-field " + (dir / "f2.bin").string() + " --out-image " +
                         (dir / "f2.ppm").string()) == 0;
    all = all && slurp(dir / "f1.bin") == slurp(dir / "f2.bin");
    all = all && slurp(dir / "f1.ppm") == slurp(dir / "f2.ppm");
    all = all && run_cli("plot --field " + (dir / "f1.bin").string() + " --colormap binary --out " +
                         (dir / "p1.ppm").string()) == 0;
    all = all && run_cli("plot --field " + (dir / "f1.bin").string() + " --colormap binary --out " +
                         (dir / "p2.ppm").string()) == 0;
    all = all && slurp(dir / "p1.ppm") == slurp(dir / "p2.ppm");
    CHECK(all);
  }

  // parse-probes determinism
  {
    const scene::GridSpec g = scene::GridSpec::square(9);
    scene::Field f({9, 9});
    Rng64 rng(11);
    for (float& v : f.data) v = float(rng.uniform(1e5, 1e6));
    std::vector<std::vector<double>> rows(2, std::vector<double>(81));
    for (std::size_t k = 0; k < 81; ++k) {
      rows[0][k] = double(f.data[k]);
      rows[1][k] = double(f.data[k]) - 5.0;
    }
    data::write_probe_file(dir / "pr.txt", g, {1e-7, 2e-7}, rows);
    const std::string base = "parse-probes --file " + (dir / "pr.txt").string() +
                             " --grid-side 9 --out ";
    all = all && run_cli(base + (dir / "pf1.bin").string()) == 0;
    all = all && run_cli(base + (dir / "pf2.bin").string()) == 0;
    all = all && slurp(dir / "pf1.bin") == slurp(dir / "pf2.bin");
    CHECK(all);
  }

  // exit codes: usage error 2, data error 3
  all = all && run_cli("train --model nosuch --data x --out y") == 2;
  all = all && run_cli("eval --checkpoint missing.ckpt --data " + (dir / "d1").string() +
                       " --split test --report " + (dir / "rx.json").string()) == 3;
  CHECK(all);

  // bench: positive medians, CNN < BlastOFormer at patch 1 on a shared grid
  {
    const scene::GridSpec g = scene::GridSpec::square(33);
    model::BlastOFormerConfig bc = desk_bof_config();
    bc.patch_size = 1;  // 1089 tokens: attention is quadratic in tokens
    model::BlastOFormer<float> bm(bc, g);
    model::CnnModel<float> cm(desk_cnn_config(), g);
    data::NormStats norm;
    norm.fitted = true;
    write_checkpoint(harness::make_checkpoint(bm, g, {}, norm), dir / "b_p1.ckpt");
    write_checkpoint(harness::make_checkpoint(cm, g, {}, norm), dir / "c_p1.ckpt");

    const double blast_ms =
        harness::benchmark_inference(read_checkpoint(dir / "b_p1.ckpt"), g, 11);
    // repeated medians stay stable (coefficient of variation under 50%)
    double cnn_sum = 0, cnn_sq = 0;
    double cnn_ms = 0;
    for (int rep = 0; rep < 3; ++rep) {
      cnn_ms = harness::benchmark_inference(read_checkpoint(dir / "c_p1.ckpt"), g, 11);
      cnn_sum += cnn_ms;
      cnn_sq += cnn_ms * cnn_ms;
    }
    const double cnn_mean = cnn_sum / 3;
    const double cnn_cv = std::sqrt(std::max(cnn_sq / 3 - cnn_mean * cnn_mean, 0.0)) / cnn_mean;
    std::printf("  bench at patch 1, 33x33: cnn %.3f ms (cv %.0f%%) vs blastoformer %.3f ms "
                "(published ordering 1.4 < 6.4 ms)\n",
                cnn_mean, cnn_cv * 100, blast_ms);
    const bool order_ok =
        cnn_mean > 0 && blast_ms > 0 && cnn_mean < blast_ms && cnn_cv < 0.5;
    all = all && order_ok;
    CHECK(order_ok);

    // the CLI path reports the same measurement
    all = all && run_cli("bench --checkpoint " + (dir / "c_p1.ckpt").string() + " --runs 11",
                         dir / "bench.txt") == 0;
    all = all && slurp(dir / "bench.txt").find("median single-forward latency") != std::string::npos;
    CHECK(all);
  }

  fs::remove_all(dir);
  report(8, "CLI determinism, exit codes, and latency ordering", all);
}
