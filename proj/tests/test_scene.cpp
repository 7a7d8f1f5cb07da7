#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>

#include "bof/error.hpp"
#include "bof/rng.hpp"
#include "bof/scene.hpp"

using namespace bof;
using namespace bof::scene;

namespace {

// Brute-force boundary sampling: min distance to the rectangle outline,
// refined around the coarse minimum so the bound holds even next to a wall.
double sdf_boundary_oracle(double px, double py, const Obstacle& o, std::size_t samples) {
  if (o.footprint_contains(px, py)) return -1.0;
  const double per = 2.0 * ((o.x_max - o.x_min) + (o.y_max - o.y_min));
  auto at = [&](double s) {
    s = std::fmod(std::fmod(s, per) + per, per);
    double bx, by;
    if (s < o.x_max - o.x_min) {
      bx = o.x_min + s;
      by = o.y_min;
    } else if ((s -= o.x_max - o.x_min) < o.y_max - o.y_min) {
      bx = o.x_max;
      by = o.y_min + s;
    } else if ((s -= o.y_max - o.y_min) < o.x_max - o.x_min) {
      bx = o.x_max - s;
      by = o.y_max;
    } else {
      s -= o.x_max - o.x_min;
      bx = o.x_min;
      by = o.y_max - s;
    }
    return std::hypot(px - bx, py - by);
  };
  double best = 1e300, best_s = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double s = per * double(i) / double(samples);
    const double d = at(s);
    if (d < best) {
      best = d;
      best_s = s;
    }
  }
  const double step = per / double(samples);
  for (std::size_t i = 0; i < 2 * samples; ++i) {
    const double s = best_s - step + 2.0 * step * double(i) / double(2 * samples);
    best = std::min(best, at(s));
  }
  return best;
}

bool scenario_equal(const Scenario& a, const Scenario& b) {
  if (a.seed != b.seed || std::memcmp(&a.charge, &b.charge, sizeof(Charge)) != 0) return false;
  for (int k = 0; k < 3; ++k)
    if (std::memcmp(&a.obstacles[k], &b.obstacles[k], sizeof(Obstacle)) != 0) return false;
  return true;
}

}  // namespace

TEST_CASE("sample_scenario: equal seeds give bitwise-identical scenarios") {
  CHECK(scenario_equal(sample_scenario(7), sample_scenario(7)));
  CHECK_FALSE(scenario_equal(sample_scenario(7), sample_scenario(8)));
}

TEST_CASE("sample_scenario: every field stays inside its sampling window") {
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const Scenario s = sample_scenario(seed);
    CHECK(s.obstacles[0].x_min >= -4.9);
    CHECK(s.obstacles[0].x_min <= -4.5);
    CHECK(s.obstacles[0].x_max >= -2.5);
    CHECK(s.obstacles[0].x_max <= 2.25);
    CHECK(s.obstacles[1].x_min >= -2.0);
    CHECK(s.obstacles[1].x_min <= -1.9);
    CHECK(s.obstacles[1].x_max >= 1.0);
    CHECK(s.obstacles[1].x_max <= 1.5);
    CHECK(s.obstacles[2].x_min >= 1.5);
    CHECK(s.obstacles[2].x_min <= 2.5);
    CHECK(s.obstacles[2].x_max >= 4.5);
    CHECK(s.obstacles[2].x_max <= 4.9);
    const double y_min = s.obstacles[0].y_min;
    const double h_y = s.obstacles[0].y_max - y_min;
    CHECK(y_min >= 2.0);
    CHECK(y_min <= 3.0);
    CHECK(h_y >= 0.5);
    CHECK(h_y <= 1.0);
    for (const Obstacle& o : s.obstacles) {
      CHECK(o.x_min < o.x_max);
      CHECK(o.y_min == y_min);
      CHECK(o.y_max == s.obstacles[0].y_max);
      CHECK(o.z_min == 0.0);
      CHECK(o.z_max >= 0.5);
      CHECK(o.z_max <= 2.0);
    }
    CHECK(s.charge.mass >= 5.0);
    CHECK(s.charge.mass <= 50.0);
    CHECK(s.charge.x >= -4.9);
    CHECK(s.charge.x <= 4.9);
    CHECK(s.charge.y >= -4.9);
    CHECK(s.charge.y <= 2.0);
  }
}

TEST_CASE("sample_scenario: the charge never lands inside a footprint") {
  for (std::uint64_t seed = 5000; seed < 6000; ++seed) {
    const Scenario s = sample_scenario(seed);
    for (const Obstacle& o : s.obstacles)
      CHECK_FALSE(o.footprint_contains(s.charge.x, s.charge.y));
  }
}

TEST_CASE("box_sdf_footprint: interior and boundary points report -1") {
  Obstacle o{0, 1, 0, 1, 0, 1};
  CHECK(box_sdf_footprint(0.5, 0.5, o) == -1.0);
  CHECK(box_sdf_footprint(0.0, 0.5, o) == -1.0);  // boundary treated as interior
  CHECK(box_sdf_footprint(1.0, 1.0, o) == -1.0);
}

TEST_CASE("box_sdf_footprint: axis-aligned and diagonal distances") {
  Obstacle o{0, 1, 0, 1, 0, 1};
  CHECK(box_sdf_footprint(2.0, 0.5, o) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(box_sdf_footprint(2.0, 2.0, o) == doctest::Approx(1.4142135623730951).epsilon(1e-9));
  CHECK(std::abs(box_sdf_footprint(2.0, 2.0, o) - sdf_boundary_oracle(2.0, 2.0, o, 1000000)) <
        1e-3);
}

TEST_CASE("box_sdf_footprint: agrees with boundary sampling at random points") {
  Rng64 rng(99);
  for (int it = 0; it < 20000; ++it) {
    const Scenario s = sample_scenario(rng.next_u64() % 100000);
    const Obstacle& o = s.obstacles[rng.below(3)];
    const double px = rng.uniform(-5.5, 5.5), py = rng.uniform(-5.5, 5.5);
    const double got = box_sdf_footprint(px, py, o);
    const double want = sdf_boundary_oracle(px, py, o, 4000);
    if (want < 0)
      CHECK(got == -1.0);
    else
      CHECK(std::abs(got - want) < 1e-3);
  }
}

TEST_CASE("obstacle_sdf_field: footprint cells carry -1, the rest are positive") {
  const Scenario s = sample_scenario(42);
  const GridSpec g;
  for (std::size_t k = 0; k < 3; ++k) {
    const Field f = obstacle_sdf_field(s, g, k);
    float mn = 1e30f, mx = -1e30f;
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i < g.nx; ++i) {
        const bool inside = s.obstacles[k].footprint_contains(g.x_at(i), g.y_at(j));
        if (inside)
          CHECK(f.at2(j, i) == -1.0f);
        else
          CHECK(f.at2(j, i) > 0.0f);
        mn = std::min(mn, f.at2(j, i));
        mx = std::max(mx, f.at2(j, i));
      }
    CHECK(mn == -1.0f);
    CHECK(mx <= 13.86f);  // domain diagonal bound
  }
}

TEST_CASE("obstacle_sdf_field: hand-placed footprint distance") {
  Scenario s = sample_scenario(0);
  s.obstacles[0] = {-4.9, -2.5, 2.0, 2.5, 0.0, 1.0};
  const GridSpec g;
  // grid point (-3.9, 0.0): inside the x-range, 2.0 below the footprint
  const Field f = obstacle_sdf_field(s, g, 0);
  const std::size_t i = 10, j = 49;
  CHECK(g.x_at(i) == doctest::Approx(-3.9).epsilon(1e-12));
  CHECK(g.y_at(j) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f.at2(j, i) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("obstacle_sdf_field: invalid index throws") {
  const Scenario s = sample_scenario(1);
  CHECK_THROWS_AS(obstacle_sdf_field(s, GridSpec{}, 3), std::out_of_range);
}

TEST_CASE("charge_field: clamp, inverse law, and mass linearity") {
  Scenario s = sample_scenario(0);
  s.charge = {0.0, 0.0, 10.0};
  GridSpec g = GridSpec::square(21);  // includes (0, 0) exactly
  const Field f = charge_field(s, g);
  float peak = 0;
  for (float v : f.data) peak = std::max(peak, v);
  CHECK(peak == doctest::Approx(200.0).epsilon(1e-6));  // 10 / 0.05 at the charge

  Scenario far = s;
  far.charge = {-4.9, -4.9, 10.0};
  const GridSpec gd;
  const Field fd = charge_field(far, gd);
  // probe exactly 2 m away along x
  CHECK(fd.at2(0, 20) == doctest::Approx(5.0).epsilon(1e-6));

  Scenario dbl = s;
  dbl.charge.mass = 20.0;
  const Field f2 = charge_field(dbl, g);
  for (std::size_t i = 0; i < f.size(); ++i)
    CHECK(f2[i] == doctest::Approx(2.0f * f[i]).epsilon(1e-6));
}

TEST_CASE("charge_field: non-increasing along rays past the clamp radius") {
  const Scenario s = sample_scenario(77);
  const GridSpec g;
  const Field f = charge_field(s, g);
  // walk rows away from the charge in x
  for (std::size_t j = 0; j < g.ny; j += 7) {
    float prev = -1;
    for (std::size_t i = 0; i < g.nx; ++i) {
      const double d = std::hypot(g.x_at(i) - s.charge.x, g.y_at(j) - s.charge.y);
      if (g.x_at(i) <= s.charge.x || d < kChargeEps) {
        prev = -1;
        continue;
      }
      if (prev >= 0) CHECK(f.at2(j, i) <= prev + 1e-6f);
      prev = f.at2(j, i);
    }
  }
}

TEST_CASE("build_model_input: shapes, corner coordinates, and purity") {
  const Scenario s = sample_scenario(3);
  const GridSpec g;
  const InputTensor in = build_model_input(s, g);
  CHECK(in.values.shape == Shape{99, 99, 4});
  CHECK(in.coords.shape == Shape{99, 99, 2});
  CHECK(in.coords.at3(0, 0, 0) == doctest::Approx(-4.9).epsilon(1e-6));
  CHECK(in.coords.at3(0, 0, 1) == doctest::Approx(-4.9).epsilon(1e-6));
  CHECK(in.coords.at3(98, 98, 0) == doctest::Approx(4.9).epsilon(1e-6));
  CHECK(in.coords.at3(98, 98, 1) == doctest::Approx(4.9).epsilon(1e-6));

  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      for (std::size_t c = 0; c < 3; ++c) CHECK(in.values.at3(j, i, c) >= -1.0f);
      CHECK(in.values.at3(j, i, 3) > 0.0f);
    }
  for (std::size_t i = 1; i < g.nx; ++i)
    CHECK(in.coords.at3(0, i, 0) > in.coords.at3(0, i - 1, 0));
  for (std::size_t j = 1; j < g.ny; ++j)
    CHECK(in.coords.at3(j, 0, 1) > in.coords.at3(j - 1, 0, 1));

  const InputTensor again = build_model_input(s, g);
  CHECK(in.values.data == again.values.data);
  CHECK(in.coords.data == again.coords.data);
}

TEST_CASE("scenario json: lossless round trip with the documented layout") {
  const Scenario s = sample_scenario(123456789);
  const std::string js = scenario_to_json(s);
  CHECK(js.rfind("{\"seed\":123456789,\"charge\":{\"x\":", 0) == 0);
  CHECK(scenario_equal(scenario_from_json(js), s));
  CHECK(scenario_to_json(scenario_from_json(js)) == js);
}

TEST_CASE("scenario json: malformed input is rejected") {
  CHECK_THROWS_AS(scenario_from_json("not json"), DataError);
  CHECK_THROWS_AS(scenario_from_json("{\"seed\":1}"), DataError);
}

TEST_CASE("grid spec: square grids span the default domain") {
  const GridSpec g = GridSpec::square(33);
  CHECK(g.nx == 33);
  CHECK(g.x_at(0) == doctest::Approx(-4.9));
  CHECK(g.x_at(32) == doctest::Approx(4.9));
  CHECK_THROWS_AS(GridSpec::square(1), std::invalid_argument);
}
