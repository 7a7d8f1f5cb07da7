#include "bof/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "bof/error.hpp"
#include "bof/rng.hpp"
#include "json.hpp"

namespace bof::scene {

GridSpec GridSpec::square(std::size_t side) {
  if (side < 2) throw std::invalid_argument("GridSpec::square: side must be >= 2");
  GridSpec g;
  g.nx = g.ny = side;
  g.dx = g.dy = 9.8 / double(side - 1);
  return g;
}

Scenario sample_scenario(std::uint64_t seed) {
  Rng64 rng(seed);
  Scenario s;
  s.seed = seed;

  // Disjoint x windows per obstacle, shared y band.
  static constexpr double kXmin[3][2] = {{-4.9, -4.5}, {-2.0, -1.9}, {1.5, 2.5}};
  static constexpr double kXmax[3][2] = {{-2.5, 2.25}, {1.0, 1.5}, {4.5, 4.9}};
  for (int k = 0; k < 3; ++k) {
    s.obstacles[k].x_min = rng.uniform(kXmin[k][0], kXmin[k][1]);
    s.obstacles[k].x_max = rng.uniform(kXmax[k][0], kXmax[k][1]);
  }
  const double y_min = rng.uniform(2.0, 3.0);
  const double h_y = rng.uniform(0.5, 1.0);
  for (int k = 0; k < 3; ++k) {
    s.obstacles[k].y_min = y_min;
    s.obstacles[k].y_max = y_min + h_y;
    s.obstacles[k].z_min = 0.0;
    s.obstacles[k].z_max = rng.uniform(0.5, 2.0);
  }

  s.charge.mass = rng.uniform(5.0, 50.0);
  for (;;) {
    s.charge.x = rng.uniform(-4.9, 4.9);
    s.charge.y = rng.uniform(-4.9, 2.0);
    bool inside = false;
    for (const Obstacle& o : s.obstacles) inside = inside || o.footprint_contains(s.charge.x, s.charge.y);
    if (!inside) break;
  }
  return s;
}

double box_sdf_footprint(double px, double py, const Obstacle& o) {
  if (o.footprint_contains(px, py)) return -1.0;
  const double dx = std::max({o.x_min - px, px - o.x_max, 0.0});
  const double dy = std::max({o.y_min - py, py - o.y_max, 0.0});
  return std::hypot(dx, dy);
}

Field obstacle_sdf_field(const Scenario& s, const GridSpec& g, std::size_t k) {
  if (k >= s.obstacles.size()) throw std::out_of_range("obstacle_sdf_field: obstacle index");
  Field f({g.ny, g.nx});
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i)
      f.at2(j, i) = float(box_sdf_footprint(g.x_at(i), g.y_at(j), s.obstacles[k]));
  return f;
}

Field charge_field(const Scenario& s, const GridSpec& g) {
  Field f({g.ny, g.nx});
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      const double d = std::hypot(g.x_at(i) - s.charge.x, g.y_at(j) - s.charge.y);
      f.at2(j, i) = float(s.charge.mass / std::max(d, kChargeEps));
    }
  return f;
}

InputTensor build_model_input(const Scenario& s, const GridSpec& g) {
  InputTensor in;
  in.values = Tensor<float>({g.ny, g.nx, 4});
  in.coords = Tensor<float>({g.ny, g.nx, 2});
  for (std::size_t k = 0; k < 3; ++k) {
    const Field f = obstacle_sdf_field(s, g, k);
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i < g.nx; ++i) in.values.at3(j, i, k) = f.at2(j, i);
  }
  const Field cf = charge_field(s, g);
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      in.values.at3(j, i, 3) = cf.at2(j, i);
      in.coords.at3(j, i, 0) = float(g.x_at(i));
      in.coords.at3(j, i, 1) = float(g.y_at(j));
    }
  return in;
}

namespace {

std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string scenario_to_json(const Scenario& s) {
  std::string out = "{\"seed\":" + std::to_string(s.seed);
  out += ",\"charge\":{\"x\":" + num17(s.charge.x) + ",\"y\":" + num17(s.charge.y) +
         ",\"mass\":" + num17(s.charge.mass) + "}";
  out += ",\"obstacles\":[";
  for (int k = 0; k < 3; ++k) {
    const Obstacle& o = s.obstacles[k];
    if (k) out += ",";
    out += "{\"x_min\":" + num17(o.x_min) + ",\"x_max\":" + num17(o.x_max) +
           ",\"y_min\":" + num17(o.y_min) + ",\"y_max\":" + num17(o.y_max) +
           ",\"z_min\":" + num17(o.z_min) + ",\"z_max\":" + num17(o.z_max) + "}";
  }
  out += "]}";
  return out;
}

Scenario scenario_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scenario: invalid JSON: ") + e.what());
  }
  try {
    Scenario s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.charge.x = j.at("charge").at("x").get<double>();
    s.charge.y = j.at("charge").at("y").get<double>();
    s.charge.mass = j.at("charge").at("mass").get<double>();
    const auto& obs = j.at("obstacles");
    if (!obs.is_array() || obs.size() != 3)
      throw DataError("scenario: expected exactly 3 obstacles");
    for (int k = 0; k < 3; ++k) {
      const auto& o = obs.at(k);
      s.obstacles[k].x_min = o.at("x_min").get<double>();
      s.obstacles[k].x_max = o.at("x_max").get<double>();
      s.obstacles[k].y_min = o.at("y_min").get<double>();
      s.obstacles[k].y_max = o.at("y_max").get<double>();
      s.obstacles[k].z_min = o.at("z_min").get<double>();
      s.obstacles[k].z_max = o.at("z_max").get<double>();
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scenario: missing or mistyped field: ") + e.what());
  }
}

}  // namespace bof::scene
