#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "bof/tensor.hpp"

namespace bof::scene {

// Axis-aligned box obstacle; probes only see the x-y footprint.
struct Obstacle {
  double x_min = 0, x_max = 0;
  double y_min = 0, y_max = 0;
  double z_min = 0, z_max = 0;

  bool footprint_contains(double px, double py) const {
    return px >= x_min && px <= x_max && py >= y_min && py <= y_max;
  }
};

struct Charge {
  double x = 0, y = 0;
  double mass = 0;  // kg
};

struct Scenario {
  std::array<Obstacle, 3> obstacles;
  Charge charge;
  std::uint64_t seed = 0;
};

// Probe-plane lattice. The default matches the 99 x 99 grid spanning
// [-4.9, 4.9] at 0.1 m spacing, probes at z = 1 m.
struct GridSpec {
  std::size_t nx = 99, ny = 99;
  double x0 = -4.9, y0 = -4.9;
  double dx = 0.1, dy = 0.1;
  double z_probe = 1.0;

  double x_at(std::size_t i) const { return x0 + double(i) * dx; }
  double y_at(std::size_t j) const { return y0 + double(j) * dy; }

  // Square grid over the same physical span as the default domain.
  static GridSpec square(std::size_t side);

  bool operator==(const GridSpec&) const = default;
};

using Field = Tensor<float>;  // [ny, nx]

struct InputTensor {
  Tensor<float> values;  // [ny, nx, 4]: obstacle SDFs 0..2, charge channel 3
  Tensor<float> coords;  // [ny, nx, 2]: x, y in meters
};

// Clamp for the inverse-distance charge channel (half the probe spacing).
inline constexpr double kChargeEps = 0.05;

// Uniform draw over the sampling windows; the charge position is resampled
// until it clears every footprint. Identical seeds give identical scenarios.
Scenario sample_scenario(std::uint64_t seed);

// Distance to the footprint boundary outside, exactly -1 inside or on it.
double box_sdf_footprint(double px, double py, const Obstacle& o);

Field obstacle_sdf_field(const Scenario& s, const GridSpec& g, std::size_t k);
Field charge_field(const Scenario& s, const GridSpec& g);
InputTensor build_model_input(const Scenario& s, const GridSpec& g);

// One JSON object with numbers at 17 significant digits (lossless doubles).
std::string scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const std::string& text);

}  // namespace bof::scene
