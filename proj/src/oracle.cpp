#include <algorithm>
#include <cmath>

#include "bof/data.hpp"

namespace bof::data {

bool segment_hits_footprint(double ax, double ay, double bx, double by, const scene::Obstacle& o) {
  // Liang-Barsky clip of the open segment against the closed rectangle.
  const double dx = bx - ax, dy = by - ay;
  double tmin = 0.0, tmax = 1.0;
  const double lo[2] = {o.x_min, o.y_min}, hi[2] = {o.x_max, o.y_max};
  const double p0[2] = {ax, ay}, d[2] = {dx, dy};
  for (int axis = 0; axis < 2; ++axis) {
    if (d[axis] == 0.0) {
      if (p0[axis] < lo[axis] || p0[axis] > hi[axis]) return false;
    } else {
      double t1 = (lo[axis] - p0[axis]) / d[axis];
      double t2 = (hi[axis] - p0[axis]) / d[axis];
      if (t1 > t2) std::swap(t1, t2);
      tmin = std::max(tmin, t1);
      tmax = std::min(tmax, t2);
      if (tmin > tmax) return false;
    }
  }
  // Endpoints excluded: the overlap must reach into the open interval.
  return tmax > 0.0 && tmin < 1.0;
}

double oracle_pressure_at(const Scenario& s, double px, double py) {
  const double d_c = std::hypot(px - s.charge.x, py - s.charge.y);
  const double denom = std::max(d_c, kSourceRadius);

  double shadow = 1.0;
  for (const scene::Obstacle& o : s.obstacles)
    if (segment_hits_footprint(s.charge.x, s.charge.y, px, py, o)) {
      shadow = kShadowFactor;
      break;
    }

  double boost = 0.0;
  for (const scene::Obstacle& o : s.obstacles) {
    if (px < o.x_min || px > o.x_max) continue;
    double d_f = -1.0;
    if (s.charge.y <= o.y_min && py <= o.y_min)
      d_f = o.y_min - py;
    else if (s.charge.y >= o.y_max && py >= o.y_max)
      d_f = py - o.y_max;
    if (d_f >= 0.0) boost = std::max(boost, kBoostAmplitude * std::exp(-d_f / kBoostDecay));
  }

  return kAtmospherePa + kSourceCoeff * s.charge.mass / (denom * denom) * shadow * (1.0 + boost);
}

Field oracle_pressure(const Scenario& s, const GridSpec& g) {
  Field f({g.ny, g.nx});
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i)
      f.at2(j, i) = float(oracle_pressure_at(s, g.x_at(i), g.y_at(j)));
  return f;
}

}  // namespace bof::data
