#include "bof/image.hpp"

#include <cmath>
#include <fstream>

#include "bof/error.hpp"

namespace bof::harness {

Colormap colormap_from_name(const std::string& name) {
  if (name == "jet") return Colormap::jet;
  if (name == "binary") return Colormap::binary;
  throw std::invalid_argument("unknown colormap '" + name + "' (expected jet or binary)");
}

namespace {

unsigned char to_byte(double v) {
  const double c = std::lround(std::min(std::max(v, 0.0), 255.0));
  return static_cast<unsigned char>(c);
}

}  // namespace

std::array<unsigned char, 3> colormap_rgb(Colormap map, double t) {
  t = std::min(std::max(t, 0.0), 1.0);
  if (map == Colormap::binary) {
    const unsigned char g = to_byte(255.0 * (1.0 - t));
    return {g, g, g};
  }
  // Anchors: (0, blue) (0.5, cyan) (0.75, yellow) (1, red).
  struct Anchor {
    double t;
    double r, g, b;
  };
  static constexpr Anchor kA[4] = {{0.0, 0, 0, 255}, {0.5, 0, 255, 255},
                                   {0.75, 255, 255, 0}, {1.0, 255, 0, 0}};
  for (int i = 0; i < 3; ++i) {
    if (t <= kA[i + 1].t) {
      const double u = (t - kA[i].t) / (kA[i + 1].t - kA[i].t);
      return {to_byte(kA[i].r + u * (kA[i + 1].r - kA[i].r)),
              to_byte(kA[i].g + u * (kA[i + 1].g - kA[i].g)),
              to_byte(kA[i].b + u * (kA[i + 1].b - kA[i].b))};
    }
  }
  return {255, 0, 0};
}

void render_map(const scene::Field& f, Colormap map, const std::filesystem::path& path) {
  if (f.rank() != 2) throw std::invalid_argument("render_map: field must be [ny, nx]");
  double lo = 0, hi = 0;
  bool first = true;
  for (float v : f.data) {
    if (!std::isfinite(double(v))) throw NumericError("render_map: non-finite cell");
    if (first || v < lo) lo = v;
    if (first || v > hi) hi = v;
    first = false;
  }
  const double span = hi - lo;

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("render_map: cannot open " + path.string());
  os << "P6\n" << f.dim(1) << " " << f.dim(0) << "\n255\n";
  for (std::size_t j = 0; j < f.dim(0); ++j)
    for (std::size_t i = 0; i < f.dim(1); ++i) {
      const double t = span > 0 ? (double(f.at2(j, i)) - lo) / span : 0.0;
      const auto rgb = colormap_rgb(map, t);
      os.write(reinterpret_cast<const char*>(rgb.data()), 3);
    }
  if (!os) throw DataError("render_map: write failed for " + path.string());
}

}  // namespace bof::harness
