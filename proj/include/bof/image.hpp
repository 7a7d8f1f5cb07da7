#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "bof/scene.hpp"

namespace bof::harness {

enum class Colormap { jet, binary };

Colormap colormap_from_name(const std::string& name);

// Map t in [0,1] to RGB. jet: piecewise-linear blue -> cyan -> yellow -> red
// with anchors at t = 0, 0.5, 0.75, 1. binary: white -> black.
std::array<unsigned char, 3> colormap_rgb(Colormap map, double t);

// Min-max normalized field rendered one pixel per cell as binary PPM (P6),
// field row 0 at the top. Constant fields render at t = 0.
void render_map(const scene::Field& f, Colormap map, const std::filesystem::path& path);

}  // namespace bof::harness
