#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bof/scene.hpp"
#include "bof/tensor.hpp"

namespace bof::data {

using scene::Field;
using scene::GridSpec;
using scene::InputTensor;
using scene::Scenario;

// ---------------------------------------------------------------------------
// Analytic blast oracle: a deterministic desk-scale ground truth standing in
// for CFD runs. Point-source decay with line-of-sight shadowing behind
// obstacles and an exponential reflection boost on charge-facing walls.
// The constants are documented model choices, not physics claims; they put
// fields in the 1e5..1e7 Pa range.
inline constexpr double kAtmospherePa = 101325.0;
inline constexpr double kSourceCoeff = 4.0e5;  // Pa m^2 / kg
inline constexpr double kSourceRadius = 0.3;   // m, near-field clamp
inline constexpr double kShadowFactor = 0.35;
inline constexpr double kBoostAmplitude = 0.5;
inline constexpr double kBoostDecay = 0.5;  // m

// True if the open segment from (ax, ay) to (bx, by) passes through the
// closed footprint rectangle.
bool segment_hits_footprint(double ax, double ay, double bx, double by, const scene::Obstacle& o);

double oracle_pressure_at(const Scenario& s, double px, double py);
Field oracle_pressure(const Scenario& s, const GridSpec& g);

// ---------------------------------------------------------------------------
enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
};

// 73.33 / 13.33 / 13.33 proportions rounded to integers summing to n.
SplitCounts split_counts(std::size_t n);

struct NormStats {
  double log_mean = 0.0;
  double log_std = 1.0;
  bool fitted = false;
};

struct Sample {
  Scenario scenario;
  InputTensor input;
  Field pressure;  // Pa, per-probe maximum over time
};

struct Dataset {
  GridSpec grid;
  std::uint64_t base_seed = 0;
  std::vector<Sample> samples;
  std::vector<Split> split;
  NormStats norm;

  std::vector<std::size_t> indices_of(Split s) const;
};

// Per-sample seeds are base_seed + index; split assignment shuffles indices
// with a seed derived from base_seed; NormStats fit on the train split only.
Dataset generate_dataset(std::size_t n, std::uint64_t base_seed, const GridSpec& g);

// ---------------------------------------------------------------------------
Field log_transform(const Field& p);
Field unlog(const Field& l);
Field normalize(const Field& l, const NormStats& s);
Field denormalize(const Field& z, const NormStats& s);
NormStats fit_norm_stats(const Dataset& d);  // train split only

// ---------------------------------------------------------------------------
// sample_%05d.bin: "BLSTSMP1" | u32 nx | u32 ny | u32 json_len | scenario
// JSON | f32 input (ny*nx*4) | f32 coords (ny*nx*2) | f32 pressure (ny*nx),
// all little-endian. Round trips are bit-exact.
void write_sample(const Sample& s, const std::filesystem::path& path);
Sample read_sample(const std::filesystem::path& path);

void write_dataset(const Dataset& d, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// blastFoam-style case emission. The solver settings and phase properties are
// emitted verbatim as opaque text; nothing here interprets them.
void emit_case(const Scenario& s, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Probe output text: "# Probe <k> (<x> <y> <z>)" header lines, one
// "# Time p0 p1 ..." line, then whitespace-separated rows, time first.
void write_probe_file(const std::filesystem::path& path, const GridSpec& g,
                      const std::vector<double>& times,
                      const std::vector<std::vector<double>>& rows);

// Per-probe maximum over all time rows, assembled by coordinate lookup.
Field parse_probe_file(const std::string& text, const GridSpec& g);

// ---------------------------------------------------------------------------
// Field container used by the CLI: "BLSTFLD1" | u32 nx | u32 ny | f32 data.
void write_field(const Field& f, const std::filesystem::path& path);
Field read_field(const std::filesystem::path& path);

}  // namespace bof::data
