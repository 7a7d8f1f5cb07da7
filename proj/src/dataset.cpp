#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "bof/data.hpp"
#include "bof/error.hpp"
#include "bof/rng.hpp"
#include "bof/threads.hpp"
#include "json.hpp"

// the on-disk formats are little-endian and written with raw f32 stores
static_assert(std::endian::native == std::endian::little);

namespace bof::data {

SplitCounts split_counts(std::size_t n) {
  if (n < 15) throw std::invalid_argument("split_counts: need n >= 15 for non-empty splits");
  SplitCounts c;
  c.train = std::size_t(std::llround(double(n) * 11.0 / 15.0));
  c.val = std::size_t(std::llround(double(n) * 2.0 / 15.0));
  c.test = n - c.train - c.val;
  return c;
}

std::vector<std::size_t> Dataset::indices_of(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

NormStats fit_norm_stats(const Dataset& d) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    if (d.split[i] != Split::train) continue;
    for (float p : d.samples[i].pressure.data) {
      if (p <= 0.0f) throw NumericError("fit_norm_stats: non-positive pressure");
      sum += std::log(double(p));
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("fit_norm_stats: empty train split");
  const double mean = sum / double(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    if (d.split[i] != Split::train) continue;
    for (float p : d.samples[i].pressure.data) {
      const double c = std::log(double(p)) - mean;
      ss += c * c;
    }
  }
  NormStats st;
  st.log_mean = mean;
  st.log_std = std::sqrt(ss / double(n));
  st.fitted = true;
  if (!(st.log_std > 0.0)) throw NumericError("fit_norm_stats: zero variance in train split");
  return st;
}

Dataset generate_dataset(std::size_t n, std::uint64_t base_seed, const GridSpec& g) {
  Dataset d;
  d.grid = g;
  d.base_seed = base_seed;
  d.samples.resize(n);
  // per-sample seeds make generation embarrassingly parallel and
  // thread-count independent
  parallel_for(n, [&](std::size_t i) {
    Sample& s = d.samples[i];
    s.scenario = scene::sample_scenario(base_seed + i);
    s.input = scene::build_model_input(s.scenario, g);
    s.pressure = oracle_pressure(s.scenario, g);
  });

  const SplitCounts c = split_counts(n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng64 rng(base_seed + 0x9E3779B97F4A7C15ULL);  // split stream
  rng.shuffle(order);
  d.split.assign(n, Split::test);
  for (std::size_t i = 0; i < c.train; ++i) d.split[order[i]] = Split::train;
  for (std::size_t i = c.train; i < c.train + c.val; ++i) d.split[order[i]] = Split::val;

  d.norm = fit_norm_stats(d);
  return d;
}

// ---------------------------------------------------------------------------
Field log_transform(const Field& p) {
  Field out(p.shape);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0f)) throw NumericError("log_transform: non-positive pressure");
    out[i] = float(std::log(double(p[i])));
  }
  return out;
}

Field unlog(const Field& l) {
  Field out(l.shape);
  for (std::size_t i = 0; i < l.size(); ++i) out[i] = float(std::exp(double(l[i])));
  return out;
}

Field normalize(const Field& l, const NormStats& s) {
  if (!s.fitted) throw std::logic_error("normalize: stats not fitted");
  Field out(l.shape);
  for (std::size_t i = 0; i < l.size(); ++i)
    out[i] = float((double(l[i]) - s.log_mean) / s.log_std);
  return out;
}

Field denormalize(const Field& z, const NormStats& s) {
  if (!s.fitted) throw std::logic_error("denormalize: stats not fitted");
  Field out(z.shape);
  for (std::size_t i = 0; i < z.size(); ++i)
    out[i] = float(double(z[i]) * s.log_std + s.log_mean);
  return out;
}

// ---------------------------------------------------------------------------
namespace {

constexpr char kSampleMagic[8] = {'B', 'L', 'S', 'T', 'S', 'M', 'P', '1'};
constexpr char kFieldMagic[8] = {'B', 'L', 'S', 'T', 'F', 'L', 'D', '1'};

void put_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw DataError(std::string("sample: truncated ") + what);
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

void put_f32(std::ofstream& os, const std::vector<float>& v) {
  static_assert(sizeof(float) == 4);
  // x86 and every target we build for is little-endian; asserted in read.
  os.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * 4));
}

void get_f32(std::ifstream& is, std::vector<float>& v, std::size_t count, const char* what) {
  v.resize(count);
  if (!is.read(reinterpret_cast<char*>(v.data()), std::streamsize(count * 4)))
    throw DataError(std::string("sample: payload truncated in ") + what);
}

}  // namespace

void write_sample(const Sample& s, const std::filesystem::path& path) {
  const std::size_t ny = s.pressure.dim(0), nx = s.pressure.dim(1);
  check_shape(s.input.values, {ny, nx, 4}, "write_sample input");
  check_shape(s.input.coords, {ny, nx, 2}, "write_sample coords");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("write_sample: cannot open " + path.string());
  os.write(kSampleMagic, 8);
  put_u32(os, std::uint32_t(nx));
  put_u32(os, std::uint32_t(ny));
  const std::string js = scene::scenario_to_json(s.scenario);
  put_u32(os, std::uint32_t(js.size()));
  os.write(js.data(), std::streamsize(js.size()));
  put_f32(os, s.input.values.data);
  put_f32(os, s.input.coords.data);
  put_f32(os, s.pressure.data);
  if (!os) throw DataError("write_sample: write failed for " + path.string());
}

Sample read_sample(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("read_sample: cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kSampleMagic, 8) != 0)
    throw DataError("read_sample: bad magic in " + path.string());
  const std::size_t nx = get_u32(is, "nx");
  const std::size_t ny = get_u32(is, "ny");
  const std::size_t jlen = get_u32(is, "scenario length");
  std::string js(jlen, '\0');
  if (!is.read(js.data(), std::streamsize(jlen)))
    throw DataError("read_sample: truncated scenario JSON");
  Sample s;
  s.scenario = scene::scenario_from_json(js);
  s.input.values.shape = {ny, nx, 4};
  get_f32(is, s.input.values.data, ny * nx * 4, "input");
  s.input.coords.shape = {ny, nx, 2};
  get_f32(is, s.input.coords.data, ny * nx * 2, "coords");
  s.pressure.shape = {ny, nx};
  get_f32(is, s.pressure.data, ny * nx, "pressure");
  is.peek();
  if (!is.eof()) throw DataError("read_sample: trailing bytes disagree with header extents");
  return s;
}

void write_field(const Field& f, const std::filesystem::path& path) {
  if (f.rank() != 2) throw std::invalid_argument("write_field: field must be [ny, nx]");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("write_field: cannot open " + path.string());
  os.write(kFieldMagic, 8);
  put_u32(os, std::uint32_t(f.dim(1)));
  put_u32(os, std::uint32_t(f.dim(0)));
  put_f32(os, f.data);
  if (!os) throw DataError("write_field: write failed for " + path.string());
}

Field read_field(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("read_field: cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kFieldMagic, 8) != 0)
    throw DataError("read_field: bad magic in " + path.string());
  const std::size_t nx = get_u32(is, "nx");
  const std::size_t ny = get_u32(is, "ny");
  Field f;
  f.shape = {ny, nx};
  get_f32(is, f.data, ny * nx, "field");
  is.peek();
  if (!is.eof()) throw DataError("read_field: trailing bytes disagree with header extents");
  return f;
}

// ---------------------------------------------------------------------------
namespace {

std::string sample_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%05zu.bin", i);
  return buf;
}

}  // namespace

void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta;
  meta["grid"] = {{"nx", d.grid.nx},   {"ny", d.grid.ny}, {"x0", d.grid.x0},
                  {"y0", d.grid.y0},   {"dx", d.grid.dx}, {"dy", d.grid.dy},
                  {"z_probe", d.grid.z_probe}};
  meta["base_seed"] = d.base_seed;
  std::vector<int> sp(d.split.size());
  for (std::size_t i = 0; i < d.split.size(); ++i) sp[i] = int(d.split[i]);
  meta["split"] = sp;
  meta["norm"] = {{"log_mean", d.norm.log_mean}, {"log_std", d.norm.log_std},
                  {"fitted", d.norm.fitted}};
  std::ofstream os(dir / "meta.json", std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("write_dataset: cannot open meta.json");
  os << meta.dump(2) << "\n";
  for (std::size_t i = 0; i < d.samples.size(); ++i)
    write_sample(d.samples[i], dir / sample_name(i));
}

Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream is(dir / "meta.json", std::ios::binary);
  if (!is) throw DataError("read_dataset: cannot open " + (dir / "meta.json").string());
  nlohmann::json meta;
  try {
    is >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("read_dataset: invalid meta.json: ") + e.what());
  }
  Dataset d;
  try {
    const auto& g = meta.at("grid");
    d.grid.nx = g.at("nx").get<std::size_t>();
    d.grid.ny = g.at("ny").get<std::size_t>();
    d.grid.x0 = g.at("x0").get<double>();
    d.grid.y0 = g.at("y0").get<double>();
    d.grid.dx = g.at("dx").get<double>();
    d.grid.dy = g.at("dy").get<double>();
    d.grid.z_probe = g.at("z_probe").get<double>();
    d.base_seed = meta.at("base_seed").get<std::uint64_t>();
    for (int v : meta.at("split").get<std::vector<int>>()) d.split.push_back(Split(v));
    d.norm.log_mean = meta.at("norm").at("log_mean").get<double>();
    d.norm.log_std = meta.at("norm").at("log_std").get<double>();
    d.norm.fitted = meta.at("norm").at("fitted").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("read_dataset: missing meta field: ") + e.what());
  }
  d.samples.reserve(d.split.size());
  for (std::size_t i = 0; i < d.split.size(); ++i)
    d.samples.push_back(read_sample(dir / sample_name(i)));
  return d;
}

}  // namespace bof::data
