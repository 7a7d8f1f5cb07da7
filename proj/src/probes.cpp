#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bof/data.hpp"
#include "bof/error.hpp"

namespace bof::data {

namespace {

std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_number(const std::string& tok) {
  const char* s = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0') throw DataError("probe file: non-numeric token '" + tok + "'");
  return v;
}

}  // namespace

void write_probe_file(const std::filesystem::path& path, const GridSpec& g,
                      const std::vector<double>& times,
                      const std::vector<std::vector<double>>& rows) {
  if (times.size() != rows.size())
    throw std::invalid_argument("write_probe_file: times and rows disagree");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("write_probe_file: cannot open " + path.string());
  const std::size_t n = g.nx * g.ny;
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i) {
      const std::size_t k = j * g.nx + i;
      os << "# Probe " << k << " (" << num17(g.x_at(i)) << " " << num17(g.y_at(j)) << " "
         << num17(g.z_probe) << ")\n";
    }
  os << "# Time";
  for (std::size_t k = 0; k < n; ++k) os << " p" << k;
  os << "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != n)
      throw std::invalid_argument("write_probe_file: row width must equal probe count");
    os << num17(times[r]);
    for (double v : rows[r]) os << " " << num17(v);
    os << "\n";
  }
  if (!os) throw DataError("write_probe_file: write failed for " + path.string());
}

Field parse_probe_file(const std::string& text, const GridSpec& g) {
  std::vector<std::pair<double, double>> coords;  // (x, y) per probe, in file order
  std::vector<double> zs;
  std::vector<double> maxima;
  std::size_t data_rows = 0;

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line);
      std::string hash, word;
      ls >> hash >> word;
      if (word == "Probe") {
        std::size_t k;
        ls >> k;
        std::string rest;
        std::getline(ls, rest);
        const std::size_t open = rest.find('(');
        const std::size_t close = rest.rfind(')');
        if (open == std::string::npos || close == std::string::npos || close <= open)
          throw DataError("probe file: malformed probe header '" + line + "'");
        std::istringstream cs(rest.substr(open + 1, close - open - 1));
        std::string xs, ys, zstr;
        if (!(cs >> xs >> ys >> zstr))
          throw DataError("probe file: malformed probe coordinates '" + line + "'");
        if (k != coords.size())
          throw DataError("probe file: probe indices out of order at '" + line + "'");
        coords.emplace_back(parse_number(xs), parse_number(ys));
        zs.push_back(parse_number(zstr));
      }
      continue;  // "# Time ..." and other comments end the probe header
    }
    std::istringstream ls(line);
    std::string tok;
    std::vector<double> vals;
    while (ls >> tok) vals.push_back(parse_number(tok));
    if (vals.empty()) continue;
    if (vals.size() != coords.size() + 1)
      throw DataError("probe file: row has " + std::to_string(vals.size() - 1) +
                      " values for " + std::to_string(coords.size()) + " probes");
    if (maxima.empty()) maxima.assign(coords.size(), -1e300);
    for (std::size_t k = 0; k < coords.size(); ++k)
      maxima[k] = std::max(maxima[k], vals[k + 1]);
    ++data_rows;
  }

  if (coords.size() != g.nx * g.ny)
    throw DataError("probe file: " + std::to_string(coords.size()) + " probes but grid has " +
                    std::to_string(g.nx * g.ny));
  if (data_rows == 0) throw DataError("probe file: no time rows");

  constexpr double kTol = 1e-6;
  Field f({g.ny, g.nx});
  std::vector<bool> seen(g.nx * g.ny, false);
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const auto [x, y] = coords[k];
    const long i = std::lround((x - g.x0) / g.dx);
    const long j = std::lround((y - g.y0) / g.dy);
    if (i < 0 || std::size_t(i) >= g.nx || std::abs(g.x_at(std::size_t(i)) - x) > kTol ||
        j < 0 || std::size_t(j) >= g.ny || std::abs(g.y_at(std::size_t(j)) - y) > kTol ||
        std::abs(zs[k] - g.z_probe) > kTol)
      throw DataError("probe file: probe " + std::to_string(k) + " at (" + std::to_string(x) +
                      ", " + std::to_string(y) + ", " + std::to_string(zs[k]) +
                      ") is off the grid lattice");
    const std::size_t cell = std::size_t(j) * g.nx + std::size_t(i);
    if (seen[cell])
      throw DataError("probe file: duplicate probe for lattice cell " + std::to_string(cell));
    seen[cell] = true;
    f.at2(std::size_t(j), std::size_t(i)) = float(maxima[k]);
  }
  return f;
}

}  // namespace bof::data
