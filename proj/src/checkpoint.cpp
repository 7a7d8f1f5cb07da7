#include "bof/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "bof/error.hpp"
#include "bof/sha256.hpp"

namespace bof {

namespace {

constexpr char kMagic[8] = {'B', 'O', 'F', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ofstream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::ifstream& is, const char* what) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw DataError(std::string("checkpoint: truncated ") + what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

std::string config_hash(const nlohmann::json& config) { return sha256_hex(config.dump()); }

nlohmann::json grid_to_json(const scene::GridSpec& g) {
  return {{"nx", g.nx}, {"ny", g.ny}, {"x0", g.x0},           {"y0", g.y0},
          {"dx", g.dx}, {"dy", g.dy}, {"z_probe", g.z_probe}};
}

scene::GridSpec grid_from_json(const nlohmann::json& j) {
  scene::GridSpec g;
  g.nx = j.at("nx").get<std::size_t>();
  g.ny = j.at("ny").get<std::size_t>();
  g.x0 = j.at("x0").get<double>();
  g.y0 = j.at("y0").get<double>();
  g.dx = j.at("dx").get<double>();
  g.dy = j.at("dy").get<double>();
  g.z_probe = j.at("z_probe").get<double>();
  return g;
}

void write_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  nlohmann::json header;
  header["dtype"] = "f32";
  header["model"] = c.model_kind;
  header["config"] = c.config;
  header["config_hash"] = config_hash(c.config);
  header["optimizer"] = c.optimizer;
  header["norm"] = {{"log_mean", c.norm.log_mean}, {"log_std", c.norm.log_std},
                    {"fitted", c.norm.fitted}};
  nlohmann::json plist = nlohmann::json::array();
  for (const TensorBlob& t : c.tensors) plist.push_back({{"name", t.name}, {"shape", t.shape}});
  header["params"] = plist;
  const std::string hj = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("write_checkpoint: cannot open " + path.string());
  os.write(kMagic, 8);
  put_u64(os, hj.size());
  os.write(hj.data(), std::streamsize(hj.size()));
  for (const TensorBlob& t : c.tensors)
    os.write(reinterpret_cast<const char*>(t.data.data()), std::streamsize(t.data.size() * 4));
  if (!os) throw DataError("write_checkpoint: write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("read_checkpoint: cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("read_checkpoint: bad magic in " + path.string());
  const std::uint64_t hlen = get_u64(is, "header length");
  std::string hj(hlen, '\0');
  if (!is.read(hj.data(), std::streamsize(hlen)))
    throw DataError("read_checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hj);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("read_checkpoint: invalid header JSON: ") + e.what());
  }

  Checkpoint c;
  try {
    if (header.at("dtype").get<std::string>() != "f32")
      throw DataError("read_checkpoint: unsupported dtype");
    c.model_kind = header.at("model").get<std::string>();
    c.config = header.at("config");
    c.optimizer = header.at("optimizer");
    c.norm.log_mean = header.at("norm").at("log_mean").get<double>();
    c.norm.log_std = header.at("norm").at("log_std").get<double>();
    c.norm.fitted = header.at("norm").at("fitted").get<bool>();
    const std::string want_hash = header.at("config_hash").get<std::string>();
    if (want_hash != config_hash(c.config))
      throw DataError("read_checkpoint: config hash mismatch (corrupted or tampered header)");
    for (const auto& p : header.at("params")) {
      TensorBlob t;
      t.name = p.at("name").get<std::string>();
      t.shape = p.at("shape").get<Shape>();
      t.data.resize(numel(t.shape));
      if (!is.read(reinterpret_cast<char*>(t.data.data()), std::streamsize(t.data.size() * 4)))
        throw DataError("read_checkpoint: truncated tensor '" + t.name + "'");
      c.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("read_checkpoint: malformed header: ") + e.what());
  }
  is.peek();
  if (!is.eof()) throw DataError("read_checkpoint: trailing bytes after tensors");
  return c;
}

}  // namespace bof
