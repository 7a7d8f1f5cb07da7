#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bof/data.hpp"
#include "bof/tape.hpp"
#include "json.hpp"

namespace bof {

struct TensorBlob {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

// Checkpoint container: magic "BOFCKPT1", a JSON header (dtype, model kind,
// config + its SHA-256 hash, optimizer hyperparameters, normalization stats,
// tensor names/shapes), then raw little-endian f32 tensors in header order.
struct Checkpoint {
  std::string model_kind;
  nlohmann::json config;     // {"grid": ..., "model": ..., ["unscaler": ...]}
  nlohmann::json optimizer;  // hyperparameters, informational
  data::NormStats norm;
  std::vector<TensorBlob> tensors;

  const TensorBlob* find(const std::string& name) const {
    for (const TensorBlob& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
  bool has_unscaler() const { return config.contains("unscaler"); }
};

// Canonical form: nlohmann dump with sorted keys and no whitespace.
std::string config_hash(const nlohmann::json& config);

void write_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

nlohmann::json grid_to_json(const scene::GridSpec& g);
scene::GridSpec grid_from_json(const nlohmann::json& j);

template <class S>
std::vector<TensorBlob> params_to_blobs(const std::vector<Param<S>*>& params) {
  std::vector<TensorBlob> out;
  out.reserve(params.size());
  for (const Param<S>* p : params) {
    TensorBlob b;
    b.name = p->name;
    b.shape = p->value.shape;
    b.data.resize(p->value.size());
    for (std::size_t i = 0; i < b.data.size(); ++i) b.data[i] = float(p->value[i]);
    out.push_back(std::move(b));
  }
  return out;
}

template <class S>
void blobs_to_params(const std::vector<TensorBlob>& blobs, const std::vector<Param<S>*>& params) {
  for (Param<S>* p : params) {
    const TensorBlob* b = nullptr;
    for (const TensorBlob& cand : blobs)
      if (cand.name == p->name) {
        b = &cand;
        break;
      }
    if (!b) throw DataError("checkpoint: missing tensor '" + p->name + "'");
    if (b->shape != p->value.shape)
      throw DataError("checkpoint: tensor '" + p->name + "' has shape " + shape_str(b->shape) +
                      ", model expects " + shape_str(p->value.shape));
    for (std::size_t i = 0; i < b->data.size(); ++i) p->value[i] = S(b->data[i]);
  }
}

}  // namespace bof
