#pragma once

#include <memory>
#include <string>
#include <vector>

#include "bof/baselines.hpp"
#include "bof/blastoformer.hpp"
#include "bof/checkpoint.hpp"
#include "bof/metrics.hpp"

namespace bof::harness {

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 4;
  std::size_t max_epochs = 10000;
  std::size_t early_stop_patience = 1000;
  double lr_min = 0.0;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  std::string loss = "L1";  // "L1" | "MSE"

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  // Published optimizer settings per model kind.
  static TrainConfig defaults_for(const std::string& kind);
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double lr = 0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  double best_val = 0;
  std::vector<TensorBlob> best_params;
  bool stopped_early = false;
};

// Seeded shuffles, minibatch gradient accumulation across worker threads
// with sample-order reduction, loss on normalized log targets, cosine
// annealing over max_epochs * steps_per_epoch, best-validation snapshot,
// early stop after `patience` epochs without improvement.
TrainResult train_model(model::ModelIface<float>& m, const data::Dataset& ds,
                        const TrainConfig& cfg);

std::string history_csv(const std::vector<EpochStats>& history);

// Post-hoc unscaler fit: MSE against unscaled ground truth (internally in
// units of 1e6 Pa), best-validation-MSE snapshot retained.
struct UnscalerTrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 300;
  std::size_t early_stop_patience = 60;
  double lr_min = 0.0;
  std::uint64_t seed = 0;
};

TrainResult train_unscaler(model::UnscalerCnn<float>& u, const std::vector<scene::Field>& log_in,
                           const std::vector<scene::Field>& pa_target,
                           const std::vector<std::size_t>& train_idx,
                           const std::vector<std::size_t>& val_idx,
                           const UnscalerTrainConfig& cfg);

// Overfit a single (log_field, pressure) pair; returns final relative MSE
// (MSE / mean(p^2)).
double unscaler_overfit_pair(model::UnscalerCnn<float>& u, const scene::Field& log_in,
                             const scene::Field& pa_target, std::size_t steps, double lr);

// ---------------------------------------------------------------------------
std::unique_ptr<model::ModelIface<float>> build_model(const std::string& kind,
                                                      const nlohmann::json& model_cfg,
                                                      const scene::GridSpec& grid);

Checkpoint make_checkpoint(const model::ModelIface<float>& m, const scene::GridSpec& grid,
                           const nlohmann::json& optimizer, const data::NormStats& norm,
                           const std::vector<TensorBlob>* params_override = nullptr,
                           const model::UnscalerCnn<float>* unscaler = nullptr);

struct LoadedModel {
  std::unique_ptr<model::ModelIface<float>> model;
  std::unique_ptr<model::UnscalerCnn<float>> unscaler;  // may be null
  scene::GridSpec grid;
  data::NormStats norm;
};

LoadedModel load_model(const Checkpoint& c);
LoadedModel load_model(const Checkpoint& c, const scene::GridSpec& grid_override);

// Denormalized log-pressure prediction for one sample.
scene::Field predict_log_field(model::ModelIface<float>& m, const data::NormStats& norm,
                               const data::Sample& sample);

// Pooled metrics in both domains from already-computed prediction fields.
MetricsReport metrics_from_fields(const std::string& kind, const std::string& split,
                                  const std::vector<scene::Field>& pred_log,
                                  const std::vector<scene::Field>& pred_pa,
                                  const std::vector<scene::Field>& truth_log,
                                  const std::vector<scene::Field>& truth_pa);

// Log metrics on denormalized predictions vs log truth; unscaled metrics on
// exponentiated predictions (or the unscaler output when present); single
// forward latency averaged over >= 100 runs.
MetricsReport evaluate(const Checkpoint& c, const data::Dataset& ds, data::Split split);

// Median wall-clock of single-sample forwards after 5 warm-up runs.
double benchmark_inference(const Checkpoint& c, const scene::GridSpec& g, std::size_t runs);

}  // namespace bof::harness
