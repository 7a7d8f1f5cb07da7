#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bof/scene.hpp"
#include "json.hpp"

namespace bof::harness {

using scene::Field;

// Pooled over all cells of all samples.
double metric_r2(const std::vector<Field>& pred, const std::vector<Field>& truth);
double metric_mae(const std::vector<Field>& pred, const std::vector<Field>& truth);
// Percent; truth must be nonzero everywhere.
double metric_mape(const std::vector<Field>& pred, const std::vector<Field>& truth);

Field error_map(const Field& pred, const Field& truth);

// Equal-width bins over [0, max(values)]; rows of (bin_left, bin_right, count).
void histogram_csv(const std::vector<double>& values, std::size_t bins,
                   const std::filesystem::path& path);

struct MetricsReport {
  std::string model_kind;
  std::string split;
  double r2_log = 0, mae_log = 0, mape_log_pct = 0;
  double r2_unscaled = 0, mae_unscaled_pa = 0, mape_unscaled_pct = 0;
  std::vector<double> per_sample_mape_log;
  std::vector<double> per_sample_mape_unscaled;
  double inference_ms = 0;
  std::size_t param_count = 0;
  bool used_unscaler = false;

  nlohmann::json to_json() const;
};

// Table-style comparison of several model reports, with the published
// reference rows included for context (reported, never asserted).
std::string comparison_table(const std::vector<MetricsReport>& reports);

}  // namespace bof::harness
