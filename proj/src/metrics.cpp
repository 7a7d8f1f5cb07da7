#include "bof/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bof/error.hpp"

namespace bof::harness {

namespace {

void check_batch(const std::vector<Field>& pred, const std::vector<Field>& truth,
                 const char* where) {
  if (pred.size() != truth.size() || pred.empty())
    throw std::invalid_argument(std::string(where) + ": batch size mismatch or empty batch");
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i].shape != truth[i].shape)
      throw std::invalid_argument(std::string(where) + ": field shape mismatch at sample " +
                                  std::to_string(i));
}

}  // namespace

double metric_r2(const std::vector<Field>& pred, const std::vector<Field>& truth) {
  check_batch(pred, truth, "metric_r2");
  double sum = 0;
  std::size_t n = 0;
  for (const Field& f : truth)
    for (float v : f.data) {
      sum += double(v);
      ++n;
    }
  const double mean = sum / double(n);
  double ss_res = 0, ss_tot = 0;
  for (std::size_t s = 0; s < pred.size(); ++s)
    for (std::size_t i = 0; i < truth[s].size(); ++i) {
      const double r = double(pred[s][i]) - double(truth[s][i]);
      const double c = double(truth[s][i]) - mean;
      ss_res += r * r;
      ss_tot += c * c;
    }
  if (ss_tot == 0.0) throw NumericError("metric_r2: constant truth has no variance");
  return 1.0 - ss_res / ss_tot;
}

double metric_mae(const std::vector<Field>& pred, const std::vector<Field>& truth) {
  check_batch(pred, truth, "metric_mae");
  double acc = 0;
  std::size_t n = 0;
  for (std::size_t s = 0; s < pred.size(); ++s)
    for (std::size_t i = 0; i < truth[s].size(); ++i) {
      acc += std::abs(double(pred[s][i]) - double(truth[s][i]));
      ++n;
    }
  return acc / double(n);
}

double metric_mape(const std::vector<Field>& pred, const std::vector<Field>& truth) {
  check_batch(pred, truth, "metric_mape");
  double acc = 0;
  std::size_t n = 0;
  for (std::size_t s = 0; s < pred.size(); ++s)
    for (std::size_t i = 0; i < truth[s].size(); ++i) {
      const double tv = double(truth[s][i]);
      if (tv == 0.0) throw NumericError("metric_mape: zero truth cell");
      acc += std::abs(double(pred[s][i]) - tv) / std::abs(tv);
      ++n;
    }
  return acc / double(n) * 100.0;
}

Field error_map(const Field& pred, const Field& truth) {
  if (pred.shape != truth.shape) throw std::invalid_argument("error_map: shape mismatch");
  Field out(pred.shape);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::abs(pred[i] - truth[i]);
  return out;
}

void histogram_csv(const std::vector<double>& values, std::size_t bins,
                   const std::filesystem::path& path) {
  if (values.empty()) throw std::invalid_argument("histogram_csv: empty vector");
  if (bins < 1) throw std::invalid_argument("histogram_csv: need at least one bin");
  double mx = 0;
  for (double v : values) mx = std::max(mx, v);
  if (mx <= 0) mx = 1.0;  // all-zero vector still produces a usable bin
  const double width = mx / double(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    std::size_t b = std::size_t(v / width);
    if (b >= bins) b = bins - 1;  // v == max lands in the last bin
    counts[b]++;
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("histogram_csv: cannot open " + path.string());
  os << "bin_left,bin_right,count\n";
  char buf[96];
  for (std::size_t b = 0; b < bins; ++b) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%zu\n", width * double(b),
                  width * double(b + 1), counts[b]);
    os << buf;
  }
  if (!os) throw DataError("histogram_csv: write failed for " + path.string());
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["model"] = model_kind;
  j["split"] = split;
  j["log"] = {{"r2", r2_log}, {"mae", mae_log}, {"mape_pct", mape_log_pct}};
  j["unscaled"] = {{"r2", r2_unscaled}, {"mae_pa", mae_unscaled_pa},
                   {"mape_pct", mape_unscaled_pct}};
  j["per_sample_mape_log"] = per_sample_mape_log;
  j["per_sample_mape_unscaled"] = per_sample_mape_unscaled;
  j["inference_ms"] = inference_ms;
  j["param_count"] = param_count;
  j["used_unscaler"] = used_unscaler;
  // Published reference metrics (GPU timing, CFD-trained); context only.
  j["reference_table"] = {
      {"blastoformer",
       {{"log", {{"r2", 0.9169}, {"mae", 0.1729}, {"mape_pct", 1.315}}},
        {"unscaled", {{"r2", 0.9516}, {"mae_pa", 484000.0}, {"mape_pct", 21.1}}},
        {"prediction_ms", 6.4},
        {"params", 2430000}}},
      {"fno",
       {{"log", {{"r2", 0.8231}, {"mae", 0.3359}, {"mape_pct", 2.579}}},
        {"unscaled", {{"r2", 0.9164}, {"mae_pa", 600000.0}, {"mape_pct", 35.9}}},
        {"prediction_ms", 4.0},
        {"params", 365000}}},
      {"cnn",
       {{"log", {{"r2", 0.9218}, {"mae", 1.116}, {"mape_pct", 8.53}}},
        {"unscaled", {{"r2", 0.8945}, {"mae_pa", 1192000.0}, {"mape_pct", 211.0}}},
        {"prediction_ms", 1.4},
        {"params", 2960000}}}};
  j["reference_note"] =
      "reference rows come from GPU runs on CFD-generated data and are not comparable to "
      "desk-scale CPU results; reported for context only";
  return j;
}

std::string comparison_table(const std::vector<MetricsReport>& reports) {
  std::ostringstream os;
  char buf[256];
  os << "Model          | domain   |     R^2 |        MAE | MAPE (%) | pred time (ms) | # params\n";
  os << "---------------+----------+---------+------------+----------+----------------+---------\n";
  for (const MetricsReport& r : reports) {
    std::snprintf(buf, sizeof(buf),
                  "%-14s | log      | %7.4f | %10.4g | %8.3g | %14.3g | %zu\n",
                  r.model_kind.c_str(), r.r2_log, r.mae_log, r.mape_log_pct, r.inference_ms,
                  r.param_count);
    os << buf;
    std::snprintf(buf, sizeof(buf), "%-14s | unscaled | %7.4f | %10.4g | %8.3g |%15s |\n", "",
                  r.r2_unscaled, r.mae_unscaled_pa, r.mape_unscaled_pct, "");
    os << buf;
  }
  os << "(published reference, GPU + CFD data: BlastOFormer unscaled R^2 0.9516, 6.4 ms, "
        "2.43e6 params; FNO 0.9164, 4.0 ms, 3.65e5; CNN 0.8945, 1.4 ms, 2.96e6 -- context "
        "only, not asserted)\n";
  return os.str();
}

}  // namespace bof::harness
