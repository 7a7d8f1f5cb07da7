#include "bof/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "bof/error.hpp"
#include "bof/ops.hpp"
#include "bof/optim.hpp"
#include "bof/rng.hpp"
#include "bof/threads.hpp"

namespace bof::harness {

nlohmann::json TrainConfig::to_json() const {
  return {{"lr", lr},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"early_stop_patience", early_stop_patience},
          {"lr_min", lr_min},
          {"weight_decay", weight_decay},
          {"seed", seed},
          {"loss", loss}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  if (j.contains("lr")) c.lr = j.at("lr").get<double>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("max_epochs")) c.max_epochs = j.at("max_epochs").get<std::size_t>();
  if (j.contains("early_stop_patience"))
    c.early_stop_patience = j.at("early_stop_patience").get<std::size_t>();
  if (j.contains("lr_min")) c.lr_min = j.at("lr_min").get<double>();
  if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("loss")) c.loss = j.at("loss").get<std::string>();
  if (c.batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (c.loss != "L1" && c.loss != "MSE")
    throw std::invalid_argument("train config: loss must be L1 or MSE");
  if (c.early_stop_patience > c.max_epochs)
    throw std::invalid_argument("train config: patience must not exceed max_epochs");
  return c;
}

TrainConfig TrainConfig::defaults_for(const std::string& kind) {
  TrainConfig c;
  if (kind == "blastoformer") {
    c.lr = 1e-4;
    c.batch_size = 4;
    c.early_stop_patience = 1000;
  } else if (kind == "fno") {
    c.lr = 1e-4;
    c.batch_size = 32;
    c.early_stop_patience = 100;
  } else if (kind == "cnn") {
    c.lr = 1e-3;
    c.batch_size = 32;
    c.early_stop_patience = 100;
  } else {
    throw std::invalid_argument("unknown model kind '" + kind + "'");
  }
  c.max_epochs = 10000;
  return c;
}

namespace {

Tensor<float> normalized_log_target(const data::Sample& s, const data::NormStats& norm) {
  return data::normalize(data::log_transform(s.pressure), norm);
}

double eval_loss(model::ModelIface<float>& m, const data::Sample& s, const Tensor<float>& target,
                 const std::string& loss) {
  Tape<float> tape;
  tape.set_recording(false);
  ops::Var<float> pred = m.predict(tape, s);
  if (pred->value.shape != target.shape)
    throw std::invalid_argument("train: prediction shape mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = double(pred->value[i]) - double(target[i]);
    acc += loss == "L1" ? std::abs(d) : d * d;
  }
  return acc / double(target.size());
}

}  // namespace

TrainResult train_model(model::ModelIface<float>& m, const data::Dataset& ds,
                        const TrainConfig& cfg) {
  const std::vector<std::size_t> train_idx = ds.indices_of(data::Split::train);
  const std::vector<std::size_t> val_idx = ds.indices_of(data::Split::val);
  if (train_idx.empty() || val_idx.empty())
    throw std::invalid_argument("train: empty train or val split");

  std::vector<Tensor<float>> targets(ds.samples.size());
  for (std::size_t i : train_idx) targets[i] = normalized_log_target(ds.samples[i], ds.norm);
  for (std::size_t i : val_idx) targets[i] = normalized_log_target(ds.samples[i], ds.norm);

  const std::vector<Param<float>*>& params = m.params();
  OptimizerState<float> opt(params, cfg.lr, cfg.weight_decay);
  const std::size_t steps_per_epoch = (train_idx.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t total_steps = std::int64_t(cfg.max_epochs * steps_per_epoch);
  std::int64_t step = 0;

  Rng64 shuffle_rng(cfg.seed);
  TrainResult res;
  res.best_val = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_best = 0;

  std::vector<std::size_t> order = train_idx;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double train_loss_sum = 0;
    double lr_now = cfg.lr;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t bn = std::min(cfg.batch_size, order.size() - b);
      std::vector<double> losses(bn);
      std::vector<std::vector<std::pair<Param<float>*, Tensor<float>>>> grads(bn);
      parallel_for(bn, [&](std::size_t slot) {
        const data::Sample& s = ds.samples[order[b + slot]];
        const Tensor<float>& target = targets[order[b + slot]];
        Tape<float> tape;
        ops::Var<float> pred = m.predict(tape, s);
        ops::Var<float> loss = cfg.loss == "L1" ? ops::loss_l1(tape, pred, target)
                                                : ops::loss_mse(tape, pred, target);
        losses[slot] = double(loss->value[0]);
        grads[slot] = tape.backward_collect(loss);
      });
      zero_grads(params);
      double batch_loss = 0;
      for (std::size_t slot = 0; slot < bn; ++slot) {  // fixed order keeps runs bit-identical
        batch_loss += losses[slot];
        for (auto& [p, g] : grads[slot]) {
          const float scale = 1.0f / float(bn);
          for (std::size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i] * scale;
        }
      }
      batch_loss /= double(bn);
      if (!std::isfinite(batch_loss))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", step " + std::to_string(step));
      train_loss_sum += batch_loss * double(bn);
      lr_now = cosine_lr(step, total_steps, cfg.lr, cfg.lr_min);
      opt.lr = lr_now;
      adamw_step(params, opt);
      ++step;
    }

    std::vector<double> val_losses(val_idx.size());
    parallel_for(val_idx.size(), [&](std::size_t i) {
      val_losses[i] = eval_loss(m, ds.samples[val_idx[i]], targets[val_idx[i]], cfg.loss);
    });
    double val_loss = 0;
    for (double v : val_losses) val_loss += v;
    val_loss /= double(val_idx.size());
    if (!std::isfinite(val_loss))
      throw NumericError("train: non-finite validation loss at epoch " + std::to_string(epoch));

    res.history.push_back(
        {epoch, train_loss_sum / double(train_idx.size()), val_loss, lr_now});
    if (val_loss < res.best_val) {
      res.best_val = val_loss;
      res.best_epoch = epoch;
      res.best_params = params_to_blobs(params);
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= cfg.early_stop_patience) {
        res.stopped_early = true;
        break;
      }
    }
  }
  if (res.best_params.empty()) res.best_params = params_to_blobs(params);
  return res;
}

std::string history_csv(const std::vector<EpochStats>& history) {
  std::string out = "epoch,train_loss,val_loss,lr\n";
  char buf[128];
  for (const EpochStats& e : history) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss,
                  e.lr);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
namespace {

double unscaler_eval_mse(model::UnscalerCnn<float>& u, const scene::Field& log_in,
                         const Tensor<float>& target_scaled) {
  Tape<float> tape;
  tape.set_recording(false);
  ops::Var<float> raw = u.forward_raw(tape, log_in.cast<float>());
  double acc = 0;
  for (std::size_t i = 0; i < target_scaled.size(); ++i) {
    const double d = double(raw->value[i]) - double(target_scaled[i]);
    acc += d * d;
  }
  return acc / double(target_scaled.size());
}

Tensor<float> scale_target(const scene::Field& pa) {
  Tensor<float> t(pa.shape);
  for (std::size_t i = 0; i < pa.size(); ++i)
    t[i] = float(double(pa[i]) / model::kUnscalerOutputScale);
  return t;
}

}  // namespace

TrainResult train_unscaler(model::UnscalerCnn<float>& u, const std::vector<scene::Field>& log_in,
                           const std::vector<scene::Field>& pa_target,
                           const std::vector<std::size_t>& train_idx,
                           const std::vector<std::size_t>& val_idx,
                           const UnscalerTrainConfig& cfg) {
  if (log_in.size() != pa_target.size())
    throw std::invalid_argument("train_unscaler: input/target count mismatch");
  if (train_idx.empty() || val_idx.empty())
    throw std::invalid_argument("train_unscaler: empty split");
  std::vector<Tensor<float>> targets(pa_target.size());
  for (std::size_t i : train_idx) targets[i] = scale_target(pa_target[i]);
  for (std::size_t i : val_idx) targets[i] = scale_target(pa_target[i]);

  const std::vector<Param<float>*>& params = u.params();
  OptimizerState<float> opt(params, cfg.lr, 0.0);
  const std::size_t steps_per_epoch = (train_idx.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t total_steps = std::int64_t(cfg.max_epochs * steps_per_epoch);
  std::int64_t step = 0;

  Rng64 shuffle_rng(cfg.seed);
  TrainResult res;
  res.best_val = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_best = 0;
  std::vector<std::size_t> order = train_idx;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double train_loss_sum = 0;
    double lr_now = cfg.lr;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t bn = std::min(cfg.batch_size, order.size() - b);
      std::vector<double> losses(bn);
      std::vector<std::vector<std::pair<Param<float>*, Tensor<float>>>> grads(bn);
      parallel_for(bn, [&](std::size_t slot) {
        const std::size_t i = order[b + slot];
        Tape<float> tape;
        ops::Var<float> raw = u.forward_raw(tape, log_in[i].cast<float>());
        ops::Var<float> loss = ops::loss_mse(tape, raw, targets[i]);
        losses[slot] = double(loss->value[0]);
        grads[slot] = tape.backward_collect(loss);
      });
      zero_grads(params);
      double batch_loss = 0;
      for (std::size_t slot = 0; slot < bn; ++slot) {
        batch_loss += losses[slot];
        for (auto& [p, g] : grads[slot]) {
          const float scale = 1.0f / float(bn);
          for (std::size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i] * scale;
        }
      }
      batch_loss /= double(bn);
      if (!std::isfinite(batch_loss))
        throw NumericError("train_unscaler: non-finite loss at epoch " + std::to_string(epoch));
      train_loss_sum += batch_loss * double(bn);
      lr_now = cosine_lr(step, total_steps, cfg.lr, cfg.lr_min);
      opt.lr = lr_now;
      adamw_step(params, opt);
      ++step;
    }

    std::vector<double> val_losses(val_idx.size());
    parallel_for(val_idx.size(), [&](std::size_t i) {
      val_losses[i] = unscaler_eval_mse(u, log_in[val_idx[i]], targets[val_idx[i]]);
    });
    double val_loss = 0;
    for (double v : val_losses) val_loss += v;
    val_loss /= double(val_idx.size());

    res.history.push_back(
        {epoch, train_loss_sum / double(train_idx.size()), val_loss, lr_now});
    if (val_loss < res.best_val) {
      res.best_val = val_loss;
      res.best_epoch = epoch;
      res.best_params = params_to_blobs(params);
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= cfg.early_stop_patience) {
        res.stopped_early = true;
        break;
      }
    }
  }
  if (!res.best_params.empty()) blobs_to_params(res.best_params, params);
  return res;
}

double unscaler_overfit_pair(model::UnscalerCnn<float>& u, const scene::Field& log_in,
                             const scene::Field& pa_target, std::size_t steps, double lr) {
  const Tensor<float> target = scale_target(pa_target);
  const std::vector<Param<float>*>& params = u.params();
  OptimizerState<float> opt(params, lr, 0.0);
  double mse = 0;
  for (std::size_t s = 0; s < steps; ++s) {
    Tape<float> tape;
    ops::Var<float> raw = u.forward_raw(tape, log_in.cast<float>());
    ops::Var<float> loss = ops::loss_mse(tape, raw, target);
    mse = double(loss->value[0]);
    zero_grads(params);
    tape.backward(loss);
    opt.lr = cosine_lr(std::int64_t(s), std::int64_t(steps), lr, lr * 0.01);
    adamw_step(params, opt);
  }
  mse = unscaler_eval_mse(u, log_in, target);
  double mean_p2 = 0;
  for (std::size_t i = 0; i < target.size(); ++i) mean_p2 += double(target[i]) * double(target[i]);
  mean_p2 /= double(target.size());
  return mse / mean_p2;
}

// ---------------------------------------------------------------------------
std::unique_ptr<model::ModelIface<float>> build_model(const std::string& kind,
                                                      const nlohmann::json& model_cfg,
                                                      const scene::GridSpec& grid) {
  if (kind == "blastoformer")
    return std::make_unique<model::BlastOFormer<float>>(
        model::BlastOFormerConfig::from_json(model_cfg), grid);
  if (kind == "cnn")
    return std::make_unique<model::CnnModel<float>>(model::CnnConfig::from_json(model_cfg), grid);
  if (kind == "fno")
    return std::make_unique<model::FnoModel<float>>(model::FnoConfig::from_json(model_cfg), grid);
  throw std::invalid_argument("unknown model kind '" + kind + "'");
}

Checkpoint make_checkpoint(const model::ModelIface<float>& m, const scene::GridSpec& grid,
                           const nlohmann::json& optimizer, const data::NormStats& norm,
                           const std::vector<TensorBlob>* params_override,
                           const model::UnscalerCnn<float>* unscaler) {
  Checkpoint c;
  c.model_kind = m.kind();
  c.config = {{"grid", grid_to_json(grid)}, {"model", m.config_json()}};
  c.optimizer = optimizer;
  c.norm = norm;
  c.tensors = params_override ? *params_override : params_to_blobs(m.params());
  if (unscaler) {
    c.config["unscaler"] = unscaler->config().to_json();
    for (TensorBlob& b : params_to_blobs(unscaler->params())) c.tensors.push_back(std::move(b));
  }
  return c;
}

LoadedModel load_model(const Checkpoint& c) {
  return load_model(c, grid_from_json(c.config.at("grid")));
}

LoadedModel load_model(const Checkpoint& c, const scene::GridSpec& grid_override) {
  LoadedModel lm;
  lm.grid = grid_override;
  lm.norm = c.norm;
  lm.model = build_model(c.model_kind, c.config.at("model"), lm.grid);
  blobs_to_params(c.tensors, lm.model->params());
  if (c.has_unscaler()) {
    lm.unscaler = std::make_unique<model::UnscalerCnn<float>>(
        model::UnscalerConfig::from_json(c.config.at("unscaler")));
    blobs_to_params(c.tensors, lm.unscaler->params());
  }
  return lm;
}

MetricsReport metrics_from_fields(const std::string& kind, const std::string& split,
                                  const std::vector<scene::Field>& pred_log,
                                  const std::vector<scene::Field>& pred_pa,
                                  const std::vector<scene::Field>& truth_log,
                                  const std::vector<scene::Field>& truth_pa) {
  MetricsReport r;
  r.model_kind = kind;
  r.split = split;
  r.r2_log = metric_r2(pred_log, truth_log);
  r.mae_log = metric_mae(pred_log, truth_log);
  r.mape_log_pct = metric_mape(pred_log, truth_log);
  r.r2_unscaled = metric_r2(pred_pa, truth_pa);
  r.mae_unscaled_pa = metric_mae(pred_pa, truth_pa);
  r.mape_unscaled_pct = metric_mape(pred_pa, truth_pa);
  for (std::size_t k = 0; k < pred_log.size(); ++k) {
    r.per_sample_mape_log.push_back(metric_mape({pred_log[k]}, {truth_log[k]}));
    r.per_sample_mape_unscaled.push_back(metric_mape({pred_pa[k]}, {truth_pa[k]}));
  }
  return r;
}

scene::Field predict_log_field(model::ModelIface<float>& m, const data::NormStats& norm,
                               const data::Sample& sample) {
  Tape<float> tape;
  tape.set_recording(false);
  ops::Var<float> pred = m.predict(tape, sample);
  scene::Field norm_pred(pred->value.shape, pred->value.data);
  return data::denormalize(norm_pred, norm);
}

MetricsReport evaluate(const Checkpoint& c, const data::Dataset& ds, data::Split split) {
  const std::vector<std::size_t> idx = ds.indices_of(split);
  if (idx.empty()) throw std::invalid_argument("evaluate: empty split");
  LoadedModel lm = load_model(c);
  if (lm.grid.nx != ds.grid.nx || lm.grid.ny != ds.grid.ny)
    throw DataError("evaluate: checkpoint grid does not match dataset grid");

  std::vector<scene::Field> pred_log(idx.size()), truth_log(idx.size());
  std::vector<scene::Field> pred_pa(idx.size()), truth_pa(idx.size());
  parallel_for(idx.size(), [&](std::size_t k) {
    const data::Sample& s = ds.samples[idx[k]];
    scene::Field lp = predict_log_field(*lm.model, lm.norm, s);
    truth_log[k] = data::log_transform(s.pressure);
    truth_pa[k] = s.pressure;
    pred_pa[k] = lm.unscaler ? lm.unscaler->forward(lp) : data::unlog(lp);
    pred_log[k] = std::move(lp);
  });

  MetricsReport r = metrics_from_fields(
      c.model_kind,
      split == data::Split::train ? "train" : split == data::Split::val ? "val" : "test",
      pred_log, pred_pa, truth_log, truth_pa);
  r.param_count = lm.model->param_count();
  r.used_unscaler = lm.unscaler != nullptr;

  // Wall-clock single-forward latency, averaged over >= 100 runs.
  const data::Sample& probe = ds.samples[idx[0]];
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int kRuns = 100;
  for (int i = 0; i < kRuns; ++i) {
    Tape<float> tape;
    tape.set_recording(false);
    lm.model->predict(tape, probe);
  }
  const auto t1 = std::chrono::steady_clock::now();
  r.inference_ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / kRuns;
  return r;
}

double benchmark_inference(const Checkpoint& c, const scene::GridSpec& g, std::size_t runs) {
  if (runs < 10) throw std::invalid_argument("benchmark_inference: need at least 10 runs");
  LoadedModel lm = load_model(c, g);
  data::Sample s;
  s.scenario = scene::sample_scenario(2024);
  s.input = scene::build_model_input(s.scenario, g);
  s.pressure = data::oracle_pressure(s.scenario, g);

  auto once = [&]() {
    Tape<float> tape;
    tape.set_recording(false);
    lm.model->predict(tape, s);
  };
  for (int i = 0; i < 5; ++i) once();
  std::vector<double> ms(runs);
  for (std::size_t i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    once();
    const auto t1 = std::chrono::steady_clock::now();
    ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  std::sort(ms.begin(), ms.end());
  return runs % 2 ? ms[runs / 2] : 0.5 * (ms[runs / 2 - 1] + ms[runs / 2]);
}

}  // namespace bof::harness
