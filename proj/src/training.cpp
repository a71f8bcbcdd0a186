#include "pgma/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <thread>

namespace pgma::train {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
  if (patience < 1 || (max_epochs > 0 && patience > max_epochs)) {
    throw ConfigError("patience must lie in [1, max_epochs]");
  }
  if (batch_size < 1 || stride < 1) throw ConfigError("batch size and stride must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("validation fraction must lie in (0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_eps > 0.0)) {
    throw ConfigError("Adam hyperparameters out of range");
  }
  if (grad_clip < 0.0) throw ConfigError("gradient clip must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  model.validate();
}

AdamState make_adam_state(const model::ModelParams& params) {
  return {model::zeros_like(params), model::zeros_like(params), 0};
}

void adam_step(model::ModelParams& params, const model::ModelParams& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  auto p = model::param_views(params);
  const auto g = model::param_views(grads);
  auto m = model::param_views(state.m);
  auto v = model::param_views(state.v);
  if (p.size() != g.size() || p.size() != m.size()) throw DataError("Adam state does not match parameters");
  for (const auto& view : g) {
    for (double x : view.span()) {
      if (!std::isfinite(x)) throw NumericError("non-finite gradient in parameter '" + view.name + "'");
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < p.size(); ++k) {
    for (Index e = 0; e < p[k].size(); ++e) {
      const double grad = g[k].data[e];
      m[k].data[e] = beta1 * m[k].data[e] + (1.0 - beta1) * grad;
      v[k].data[e] = beta2 * v[k].data[e] + (1.0 - beta2) * grad * grad;
      const double m_hat = m[k].data[e] / c1;
      const double v_hat = v[k].data[e] / c2;
      p[k].data[e] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

double clip_global_norm(model::ModelParams& grads, double max_norm) {
  const double norm = std::sqrt(model::squared_norm(grads));
  if (max_norm > 0.0 && norm > max_norm) model::scale(grads, max_norm / norm);
  return norm;
}

std::string checksum(const model::ModelParams& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& v : model::param_views(params)) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(v.data);
    for (std::size_t b = 0; b < static_cast<std::size_t>(v.size()) * sizeof(double); ++b) {
      h ^= bytes[b];
      h *= 1099511628211ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Index window_slot(const Eigen::MatrixXd& window, Index absolute_start, Index period, Index slots,
                  bool per_window) {
  if (per_window && window.cols() >= 4) {
    const auto local = spectral::detect_period(window);
    return graph::assign_slot(absolute_start, local.period, slots);
  }
  return graph::assign_slot(absolute_start, period, slots);
}

std::pair<data::WindowBatch, data::WindowBatch> split_validation(const data::WindowBatch& windows,
                                                                 double val_fraction) {
  const Index total = windows.size();
  if (total < 2) throw DataError("need at least 2 windows to hold out a validation split");
  Index val = static_cast<Index>(std::llround(val_fraction * static_cast<double>(total)));
  val = std::clamp<Index>(val, 1, total - 1);
  return {windows.subset(0, total - val), windows.subset(total - val, total)};
}

std::vector<model::Sample> make_samples(const data::WindowBatch& windows, Index time_offset, Index period,
                                        Index slots, bool per_window) {
  std::vector<model::Sample> samples;
  samples.reserve(windows.size());
  for (Index b = 0; b < windows.size(); ++b) {
    const Index slot = window_slot(windows.windows[b], time_offset + windows.starts[b], period, slots, per_window);
    samples.push_back({&windows.windows[b], &windows.targets[b], slot});
  }
  return samples;
}

TrainResult train_on_windows(const data::WindowBatch& train_windows, const data::WindowBatch& val_windows,
                             Index period, const TrainConfig& cfg) {
  cfg.validate();
  if (train_windows.size() < 1 || val_windows.size() < 1) throw DataError("training needs train and validation windows");
  const auto start_time = std::chrono::steady_clock::now();
  const auto& mcfg = cfg.model;
  if (train_windows.sensors != mcfg.sensors || train_windows.window != mcfg.window) {
    throw DataError("window batch does not match the model config");
  }

  TrainResult result;
  result.config = mcfg;
  auto params = model::init_params(mcfg, cfg.seed);
  auto adam = make_adam_state(params);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  const auto train_samples = make_samples(train_windows, 0, period, mcfg.slots, cfg.period_per_window);
  const auto val_samples = make_samples(val_windows, 0, period, mcfg.slots, cfg.period_per_window);

  auto graphs = graph::build_slot_graphs(params.embeddings, mcfg.k);
  TrainReport& report = result.report;
  report.learning_rate = cfg.learning_rate;
  report.initial_val_loss = model::loss_and_gradient(mcfg, params, graphs, val_samples, nullptr, cfg.threads);
  report.best_val_loss = report.initial_val_loss;
  auto best_params = params;
  Index since_best = 0;

  std::vector<std::size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<model::Sample> batch;
  model::ModelParams grad;

  for (Index epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    // Adjacency is frozen for the whole epoch.
    graphs = graph::build_slot_graphs(params.embeddings, mcfg.k);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t k = b; k < end; ++k) batch.push_back(train_samples[order[k]]);
      const double loss = model::loss_and_gradient(mcfg, params, graphs, batch, &grad, cfg.threads);
      loss_sum += loss * static_cast<double>(end - b);
      try {
        if (cfg.grad_clip > 0.0 && model::all_finite(grad)) clip_global_norm(grad, cfg.grad_clip);
        adam_step(params, grad, adam, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
      } catch (const NumericError& e) {
        report.wall_seconds = seconds_since(start_time);
        throw DivergenceError("epoch " + std::to_string(epoch) + ": " + e.what(), report);
      }
    }

    graphs = graph::build_slot_graphs(params.embeddings, mcfg.k);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_loss = model::loss_and_gradient(mcfg, params, graphs, val_samples, nullptr, cfg.threads);
    rec.seconds = seconds_since(epoch_start);
    report.epochs.push_back(rec);
    if (!std::isfinite(rec.val_loss) || !model::all_finite(params)) {
      report.wall_seconds = seconds_since(start_time);
      throw DivergenceError("validation loss diverged at epoch " + std::to_string(epoch), report);
    }
    if (rec.val_loss < report.best_val_loss) {
      report.best_val_loss = rec.val_loss;
      report.best_epoch = epoch;
      best_params = params;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      report.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }

  result.params = std::move(best_params);
  result.graphs = graph::build_slot_graphs(result.params.embeddings, mcfg.k);
  report.checksum = checksum(result.params);
  report.wall_seconds = seconds_since(start_time);
  return result;
}

TrainResult train(const data::SeriesMatrix& normalized_train, const spectral::PeriodProfile& period,
                  const TrainConfig& config) {
  const auto windows = data::make_windows(normalized_train, config.model.window, config.stride);
  const auto [train_w, val_w] = split_validation(windows, config.val_fraction);
  return train_on_windows(train_w, val_w, period.period, config);
}

GridResult grid_search(const data::SeriesMatrix& normalized_train, const spectral::PeriodProfile& period,
                       const TrainConfig& config, const std::vector<double>& learning_rates, int workers) {
  if (learning_rates.empty()) throw ConfigError("learning-rate grid is empty");
  const auto windows = data::make_windows(normalized_train, config.model.window, config.stride);
  const auto [train_w, val_w] = split_validation(windows, config.val_fraction);

  std::vector<GridCell> cells(learning_rates.size());
  std::vector<std::optional<TrainResult>> results(learning_rates.size());
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t c = next++; c < learning_rates.size(); c = next++) {
      auto cfg = config;
      cfg.learning_rate = learning_rates[c];
      cells[c].learning_rate = learning_rates[c];
      try {
        results[c] = train_on_windows(train_w, val_w, period.period, cfg);
        cells[c].ok = true;
        cells[c].report = results[c]->report;
      } catch (const DivergenceError& e) {
        cells[c].error = e.what();
        cells[c].report = e.report();
      } catch (const Error& e) {
        cells[c].error = e.what();
      }
    }
  };
  const int pool_size = std::clamp<int>(workers, 1, static_cast<int>(learning_rates.size()));
  if (pool_size == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < pool_size; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }

  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (!cells[c].ok) continue;
    if (!best) {
      best = c;
      continue;
    }
    const double a = cells[c].report.best_val_loss;
    const double b = cells[*best].report.best_val_loss;
    if (a < b || (a == b && cells[c].learning_rate < cells[*best].learning_rate)) best = c;
  }
  if (!best) throw NumericError("no successful configuration in the learning-rate grid");

  GridResult out;
  out.best_config = config;
  out.best_config.learning_rate = cells[*best].learning_rate;
  out.best = std::move(*results[*best]);
  out.cells = std::move(cells);
  return out;
}

}  // namespace pgma::train
