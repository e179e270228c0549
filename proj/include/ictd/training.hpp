// Multi-task TD pretraining of a linear or softmax attention transformer,
// the Adam optimizer, parameter initialization, and the scalar step-size fit
// that defines the batch-TD reference transformer.

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ictd/attention.hpp"
#include "ictd/metrics.hpp"
#include "ictd/mrp.hpp"

namespace ictd {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t n = 30;
  std::size_t tau = 347;
  std::size_t k = 4000;
  double alpha = 0.001;
  double gamma = 0.9;
  std::size_t layers = 3;
  bool shared = true;
  AttentionKind attn = AttentionKind::Linear;
  std::size_t d = 4;
  double weight_decay = 1e-6;
  std::uint64_t seed = 0;
  TaskSource task_source = TaskSource::Boyan;
  std::size_t states = 10;  // Boyan chain size
  double init_gain = 0.1;
  std::size_t log_every = 3170;        // updates between metric records (0 disables)
  std::size_t eval_tasks = 5;          // tasks averaged per metric record
  std::size_t snapshot_every = 40;     // tasks between parameter snapshots (0 disables)
  std::size_t alpha_fit_tasks = 200;   // tasks used by fit_alpha_for_vtd
  bool compare_to_td = true;           // compute VD / IWS / SS

  /// Throws ParameterError when the configuration cannot run.
  void validate() const;
  std::size_t updates_per_task() const { return tau - n; }
};

/// Xavier-uniform entries in +-gain * sqrt(6 / (fan_in + fan_out)).
TransformerParams init_params(const TrainConfig& cfg, SeededRng& rng);

/// Adam moments for a flat parameter vector.
struct AdamState {
  Vector m;
  Vector v;
  std::size_t step = 0;
};

/// One Adam step (beta1 0.9, beta2 0.999, eps 1e-8) on the descent direction
/// `grad`, with decoupled weight decay theta *= (1 - alpha * weight_decay).
void adam_step(Vector& params, std::span<const double> grad, AdamState& state, double alpha, double weight_decay);

/// Flat views of a parameter list, P then Q for each entry.
Vector flatten(const std::vector<LayerParams>& layers);
void unflatten(std::span<const double> flat, std::vector<LayerParams>& layers);

/// TD error and the semi-gradient for one window: the gradient is taken
/// through TF(Z0) only.
struct TdUpdate {
  double td_error = 0.0;
  double value = 0.0;
  double next_value = 0.0;
  std::vector<LayerParams> grad;  // d TF(Z0) / d theta
};

TdUpdate td_semi_gradient(const Prompt& z0, const Prompt& z0_next, double reward, double gamma,
                          const TransformerParams& params);

/// Task generator matching the config's source and sizes.
Task sample_task(const TrainConfig& cfg, SeededRng& rng);

struct Snapshot {
  std::size_t task_index = 0;
  TransformerParams params;
};

struct TrainResult {
  TransformerParams params;
  std::vector<MetricRecord> records;
  std::vector<Snapshot> snapshots;
  double td_alpha = 0.0;  // alpha of the batch-TD reference (0 if unused)
};

/// Runs the multi-task TD loop. Each of the k tasks contributes tau - n
/// updates. Metric records use their own random stream, so they do not
/// change the training trajectory.
TrainResult train(const TrainConfig& cfg);

/// Fits the scalar alpha of construct_td(alpha I x L) by the same TD loop with
/// alpha as the only parameter, starting from 0. Depends only on
/// (layers, n, d, gamma, task source, sizes, alpha_fit_tasks) and is cached
/// per process. `stream` selects an independent task sequence. Throws
/// DivergenceError when |alpha| exceeds 10.
double fit_alpha_for_vtd(const TrainConfig& cfg, std::uint64_t stream = 0);

/// d TF / d alpha for construct_td(alpha I x L) on one prompt.
double td_alpha_gradient(const Prompt& z0, std::size_t d, double alpha, std::size_t layers);

/// Metric record for `params` averaged over cfg.eval_tasks fresh tasks.
MetricRecord evaluate(const TrainConfig& cfg, const TransformerParams& params, const TdReference* td, SeededRng& rng);

}  // namespace ictd
