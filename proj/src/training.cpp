#include "ictd/training.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>

#include "ictd/autodiff.hpp"
#include "ictd/constructions.hpp"
#include "ictd/prompt.hpp"

namespace ictd {

void TrainConfig::validate() const {
  if (n < 1) throw ParameterError("n must be at least 1");
  if (d < 1) throw ParameterError("d must be at least 1");
  if (tau < n + 2) throw ParameterError("tau must be at least n + 2");
  if (layers < 1) throw ParameterError("layers must be at least 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("gamma must lie in [0, 1)");
  if (!(alpha >= 0.0)) throw ParameterError("alpha must be non-negative");
  if (!(weight_decay >= 0.0)) throw ParameterError("weight_decay must be non-negative");
  if (task_source != TaskSource::CartPole && states < 3) throw ParameterError("Boyan chains need at least 3 states");
  if (log_every > 0 && eval_tasks < 1) throw ParameterError("eval_tasks must be positive when logging");
}

TransformerParams init_params(const TrainConfig& cfg, SeededRng& rng) {
  const std::size_t dim = 2 * cfg.d + 1;
  const double bound = cfg.init_gain * std::sqrt(6.0 / static_cast<double>(2 * dim));
  TransformerParams params;
  params.shared = cfg.shared;
  params.attn = cfg.attn;
  params.mask = MaskKind::td0();
  params.num_layers = cfg.layers;
  const std::size_t count = cfg.shared ? 1 : cfg.layers;
  for (std::size_t l = 0; l < count; ++l) {
    LayerParams lp{Matrix(dim, dim), Matrix(dim, dim)};
    for (double& x : lp.p.data()) x = rng.uniform(-bound, bound);
    for (double& x : lp.q.data()) x = rng.uniform(-bound, bound);
    params.layers.push_back(std::move(lp));
  }
  return params;
}

void adam_step(Vector& params, std::span<const double> grad, AdamState& state, double alpha, double weight_decay) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (grad.size() != params.size()) throw DimensionError("adam_step: gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  const double decay = 1.0 - alpha * weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] = params[i] * decay - alpha * m_hat / (std::sqrt(v_hat) + eps);
  }
}

Vector flatten(const std::vector<LayerParams>& layers) {
  Vector flat;
  for (const LayerParams& l : layers) {
    flat.insert(flat.end(), l.p.data().begin(), l.p.data().end());
    flat.insert(flat.end(), l.q.data().begin(), l.q.data().end());
  }
  return flat;
}

void unflatten(std::span<const double> flat, std::vector<LayerParams>& layers) {
  std::size_t offset = 0;
  for (LayerParams& l : layers) {
    for (Matrix* m : {&l.p, &l.q}) {
      if (offset + m->size() > flat.size()) throw DimensionError("unflatten: vector too short");
      std::copy(flat.begin() + offset, flat.begin() + offset + m->size(), m->data().begin());
      offset += m->size();
    }
  }
  if (offset != flat.size()) throw DimensionError("unflatten: vector too long");
}

TdUpdate td_semi_gradient(const Prompt& z0, const Prompt& z0_next, double reward, double gamma,
                          const TransformerParams& params) {
  Gradient g = grad_output(z0, params);
  TdUpdate u;
  u.value = g.output;
  u.next_value = forward_output(z0_next, params);
  u.td_error = reward + gamma * u.next_value - u.value;
  u.grad = std::move(g.layers);
  return u;
}

Task sample_task(const TrainConfig& cfg, SeededRng& rng) {
  switch (cfg.task_source) {
    case TaskSource::Boyan: return gen_boyan(cfg.states, cfg.d, cfg.gamma, rng);
    case TaskSource::BoyanRepresentable: return gen_boyan_representable(cfg.states, cfg.d, cfg.gamma, rng);
    case TaskSource::CartPole: return gen_cartpole(cfg.d, cfg.gamma, rng);
  }
  throw ParameterError("unknown task source");
}

MetricRecord evaluate(const TrainConfig& cfg, const TransformerParams& params, const TdReference* td, SeededRng& rng) {
  MetricRecord rec = elementwise_stats(params.layers.front().p, params.layers.front().q, cfg.d);
  const bool finite_tasks = cfg.task_source != TaskSource::CartPole;
  double msve_sum = 0.0, vd_sum = 0.0, iws_sum = 0.0, ss_sum = 0.0;
  for (std::size_t e = 0; e < cfg.eval_tasks; ++e) {
    const Task task = sample_task(cfg, rng);
    const EvalSupport support = eval_support(task, rng);
    const Trajectory traj = sample_trajectory(task, cfg.n, rng);
    const std::span<const Vector> f(traj.features);
    const Prompt context = build_prompt(f.subspan(0, cfg.n), f.subspan(1, cfg.n), traj.rewards, cfg.gamma, f[cfg.n]);
    if (finite_tasks) msve_sum += msve(predict_values(context, params, support.phi), *support.v_true, support.weights);
    if (td) {
      vd_sum += value_difference(params, *td, support, context);
      iws_sum += implicit_weight_similarity(params, *td, support, context);
      ss_sum += sensitivity_similarity(params, *td, support, context);
    }
  }
  const double count = static_cast<double>(cfg.eval_tasks);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rec.msve = finite_tasks ? msve_sum / count : nan;
  rec.vd = td ? vd_sum / count : nan;
  rec.iws = td ? iws_sum / count : nan;
  rec.ss = td ? ss_sum / count : nan;
  return rec;
}

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  const SeededRng master(cfg.seed);
  SeededRng task_rng = master.fork(0);
  SeededRng init_rng = master.fork(1);
  SeededRng eval_rng = master.fork(2);

  TrainResult result;
  result.params = init_params(cfg, init_rng);

  std::optional<TdReference> td;
  if (cfg.log_every > 0 && cfg.compare_to_td) {
    result.td_alpha = fit_alpha_for_vtd(cfg);
    td = make_td_reference(cfg.d, result.td_alpha, cfg.layers);
  }

  Vector flat = flatten(result.params.layers);
  AdamState adam;
  std::size_t update = 0;
  auto log_record = [&](std::size_t task_index) {
    MetricRecord rec = evaluate(cfg, result.params, td ? &*td : nullptr, eval_rng);
    rec.task_index = task_index;
    rec.update_index = update;
    result.records.push_back(rec);
  };

  if (cfg.log_every > 0) log_record(0);
  for (std::size_t i = 0; i < cfg.k; ++i) {
    const Task task = sample_task(cfg, task_rng);
    const Trajectory traj = sample_trajectory(task, cfg.tau + 1, task_rng);
    for (std::size_t t = 0; t + cfg.n < cfg.tau; ++t) {
      const PromptPair pp = sliding_prompts(traj, cfg.n, cfg.gamma, t);
      const TdUpdate u = td_semi_gradient(pp.z0, pp.z0_next, pp.reward, cfg.gamma, result.params);
      // theta += alpha * delta * grad TF is descent on -delta * grad TF.
      Vector g = flatten(u.grad);
      for (double& x : g) x *= -u.td_error;
      adam_step(flat, g, adam, cfg.alpha, cfg.weight_decay);
      unflatten(flat, result.params.layers);
      ++update;
      if (cfg.log_every > 0 && update % cfg.log_every == 0) log_record(i + 1);
    }
    if (!result.params.layers.front().p.all_finite() || !result.params.layers.front().q.all_finite()) {
      throw DivergenceError("training diverged: non-finite parameters after task " + std::to_string(i + 1));
    }
    if (cfg.snapshot_every > 0 && (i + 1) % cfg.snapshot_every == 0) {
      result.snapshots.push_back({i + 1, result.params});
    }
  }
  return result;
}

double td_alpha_gradient(const Prompt& z0, std::size_t d, double alpha, std::size_t layers) {
  const TdReference ref = make_td_reference(d, alpha, layers);
  const Gradient g = grad_output(z0, ref.params);
  // Q_l = alpha * Q^TD(I), so dTF/dalpha = sum_l <dTF/dQ_l, Q^TD(I)>.
  const Matrix unit_q = construct_td(scaled_identities(d, 1.0, 1)).layers.front().q;
  double total = 0.0;
  for (const LayerParams& l : g.layers) {
    for (std::size_t k = 0; k < unit_q.size(); ++k) total += l.q.data()[k] * unit_q.data()[k];
  }
  return total;
}

double fit_alpha_for_vtd(const TrainConfig& cfg, std::uint64_t stream) {
  using Key = std::tuple<std::size_t, std::size_t, std::size_t, double, int, std::size_t, std::size_t, std::size_t, double,
                         std::uint64_t>;
  static std::mutex cache_mutex;
  static std::map<Key, double> cache;
  const Key key{cfg.layers, cfg.n, cfg.d, cfg.gamma, static_cast<int>(cfg.task_source), cfg.states, cfg.tau,
                cfg.alpha_fit_tasks, cfg.alpha, stream};
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }

  // Seeded from the key, not the run seed, so the fitted value is shared by
  // every run with the same shape.
  std::uint64_t seed = 0x5eed0a1fa0000000ULL;
  for (std::uint64_t part : {std::uint64_t(cfg.layers), std::uint64_t(cfg.n), std::uint64_t(cfg.d),
                             std::uint64_t(cfg.task_source), std::uint64_t(cfg.states), std::uint64_t(cfg.tau),
                             std::uint64_t(std::llround(cfg.gamma * 1e9)), stream}) {
    seed ^= part;
    splitmix64(seed);
  }
  SeededRng rng(seed);
  Vector alpha{0.0};
  AdamState adam;
  for (std::size_t i = 0; i < cfg.alpha_fit_tasks; ++i) {
    const Task task = sample_task(cfg, rng);
    const Trajectory traj = sample_trajectory(task, cfg.tau + 1, rng);
    for (std::size_t t = 0; t + cfg.n < cfg.tau; ++t) {
      const PromptPair pp = sliding_prompts(traj, cfg.n, cfg.gamma, t);
      const TdReference ref = make_td_reference(cfg.d, alpha[0], cfg.layers);
      const double value = forward_output(pp.z0, ref.params);
      const double next_value = forward_output(pp.z0_next, ref.params);
      const double delta = pp.reward + cfg.gamma * next_value - value;
      const Vector g{-delta * td_alpha_gradient(pp.z0, cfg.d, alpha[0], cfg.layers)};
      adam_step(alpha, g, adam, cfg.alpha, 0.0);
      if (!(std::abs(alpha[0]) <= 10.0)) {
        throw DivergenceError("fit_alpha_for_vtd: |alpha| exceeded 10");
      }
    }
  }
  std::lock_guard<std::mutex> lock(cache_mutex);
  cache.emplace(key, alpha[0]);
  return alpha[0];
}

}  // namespace ictd
