#include "ictd/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ictd/attention.hpp"
#include "ictd/autodiff.hpp"
#include "ictd/constructions.hpp"
#include "ictd/metrics.hpp"
#include "ictd/mrp.hpp"
#include "ictd/oracles.hpp"
#include "ictd/prompt.hpp"

namespace ictd {

std::string to_string(EquivalenceKind k) {
  switch (k) {
    case EquivalenceKind::TD0: return "td0";
    case EquivalenceKind::TD0OneLayer: return "td0-onelayer";
    case EquivalenceKind::RG: return "rg";
    case EquivalenceKind::TDLambda: return "td-lambda";
    case EquivalenceKind::Avg: return "avg";
  }
  return "?";
}

EquivalenceKind equivalence_kind_from_string(const std::string& s) {
  for (EquivalenceKind k : {EquivalenceKind::TD0, EquivalenceKind::TD0OneLayer, EquivalenceKind::RG,
                            EquivalenceKind::TDLambda, EquivalenceKind::Avg}) {
    if (to_string(k) == s) return k;
  }
  throw ParameterError("unknown equivalence kind '" + s + "'");
}

double EquivalenceReport::max_abs_diff() const {
  double worst = 0.0;
  for (const auto& row : abs_diff)
    for (double x : row) worst = std::max(worst, x);
  return worst;
}

double EquivalenceReport::max_log10_at(std::size_t layer) const {
  double worst = 0.0;
  for (const auto& row : abs_diff) worst = std::max(worst, row.at(layer));
  return std::log10(worst);
}

namespace {

double gap(const Matrix& z, std::span<const double> query, std::span<const double> w) {
  return std::abs(z(z.rows() - 1, z.cols() - 1) + dot(query, w));
}

}  // namespace

EquivalenceReport verify_equivalence(const EquivalenceConfig& cfg) {
  if (cfg.n < 1 || cfg.d < 1) throw ParameterError("verify_equivalence: n and d must be positive");
  if (cfg.kind == EquivalenceKind::TDLambda && !(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) {
    throw ParameterError("verify_equivalence: lambda must lie in [0, 1]");
  }
  if (cfg.kind == EquivalenceKind::TD0OneLayer && cfg.layers != 1) {
    throw ParameterError("verify_equivalence: the one-layer construction has exactly one layer");
  }
  if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) throw ParameterError("verify_equivalence: gamma must lie in [0, 1]");

  EquivalenceReport report;
  report.config = cfg;
  const SeededRng master(cfg.seed);
  for (std::size_t s = 0; s < cfg.seeds; ++s) {
    SeededRng rng = master.fork(s);
    std::vector<Vector> phis;
    for (std::size_t j = 0; j <= cfg.n + 1; ++j) phis.push_back(rng.uniform_vector(cfg.d, -1.0, 1.0));
    const Vector rewards = rng.uniform_vector(cfg.n, -1.0, 1.0);
    std::vector<Matrix> cs;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      Matrix c = Matrix::identity(cfg.d);
      for (double& x : c.data()) x += rng.uniform(-0.3, 0.3);
      cs.push_back(std::move(c));
    }
    const std::span<const Vector> f(phis);
    const std::span<const Vector> cur = f.subspan(0, cfg.n), next = f.subspan(1, cfg.n);

    ForwardResult fwd;
    WeightPath path;
    Vector query;
    if (cfg.layers == 0) {
      const Prompt z0 = cfg.kind == EquivalenceKind::Avg
                            ? build_avg_reward_prompt(cur, next, rewards, f[cfg.n + 1])
                            : build_prompt(cur, next, rewards, cfg.gamma, f[cfg.n + 1]);
      fwd.trace.push_back(z0.z);
      path.push_back(Vector(cfg.d, 0.0));
      query = z0.query();
    } else if (cfg.kind == EquivalenceKind::Avg) {
      const Prompt z0 = build_avg_reward_prompt(cur, next, rewards, f[cfg.n + 1]);
      const Context ctx = extract_context(z0);
      fwd = two_head_forward(z0, construct_avg_td(cs));
      path = batch_avg_td(ctx, cs);
      query = ctx.query;
    } else {
      const Prompt z0 = build_prompt(cur, next, rewards, cfg.gamma, f[cfg.n + 1]);
      const Context ctx = extract_context(z0);
      query = ctx.query;
      switch (cfg.kind) {
        case EquivalenceKind::TD0:
          fwd = forward(z0, construct_td(cs));
          path = batch_td0(ctx, cs);
          break;
        case EquivalenceKind::TD0OneLayer:
          fwd = forward(z0, construct_td_one_layer(cs.front()));
          path = batch_td0(ctx, cs);
          break;
        case EquivalenceKind::RG:
          fwd = forward(z0, construct_rg(cs));
          path = batch_rg(ctx, cs);
          break;
        case EquivalenceKind::TDLambda:
          fwd = forward(z0, construct_td_lambda(cs, cfg.lambda));
          path = batch_td_lambda(ctx, cs, cfg.lambda);
          break;
        case EquivalenceKind::Avg: break;
      }
    }
    std::vector<double> row;
    for (std::size_t l = 0; l <= cfg.layers; ++l) row.push_back(gap(fwd.trace[l], query, path[l]));
    report.abs_diff.push_back(std::move(row));
  }
  return report;
}

std::vector<std::size_t> DemoConfig::default_grid() {
  std::vector<std::size_t> g;
  for (std::size_t t = 1; t <= 40; ++t) g.push_back(t);
  return g;
}

DemoResult demo_msve_vs_context(const DemoConfig& cfg) {
  if (cfg.grid.empty() || cfg.tasks < 2) throw ParameterError("demo: need a grid and at least two tasks");
  if (cfg.states_min < 3 || cfg.states_max < cfg.states_min) throw ParameterError("demo: bad state range");
  if (*std::min_element(cfg.grid.begin(), cfg.grid.end()) < 1) throw ParameterError("demo: context lengths start at 1");
  const std::size_t longest = *std::max_element(cfg.grid.begin(), cfg.grid.end());
  const TdReference td = make_td_reference(cfg.d, cfg.alpha, cfg.layers);
  const SeededRng master(cfg.seed);

  DemoResult result;
  for (std::size_t i = 0; i < cfg.tasks; ++i) {
    SeededRng rng = master.fork(i);
    const std::size_t states = cfg.states_min + rng.next_u64() % (cfg.states_max - cfg.states_min + 1);
    const Task task = gen_boyan_representable(states, cfg.d, cfg.gamma, rng);
    const EvalSupport support = eval_support(task, rng);
    const Trajectory traj = sample_trajectory(task, longest, rng);
    const std::span<const Vector> f(traj.features);
    const std::span<const double> r(traj.rewards);
    std::vector<double> values;
    for (std::size_t t : cfg.grid) {
      const Prompt ctx = build_prompt(f.subspan(0, t), f.subspan(1, t), r.subspan(0, t), cfg.gamma, f[t]);
      values.push_back(msve(predict_values(ctx, td.params, support.phi), *support.v_true, support.weights));
    }
    result.per_task.push_back(std::move(values));
  }

  const double count = static_cast<double>(cfg.tasks);
  for (std::size_t g = 0; g < cfg.grid.size(); ++g) {
    double mean = 0.0;
    for (const auto& row : result.per_task) mean += row[g];
    mean /= count;
    double var = 0.0;
    for (const auto& row : result.per_task) var += (row[g] - mean) * (row[g] - mean);
    var /= count - 1.0;
    result.rows.push_back({cfg.grid[g], mean, std::sqrt(var / count)});
  }
  return result;
}

bool CoordinateStat::consistent_with_zero() const { return std::abs(mean) <= 4.0 * std_error; }

bool InvariantSetReport::pass() const {
  return std::all_of(off_pattern.begin(), off_pattern.end(),
                     [](const CoordinateStat& c) { return c.consistent_with_zero(); });
}

double InvariantSetReport::mean_off_pattern_se() const {
  double total = 0.0;
  for (const CoordinateStat& c : off_pattern) total += c.std_error;
  return off_pattern.empty() ? 0.0 : total / static_cast<double>(off_pattern.size());
}

namespace {

std::string entry(const char* m, std::size_t r, std::size_t c) {
  return std::string(m) + "[" + std::to_string(r) + "][" + std::to_string(c) + "]";
}

// Welford accumulator over a fixed set of coordinates.
struct Moments {
  explicit Moments(std::size_t k) : mean(k, 0.0), m2(k, 0.0) {}
  void add(const Vector& x) {
    ++count;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double delta = x[i] - mean[i];
      mean[i] += delta / static_cast<double>(count);
      m2[i] += delta * (x[i] - mean[i]);
    }
  }
  double std_error(std::size_t i) const {
    return std::sqrt(m2[i] / static_cast<double>(count - 1) / static_cast<double>(count));
  }
  std::size_t count = 0;
  Vector mean;
  Vector m2;
};

}  // namespace

InvariantSetReport verify_invariant_set(const InvariantSetConfig& cfg) {
  if (cfg.samples < 100) throw ParameterError("verify_invariant_set: at least 100 samples are needed");
  const std::size_t d = cfg.d;
  TransformerParams theta = theta_star(d, cfg.eta, cfg.c, cfg.c_prime);
  Matrix p = theta.layers[0].p;
  const Matrix& q = theta.layers[0].q;
  p(2 * d, 0) += cfg.perturb_p;

  std::vector<std::string> off_names, on_names{entry("P", 2 * d, 2 * d), "diag_mean(Q[0:d][0:d])",
                                               "diag_mean(Q[d:2d][0:d])"};
  for (std::size_t k = 0; k < 2 * d; ++k) off_names.push_back(entry("P", 2 * d, k));
  for (std::size_t k = 0; k < d; ++k) off_names.push_back(entry("Q", 2 * d, k));
  for (std::size_t block = 0; block < 2; ++block)
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c)
        if (r != c) off_names.push_back(entry("Q", block * d + r, c));
  for (std::size_t block = 0; block < 2; ++block)
    for (std::size_t i = 0; i < d; ++i) off_names.push_back("diag_dev(" + entry("Q", block * d + i, i) + ")");

  Moments off(off_names.size()), on(on_names.size());
  const SeededRng master(cfg.seed);
  for (std::size_t k = 0; k < cfg.samples; ++k) {
    SeededRng rng = master.fork(k);
    const Task task = gen_boyan(cfg.states, d, cfg.gamma, rng);
    const Trajectory traj = sample_trajectory(task, cfg.n + 2, rng);
    const PromptPair pp = sliding_prompts(traj, cfg.n, cfg.gamma, 0);
    const Tf1ClosedForm g = tf1_closed_form(pp.z0, p, q);
    const double next = tf1_closed_form(pp.z0_next, p, q).value;
    const double delta = pp.reward + cfg.gamma * next - g.value;

    Vector x;
    for (double v : g.grad_p_top) x.push_back(delta * v);
    for (double v : g.grad_p_mid) x.push_back(delta * v);
    for (double v : g.grad_q_a) x.push_back(delta * v);
    for (const Matrix* blk : {&g.grad_qa, &g.grad_qa_prime})
      for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c)
          if (r != c) x.push_back(delta * (*blk)(r, c));
    Vector diag_means;
    for (const Matrix* blk : {&g.grad_qa, &g.grad_qa_prime}) {
      double mean = 0.0;
      for (std::size_t i = 0; i < d; ++i) mean += (*blk)(i, i);
      mean /= static_cast<double>(d);
      diag_means.push_back(delta * mean);
      for (std::size_t i = 0; i < d; ++i) x.push_back(delta * ((*blk)(i, i) - mean));
    }
    off.add(x);
    on.add(Vector{delta * g.grad_p_reward, diag_means[0], diag_means[1]});
  }

  InvariantSetReport report;
  report.config = cfg;
  for (std::size_t i = 0; i < off_names.size(); ++i) report.off_pattern.push_back({off_names[i], off.mean[i], off.std_error(i)});
  for (std::size_t i = 0; i < on_names.size(); ++i) report.on_pattern.push_back({on_names[i], on.mean[i], on.std_error(i)});
  return report;
}

}  // namespace ictd
