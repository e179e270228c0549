#include "ictd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ictd/autodiff.hpp"
#include "ictd/constructions.hpp"
#include "ictd/oracles.hpp"

namespace ictd {

EvalSupport eval_support(const Task& task, SeededRng& rng, std::size_t rollout) {
  EvalSupport support;
  if (task.finite()) {
    support.phi = task.features.phi;
    support.weights = stationary_distribution(task.mrp->transition);
    support.v_true = true_value(*task.mrp, task.gamma);
    return support;
  }
  const Trajectory traj = sample_trajectory(task, rollout, rng);
  const CartPoleEnv& env = *task.cartpole;
  std::map<CartPoleEnv::TileKey, std::pair<std::size_t, double>> visits;  // tile -> (first step, count)
  for (std::size_t t = 0; t < traj.cart_states.size(); ++t) {
    auto [it, inserted] = visits.try_emplace(env.tile(traj.cart_states[t]), t, 0.0);
    it->second.second += 1.0;
  }
  std::vector<std::pair<std::size_t, double>> ordered;
  for (const auto& kv : visits) ordered.push_back(kv.second);
  std::sort(ordered.begin(), ordered.end());
  support.phi = Matrix(ordered.size(), task.feature_dim());
  const double total = static_cast<double>(traj.cart_states.size());
  for (std::size_t s = 0; s < ordered.size(); ++s) {
    const Vector& f = traj.features[ordered[s].first];
    for (std::size_t i = 0; i < f.size(); ++i) support.phi(s, i) = f[i];
    support.weights.push_back(ordered[s].second / total);
  }
  return support;
}

double msve(std::span<const double> v_hat, std::span<const double> v_true, std::span<const double> d) {
  if (v_hat.size() != v_true.size() || v_hat.size() != d.size()) throw DimensionError("msve: length mismatch");
  double total = 0.0;
  for (std::size_t s = 0; s < d.size(); ++s) {
    const double e = v_hat[s] - v_true[s];
    total += d[s] * e * e;
  }
  return total;
}

Vector predict_values(const Prompt& context, const TransformerParams& params, const Matrix& phi) {
  Vector v(phi.rows());
  for (std::size_t s = 0; s < phi.rows(); ++s) v[s] = forward_output(query_substitute(context, phi.row(s)), params);
  return v;
}

VizParams normalize_for_viz(const Matrix& p, const Matrix& q) {
  const double pm = p.max_abs();
  const double qm = q.max_abs();
  if (pm == 0.0 || qm == 0.0) throw ParameterError("normalize_for_viz: all-zero parameter matrix");
  VizParams out{p * (1.0 / pm), q * (1.0 / qm)};
  const std::size_t last = p.rows() - 1;
  if (out.p(last, last) < 0.0) {
    out.p *= -1.0;
    out.q *= -1.0;
  }
  return out;
}

MetricRecord elementwise_stats(const Matrix& p, const Matrix& q, std::size_t d) {
  const std::size_t dim = 2 * d + 1;
  if (p.rows() != dim || p.cols() != dim || q.rows() != dim || q.cols() != dim) {
    throw DimensionError("elementwise_stats: parameters must be (2d+1) x (2d+1)");
  }
  const VizParams viz = normalize_for_viz(p, q);
  MetricRecord rec;
  rec.p_bottom_right = viz.p(2 * d, 2 * d);
  double p_others = 0.0;
  for (std::size_t k = 0; k + 1 < viz.p.size(); ++k) p_others += std::abs(viz.p.data()[k]);
  rec.p_avg_abs_others = p_others / static_cast<double>(viz.p.size() - 1);

  double q_others = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      const bool left_diag = i < d && j == i;
      const bool right_diag = i < d && j == d + i;
      if (left_diag) rec.q_trace_left += viz.q(i, j);
      else if (right_diag) rec.q_trace_right += viz.q(i, j);
      else q_others += std::abs(viz.q(i, j));
    }
  }
  rec.q_avg_abs_others = q_others / static_cast<double>(dim * dim - 2 * d);
  return rec;
}

TdReference make_td_reference(std::size_t d, double alpha, std::size_t layers) {
  TdReference ref;
  ref.c_list = scaled_identities(d, alpha, layers);
  ref.params = construct_td(ref.c_list);
  return ref;
}

double value_difference(const TransformerParams& theta_tf, const TdReference& td, const EvalSupport& support,
                        const Prompt& context) {
  const Vector v_tf = predict_values(context, theta_tf, support.phi);
  const Vector v_td = predict_values(context, td.params, support.phi);
  const double norm = weighted_norm(axpy(v_tf, -1.0, v_td), support.weights);
  return norm * norm;
}

double implicit_weight_similarity(const TransformerParams& theta_tf, const TdReference& td,
                                  const EvalSupport& support, const Prompt& context) {
  const Vector v_tf = predict_values(context, theta_tf, support.phi);
  const Vector w_tf = weighted_least_squares(support.phi, v_tf, support.weights);
  const Vector w_td = batch_td0(extract_context(context), td.c_list).back();
  return cosine_similarity(w_tf, w_td);
}

Vector query_gradient(const Prompt& context, const TransformerParams& params, std::span<const double> phi) {
  const Prompt z = query_substitute(context, phi);
  const Gradient g = grad_output(z, params);
  Vector out(context.d);
  for (std::size_t i = 0; i < context.d; ++i) out[i] = g.dz0(i, context.n);
  return out;
}

double sensitivity_similarity(const TransformerParams& theta_tf, const TdReference& td,
                              const EvalSupport& support, const Prompt& context) {
  double total = 0.0;
  for (std::size_t s = 0; s < support.phi.rows(); ++s) {
    const Vector a = query_gradient(context, theta_tf, support.phi.row(s));
    const Vector b = query_gradient(context, td.params, support.phi.row(s));
    total += support.weights[s] * cosine_similarity(a, b);
  }
  return total;
}

}  // namespace ictd
