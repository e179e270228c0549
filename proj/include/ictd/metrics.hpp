// Value-error and parameter-pattern metrics, and the three comparisons
// between a trained transformer and the batch-TD transformer: value
// difference (VD), implicit weight similarity (IWS) and sensitivity
// similarity (SS).

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ictd/attention.hpp"
#include "ictd/mrp.hpp"
#include "ictd/numerics.hpp"
#include "ictd/prompt.hpp"

namespace ictd {

struct MetricRecord {
  std::size_t task_index = 0;    // 1-based task being trained; 0 for the initial parameters
  std::size_t update_index = 0;  // updates applied so far
  double msve = 0.0;
  double p_bottom_right = 0.0;
  double p_avg_abs_others = 0.0;
  double q_trace_left = 0.0;
  double q_trace_right = 0.0;
  double q_avg_abs_others = 0.0;
  double vd = 0.0;
  double iws = 0.0;
  double ss = 0.0;
};

/// States over which metrics are averaged: rows of `phi` with weights summing
/// to one, and true values when they are known.
struct EvalSupport {
  Matrix phi;
  Vector weights;
  std::optional<Vector> v_true;
};

/// Finite task: all states, stationary weights, exact values. CartPole: the
/// distinct tiles visited in a rollout of `rollout` steps, weighted by visit
/// frequency, without true values.
EvalSupport eval_support(const Task& task, SeededRng& rng, std::size_t rollout = 2000);

/// sum_s d(s) (v_hat(s) - v_true(s))^2
double msve(std::span<const double> v_hat, std::span<const double> v_true, std::span<const double> d);

/// TF output with the query replaced by each row of `phi`.
Vector predict_values(const Prompt& context, const TransformerParams& params, const Matrix& phi);

struct VizParams {
  Matrix p;
  Matrix q;
};

/// Each matrix divided by its largest absolute entry; both negated when the
/// bottom-right entry of P is negative. Throws ParameterError on a zero matrix.
VizParams normalize_for_viz(const Matrix& p, const Matrix& q);

/// Fills the five parameter-pattern fields of a record from normalized (P, Q).
MetricRecord elementwise_stats(const Matrix& p, const Matrix& q, std::size_t d);

/// The batch-TD transformer construct_td(alpha I x L) along with its C_l list.
struct TdReference {
  std::vector<Matrix> c_list;
  TransformerParams params;
};

TdReference make_td_reference(std::size_t d, double alpha, std::size_t layers);

/// ||v_TF - v_TD||^2 weighted by the support.
double value_difference(const TransformerParams& theta_tf, const TdReference& td, const EvalSupport& support,
                        const Prompt& context);

/// cos(w_TF, w_TD) with w_TF the weighted least-squares fit of v_TF and w_TD
/// the batch TD(0) oracle's final weight on the same context.
double implicit_weight_similarity(const TransformerParams& theta_tf, const TdReference& td,
                                  const EvalSupport& support, const Prompt& context);

/// Gradient of the output with respect to the query features.
Vector query_gradient(const Prompt& context, const TransformerParams& params, std::span<const double> phi);

/// Weighted average over states of cos(grad_phi TF_TF, grad_phi TF_TD).
double sensitivity_similarity(const TransformerParams& theta_tf, const TdReference& td,
                              const EvalSupport& support, const Prompt& context);

}  // namespace ictd
