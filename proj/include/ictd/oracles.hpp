// Iterative reference implementations of the batch TD family and online
// TD(0). Each batch oracle returns w_0 = 0, w_1, ..., w_L, one step per C_l.

#pragma once

#include <span>
#include <vector>

#include "ictd/mrp.hpp"
#include "ictd/numerics.hpp"
#include "ictd/prompt.hpp"

namespace ictd {

/// Context transitions read back from a prompt. `next_phi` is kept exactly as
/// stored (gamma * phi_{j+1} for discounted prompts, phi_{j+1} for
/// average-reward prompts), so extraction is lossless even when gamma = 0.
struct Context {
  std::vector<Vector> phi;
  std::vector<Vector> next_phi;
  Vector rewards;
  Vector query;

  std::size_t n() const { return rewards.size(); }
  std::size_t d() const { return query.size(); }
};

Context extract_context(const Prompt& prompt);

using WeightPath = std::vector<Vector>;

/// w += (1/n) C_l sum_j (R_{j+1} + gamma w'phi_{j+1} - w'phi_j) phi_j
WeightPath batch_td0(const Context& ctx, std::span<const Matrix> c_list);
/// Same TD error, multiplied by (phi_j - gamma phi_{j+1}).
WeightPath batch_rg(const Context& ctx, std::span<const Matrix> c_list);
/// TD error of transition j weighted by the trace e_j = lambda e_{j-1} + phi_j
/// (e_{-1} = 0), i.e. e_j = sum_{k<=j} lambda^{j-k} phi_k.
WeightPath batch_td_lambda(const Context& ctx, std::span<const Matrix> c_list, double lambda);
/// w += (1/n) C_l sum_j (R_j - rbar_j + w'phi_j - w'phi_{j-1}) phi_{j-1} with
/// rbar_j the running mean of R_1..R_j. Expects an undiscounted context.
WeightPath batch_avg_td(const Context& ctx, std::span<const Matrix> c_list);

/// Linear TD(0) along a trajectory. `alphas` holds one step size per
/// transition, or a single value used for all. Returns w_0..w_T.
WeightPath online_td0(const Trajectory& traj, std::span<const double> alphas, double gamma, const Vector& w0);

}  // namespace ictd
