// Closed-form weight configurations whose forward pass runs a known
// policy-evaluation algorithm: batch TD(0), residual gradient, TD(lambda) (via
// the mask), average-reward TD, plus the single-layer family theta*(eta, c, c').

#pragma once

#include <span>

#include "ictd/attention.hpp"
#include "ictd/numerics.hpp"

namespace ictd {

/// P = diag(0_{2d}, 1); Q has [-C^T, C^T, 0] in its first d rows. One layer per
/// C_l, TD0 mask, linear attention, unshared.
TransformerParams construct_td(std::span<const Matrix> c_list);

/// Single layer, Q with only -C^T in the top-left block.
TransformerParams construct_td_one_layer(const Matrix& c);

/// Q = [[-C^T, C^T, 0], [C^T, -C^T, 0], [0, 0, 0]].
TransformerParams construct_rg(std::span<const Matrix> c_list);

/// construct_td with a TD(lambda) mask.
TransformerParams construct_td_lambda(std::span<const Matrix> c_list, double lambda);

/// Two heads per layer: P1 picks the reward row, P2 the memory row, shared Q
/// as in construct_td padded to 2d+2, and W adding head-1 row 2d and head-2
/// row 2d+1 into the memory row.
TwoHeadParams construct_avg_td(std::span<const Matrix> c_list);

/// P = diag(0_{2d}, eta); Q = c I_d in the top-left block, c' I_d directly
/// below it, zero elsewhere.
TransformerParams theta_star(std::size_t d, double eta, double c, double c_prime);

/// Membership in theta*: every entry outside the two Q blocks and P's
/// bottom-right corner is zero and both Q blocks are scalar multiples of the
/// identity, up to `tol`.
bool in_theta_star(const Matrix& p, const Matrix& q, std::size_t d, double tol = 0.0);

/// L copies of alpha * I_d.
std::vector<Matrix> scaled_identities(std::size_t d, double alpha, std::size_t layers);

}  // namespace ictd
