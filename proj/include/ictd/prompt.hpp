// Prompt matrices Z0 for in-context policy evaluation.
//
// Columns are 0-based here. Context column j (j = 0..n-1) holds transition
// j+1 in the usual 1-based notation: (phi_j; gamma*phi_{j+1}; R_{j+1}). The
// query column is index n. Rows: [0, d) current features, [d, 2d) next
// features, 2d reward, and for average-reward prompts 2d+1 is the memory row.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ictd/mrp.hpp"
#include "ictd/numerics.hpp"

namespace ictd {

enum class PromptKind { Discounted, AverageReward };

struct Prompt {
  Matrix z;
  std::size_t d = 0;
  std::size_t n = 0;
  PromptKind kind = PromptKind::Discounted;

  std::size_t reward_row() const { return 2 * d; }
  std::size_t query_col() const { return n; }
  Vector query() const;
};

/// phis holds phi_0..phi_{n-1} (extra trailing entries are ignored),
/// next_phis holds phi_1..phi_n, rewards R_1..R_n.
Prompt build_prompt(std::span<const Vector> phis, std::span<const Vector> next_phis,
                    std::span<const double> rewards, double gamma, std::span<const double> query);

/// Algorithm 1 window at offset t: context transitions t..t+n-1, query
/// phi_{t+n+1}; the shifted prompt uses t+1..t+n with query phi_{t+n+2};
/// reward is R_{t+n+2}.
struct PromptPair {
  Prompt z0;
  Prompt z0_next;
  double reward = 0.0;
};

/// Requires at least t+n+2 transitions; throws std::out_of_range otherwise.
PromptPair sliding_prompts(const Trajectory& traj, std::size_t n, double gamma, std::size_t t);

/// Undiscounted middle block and a zero memory row; shape (2d+2) x (n+1).
Prompt build_avg_reward_prompt(std::span<const Vector> phis, std::span<const Vector> next_phis,
                               std::span<const double> rewards, std::span<const double> query);

/// Copy of `prompt` with the query features replaced.
Prompt query_substitute(const Prompt& prompt, std::span<const double> phi);

}  // namespace ictd
