// Numerical checks of the constructions: layer-by-layer agreement with the
// batch oracles, the value error of the TD transformer as the context grows,
// and a Monte-Carlo test that the expected single-layer update keeps
// theta*(eta, c, c') inside its family.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ictd/numerics.hpp"

namespace ictd {

enum class EquivalenceKind { TD0, TD0OneLayer, RG, TDLambda, Avg };

std::string to_string(EquivalenceKind k);
EquivalenceKind equivalence_kind_from_string(const std::string& s);

struct EquivalenceConfig {
  EquivalenceKind kind = EquivalenceKind::TD0;
  double lambda = 0.0;  // TDLambda only, in [0, 1]
  std::size_t layers = 40;
  std::size_t n = 20;
  std::size_t d = 4;
  std::size_t seeds = 30;
  double gamma = 0.9;
  std::uint64_t seed = 0;
};

/// abs_diff[s][l] = |y_l + <query, w_l>| for seed s and layer l = 0..L, where
/// y_l is the bottom-right entry of Z_l and w_l the oracle's l-th weight.
struct EquivalenceReport {
  EquivalenceConfig config;
  std::vector<std::vector<double>> abs_diff;

  double max_abs_diff() const;
  /// Largest log10 difference at layer l across seeds (-inf when all are 0).
  double max_log10_at(std::size_t layer) const;
};

/// Random prompts (features and rewards in U(-1,1)) and random
/// preconditioners C_l = I + U(-0.3, 0.3)^{d x d}. The one-layer kind
/// requires layers == 1. Throws ParameterError on an invalid configuration.
EquivalenceReport verify_equivalence(const EquivalenceConfig& cfg);

struct DemoConfig {
  std::vector<std::size_t> grid;  // context lengths, each >= 1
  std::size_t tasks = 300;
  std::size_t states_min = 5;
  std::size_t states_max = 10;
  std::size_t d = 5;
  double gamma = 0.9;
  std::size_t layers = 15;
  double alpha = 1.0;  // C_l = alpha I
  std::uint64_t seed = 0;

  /// 1, 2, ..., 40.
  static std::vector<std::size_t> default_grid();
};

struct DemoRow {
  std::size_t context = 0;
  double mean_msve = 0.0;
  double std_error = 0.0;
};

/// The TD transformer with C_l = alpha I on representable Boyan tasks. For each
/// task one trajectory is drawn; the prompt for context length t uses its
/// first t transitions with query phi_t. MSVE is over all states, weighted by
/// the stationary distribution. per_task[i][g] holds the individual values.
struct DemoResult {
  std::vector<DemoRow> rows;
  std::vector<std::vector<double>> per_task;
};

DemoResult demo_msve_vs_context(const DemoConfig& cfg);

struct InvariantSetConfig {
  double eta = 1.0;
  double c = -1.0;
  double c_prime = 0.0;
  std::size_t n = 30;
  std::size_t d = 4;
  std::size_t states = 10;
  double gamma = 0.9;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  /// Added to P[2d][0] to build a deliberately off-family point.
  double perturb_p = 0.0;
};

struct CoordinateStat {
  std::string name;
  double mean = 0.0;
  double std_error = 0.0;

  /// |mean| <= 4 standard errors.
  bool consistent_with_zero() const;
};

/// Monte-Carlo estimate of the expected update
///   E[(R + gamma TF(Z0') - TF(Z0)) grad TF(Z0)]
/// with Z0, Z0' built from one trajectory S_0..S_{n+2} (no sliding window).
/// off_pattern holds p[0:2d], the reward row of Q's first block, the
/// off-diagonals of both d x d blocks and each diagonal entry's deviation from
/// its block's diagonal mean; on_pattern holds the eta, c and c' directions.
struct InvariantSetReport {
  InvariantSetConfig config;
  std::vector<CoordinateStat> off_pattern;
  std::vector<CoordinateStat> on_pattern;

  bool pass() const;
  double mean_off_pattern_se() const;
};

/// Throws ParameterError when samples < 100.
InvariantSetReport verify_invariant_set(const InvariantSetConfig& cfg);

}  // namespace ictd
