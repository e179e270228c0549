// Markov reward processes, feature maps and the random task generators
// (Boyan's chain, representable Boyan's chain, CartPole with tile coding).

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ictd/numerics.hpp"

namespace ictd {

/// Finite MRP (p0, P, r). States are 0-based.
struct FiniteMrp {
  Vector p0;
  Matrix transition;  // row-stochastic m x m
  Vector reward;      // r(s), received on leaving s

  std::size_t states() const { return p0.size(); }
  /// Throws ParameterError if any probability law is violated (tolerance 1e-12).
  void validate() const;
};

/// Row s of `phi` is phi(s)^T.
struct FeatureMap {
  Matrix phi;

  std::size_t dim() const { return phi.cols(); }
  Vector feature(std::size_t s) const { return Vector(phi.row(s).begin(), phi.row(s).end()); }
};

struct CartPolePhysics {
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double gravity = 9.8;
  double pole_length = 0.5;  // half-length, as in the classic formulation
  double tau = 0.02;         // integration step
  double force = 10.0;
};

/// Single tiling over (position, velocity, angle, angular velocity).
struct TileCoding {
  std::array<double, 4> widths{0.48, 0.5, 0.0418, 0.5};
};

/// CartPole under a fixed random policy that pushes right with probability
/// epsilon, extended to an infinite horizon by resetting from
/// p0 = U(-0.05, 0.05)^4 whenever the pole falls (|angle| > 12 deg) or the cart
/// leaves [-2.4, 2.4].
///
/// Each tile gets a reward in U(-1,1) and a feature in U(-1,1)^d. Values are
/// derived from (oracle seed, tile index) and memoized, so they are a pure
/// function of the tile.
class CartPoleEnv {
 public:
  using State = std::array<double, 4>;
  using TileKey = std::array<std::int64_t, 4>;

  static constexpr double kPositionThreshold = 2.4;
  static constexpr double kAngleThreshold = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;

  CartPoleEnv(CartPolePhysics physics, double epsilon, std::size_t feature_dim,
              std::uint64_t oracle_seed, TileCoding tiles = {});

  const CartPolePhysics& physics() const { return physics_; }
  double epsilon() const { return epsilon_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::uint64_t oracle_seed() const { return oracle_seed_; }
  const TileCoding& tiles() const { return tiles_; }

  State sample_initial(SeededRng& rng) const;
  /// One semi-implicit Euler step under action (0 = left, 1 = right).
  State integrate(const State& s, int action) const;
  bool terminal(const State& s) const;
  /// Samples the action, integrates, and resets if the result is terminal.
  /// `reset` is set when a reset happened.
  State step(const State& s, SeededRng& rng, bool* reset = nullptr) const;

  TileKey tile(const State& s) const;
  double reward(const State& s) const;
  Vector feature(const State& s) const;
  std::size_t memo_size() const;

 private:
  struct TileValue {
    double reward;
    Vector phi;
  };
  TileValue lookup(const State& s) const;

  CartPolePhysics physics_;
  double epsilon_;
  std::size_t feature_dim_;
  std::uint64_t oracle_seed_;
  TileCoding tiles_;
  mutable std::mutex memo_mutex_;
  mutable std::map<TileKey, TileValue> memo_;
};

enum class TaskSource { Boyan, BoyanRepresentable, CartPole };

std::string to_string(TaskSource s);
TaskSource task_source_from_string(const std::string& s);

/// A policy-evaluation task. Finite tasks carry (mrp, features); CartPole
/// tasks carry the environment with its tile oracles.
struct Task {
  TaskSource source = TaskSource::Boyan;
  double gamma = 0.9;
  std::optional<FiniteMrp> mrp;
  FeatureMap features;
  std::shared_ptr<const CartPoleEnv> cartpole;
  std::optional<Vector> w_star;
  std::uint64_t seed = 0;

  bool finite() const { return mrp.has_value(); }
  std::size_t feature_dim() const;
};

/// Boyan's chain with randomized p0, transitions, rewards and features.
Task gen_boyan(std::size_t m, std::size_t d, double gamma, SeededRng& rng);
/// Boyan's chain whose reward is chosen so that v = Phi w* exactly.
Task gen_boyan_representable(std::size_t m, std::size_t d, double gamma, SeededRng& rng);
Task gen_cartpole(std::size_t d, double gamma, SeededRng& rng, TileCoding tiles = {});

/// S_0..S_length, R_1..R_length with R_{t+1} = r(S_t).
struct Trajectory {
  std::vector<Vector> features;
  Vector rewards;
  std::vector<std::size_t> states;               // finite tasks
  std::vector<CartPoleEnv::State> cart_states;   // CartPole tasks
  std::size_t resets = 0;

  std::size_t length() const { return rewards.size(); }
};

Trajectory sample_trajectory(const Task& task, std::size_t length, SeededRng& rng);

/// Power iteration to an infinity-norm residual of 1e-12 (max 1e5 sweeps).
/// Throws ConvergenceError for reducible chains or when the iteration stalls.
Vector stationary_distribution(const Matrix& transition);

/// Solves (I - gamma P) v = r; residual checked at 1e-9.
Vector true_value(const FiniteMrp& mrp, double gamma);

}  // namespace ictd
