#include "ictd/mrp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ictd {

void FiniteMrp::validate() const {
  const std::size_t m = states();
  if (transition.rows() != m || transition.cols() != m || reward.size() != m) {
    throw DimensionError("FiniteMrp: inconsistent sizes");
  }
  double total = 0.0;
  for (double p : p0) {
    if (p < 0.0) throw ParameterError("FiniteMrp: negative initial probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ParameterError("FiniteMrp: p0 does not sum to 1");
  for (std::size_t s = 0; s < m; ++s) {
    double row = 0.0;
    for (double p : transition.row(s)) {
      if (p < 0.0) throw ParameterError("FiniteMrp: negative transition probability");
      row += p;
    }
    if (std::abs(row - 1.0) > 1e-12) throw ParameterError("FiniteMrp: transition row does not sum to 1");
  }
}

std::string to_string(TaskSource s) {
  switch (s) {
    case TaskSource::Boyan: return "boyan";
    case TaskSource::BoyanRepresentable: return "boyan-representable";
    case TaskSource::CartPole: return "cartpole";
  }
  return "unknown";
}

TaskSource task_source_from_string(const std::string& s) {
  if (s == "boyan") return TaskSource::Boyan;
  if (s == "boyan-representable") return TaskSource::BoyanRepresentable;
  if (s == "cartpole") return TaskSource::CartPole;
  throw ParameterError("unknown task source '" + s + "'");
}

std::size_t Task::feature_dim() const {
  return cartpole ? cartpole->feature_dim() : features.dim();
}

// ---------------------------------------------------------------------------
// Boyan's chain

namespace {

Vector normalized_uniform(std::size_t m, SeededRng& rng) {
  Vector z = rng.uniform_vector(m, 0.0, 1.0);
  double total = 0.0;
  for (double x : z) total += x;
  for (double& x : z) x /= total;
  return z;
}

// Chain structure shared by both generators: i -> i+1 w.p. eps, i -> i+2
// w.p. 1-eps; m-2 -> m-1 surely; the last row is a random distribution.
Matrix boyan_transitions(std::size_t m, SeededRng& rng) {
  Matrix p(m, m);
  for (std::size_t i = 0; i + 2 < m; ++i) {
    const double eps = rng.uniform_open();
    p(i, i + 1) = eps;
    p(i, i + 2) = 1.0 - eps;
  }
  p(m - 2, m - 1) = 1.0;
  const Vector z = normalized_uniform(m, rng);
  for (std::size_t j = 0; j < m; ++j) p(m - 1, j) = z[j];
  return p;
}

Matrix random_features(std::size_t m, std::size_t d, SeededRng& rng) {
  Matrix phi(m, d);
  for (double& x : phi.data()) x = rng.uniform(-1.0, 1.0);
  return phi;
}

void check_boyan_args(std::size_t m, std::size_t d) {
  if (m < 3) throw ParameterError("Boyan chain needs at least 3 states");
  if (d < 1) throw ParameterError("feature dimension must be positive");
}

}  // namespace

Task gen_boyan(std::size_t m, std::size_t d, double gamma, SeededRng& rng) {
  check_boyan_args(m, d);
  Task task;
  task.source = TaskSource::Boyan;
  task.gamma = gamma;
  task.seed = rng.seed();
  task.features.phi = random_features(m, d, rng);
  FiniteMrp mrp;
  mrp.p0 = normalized_uniform(m, rng);
  mrp.reward = rng.uniform_vector(m, -1.0, 1.0);
  mrp.transition = boyan_transitions(m, rng);
  task.mrp = std::move(mrp);
  return task;
}

Task gen_boyan_representable(std::size_t m, std::size_t d, double gamma, SeededRng& rng) {
  check_boyan_args(m, d);
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ParameterError("gamma must lie in [0, 1)");
  Task task;
  task.source = TaskSource::BoyanRepresentable;
  task.gamma = gamma;
  task.seed = rng.seed();
  Vector w_star = rng.uniform_vector(d, -1.0, 1.0);
  task.features.phi = random_features(m, d, rng);
  const Vector v = mat_vec(task.features.phi, w_star);
  FiniteMrp mrp;
  mrp.p0 = normalized_uniform(m, rng);
  mrp.transition = boyan_transitions(m, rng);
  // r = (I - gamma P) v
  const Vector pv = mat_vec(mrp.transition, v);
  mrp.reward = axpy(v, -gamma, pv);
  task.mrp = std::move(mrp);
  task.w_star = std::move(w_star);
  return task;
}

// ---------------------------------------------------------------------------
// CartPole

CartPoleEnv::CartPoleEnv(CartPolePhysics physics, double epsilon, std::size_t feature_dim,
                         std::uint64_t oracle_seed, TileCoding tiles)
    : physics_(physics),
      epsilon_(epsilon),
      feature_dim_(feature_dim),
      oracle_seed_(oracle_seed),
      tiles_(tiles) {
  const auto& p = physics_;
  if (!(p.cart_mass > 0 && p.pole_mass > 0 && p.gravity > 0 && p.pole_length > 0 && p.tau > 0 &&
        p.force > 0)) {
    throw ParameterError("CartPole physics parameters must be strictly positive");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ParameterError("CartPole epsilon must lie in (0, 1)");
  if (feature_dim == 0) throw ParameterError("feature dimension must be positive");
  for (double w : tiles_.widths)
    if (!(w > 0.0)) throw ParameterError("tile widths must be positive");
}

CartPoleEnv::State CartPoleEnv::sample_initial(SeededRng& rng) const {
  State s;
  for (double& x : s) x = rng.uniform(-0.05, 0.05);
  return s;
}

CartPoleEnv::State CartPoleEnv::integrate(const State& s, int action) const {
  const auto& p = physics_;
  const double total_mass = p.cart_mass + p.pole_mass;
  const double polemass_length = p.pole_mass * p.pole_length;
  const double force = action == 1 ? p.force : -p.force;
  const auto [x, x_dot, theta, theta_dot] = s;
  const double costh = std::cos(theta);
  const double sinth = std::sin(theta);
  const double temp = (force + polemass_length * theta_dot * theta_dot * sinth) / total_mass;
  const double theta_acc = (p.gravity * sinth - costh * temp) /
                           (p.pole_length * (4.0 / 3.0 - p.pole_mass * costh * costh / total_mass));
  const double x_acc = temp - polemass_length * theta_acc * costh / total_mass;
  // semi-implicit Euler: velocities first, then positions with the new velocities
  const double new_x_dot = x_dot + p.tau * x_acc;
  const double new_theta_dot = theta_dot + p.tau * theta_acc;
  return {x + p.tau * new_x_dot, new_x_dot, theta + p.tau * new_theta_dot, new_theta_dot};
}

bool CartPoleEnv::terminal(const State& s) const {
  return std::abs(s[0]) > kPositionThreshold || std::abs(s[2]) > kAngleThreshold;
}

CartPoleEnv::State CartPoleEnv::step(const State& s, SeededRng& rng, bool* reset) const {
  const int action = rng.uniform() < epsilon_ ? 1 : 0;
  State next = integrate(s, action);
  const bool done = terminal(next);
  if (done) next = sample_initial(rng);
  if (reset) *reset = done;
  return next;
}

CartPoleEnv::TileKey CartPoleEnv::tile(const State& s) const {
  TileKey key;
  for (std::size_t i = 0; i < 4; ++i) {
    key[i] = static_cast<std::int64_t>(std::floor(s[i] / tiles_.widths[i]));
  }
  return key;
}

CartPoleEnv::TileValue CartPoleEnv::lookup(const State& s) const {
  const TileKey key = tile(s);
  std::lock_guard<std::mutex> lock(memo_mutex_);
  auto it = memo_.find(key);
  if (it != memo_.end()) return it->second;
  std::uint64_t mix = oracle_seed_;
  for (std::int64_t k : key) {
    mix ^= static_cast<std::uint64_t>(k) + 0x9e3779b97f4a7c15ULL + (mix << 6) + (mix >> 2);
    splitmix64(mix);
  }
  SeededRng rng(mix);
  TileValue value{rng.uniform(-1.0, 1.0), rng.uniform_vector(feature_dim_, -1.0, 1.0)};
  memo_.emplace(key, value);
  return value;
}

double CartPoleEnv::reward(const State& s) const { return lookup(s).reward; }
Vector CartPoleEnv::feature(const State& s) const { return lookup(s).phi; }

std::size_t CartPoleEnv::memo_size() const {
  std::lock_guard<std::mutex> lock(memo_mutex_);
  return memo_.size();
}

Task gen_cartpole(std::size_t d, double gamma, SeededRng& rng, TileCoding tiles) {
  if (d < 1) throw ParameterError("feature dimension must be positive");
  CartPolePhysics phys;
  phys.cart_mass = rng.uniform(0.5, 1.5);
  phys.pole_mass = rng.uniform(0.5, 1.5);
  phys.pole_length = rng.uniform(0.5, 1.5);
  phys.gravity = rng.uniform(7.0, 12.0);
  phys.tau = rng.uniform(0.01, 0.05);
  phys.force = rng.uniform(5.0, 15.0);
  const double eps = rng.uniform_open();
  const std::uint64_t oracle_seed = rng.next_u64();
  Task task;
  task.source = TaskSource::CartPole;
  task.gamma = gamma;
  task.seed = rng.seed();
  task.cartpole = std::make_shared<const CartPoleEnv>(phys, eps, d, oracle_seed, tiles);
  return task;
}

// ---------------------------------------------------------------------------
// Sampling and ground truth

Trajectory sample_trajectory(const Task& task, std::size_t length, SeededRng& rng) {
  if (length < 1) throw ParameterError("trajectory length must be at least 1");
  Trajectory traj;
  traj.features.reserve(length + 1);
  traj.rewards.reserve(length);
  if (task.finite()) {
    const FiniteMrp& mrp = *task.mrp;
    std::size_t s = rng.categorical(mrp.p0);
    traj.states.push_back(s);
    traj.features.push_back(task.features.feature(s));
    for (std::size_t t = 0; t < length; ++t) {
      traj.rewards.push_back(mrp.reward[s]);
      s = rng.categorical(mrp.transition.row(s));
      traj.states.push_back(s);
      traj.features.push_back(task.features.feature(s));
    }
    return traj;
  }
  if (!task.cartpole) throw ParameterError("task has neither a finite MRP nor a CartPole environment");
  const CartPoleEnv& env = *task.cartpole;
  CartPoleEnv::State s = env.sample_initial(rng);
  traj.cart_states.push_back(s);
  traj.features.push_back(env.feature(s));
  for (std::size_t t = 0; t < length; ++t) {
    traj.rewards.push_back(env.reward(s));
    bool reset = false;
    s = env.step(s, rng, &reset);
    if (reset) ++traj.resets;
    traj.cart_states.push_back(s);
    traj.features.push_back(env.feature(s));
  }
  return traj;
}

namespace {

// Every state reachable from every other (on the positive-probability graph).
bool irreducible(const Matrix& p) {
  const std::size_t m = p.rows();
  auto reach_all = [&](bool transpose) {
    std::vector<char> seen(m, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v = 0; v < m; ++v) {
        const double w = transpose ? p(v, u) : p(u, v);
        if (w > 0.0 && !seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  return m > 0 && reach_all(false) && reach_all(true);
}

}  // namespace

Vector stationary_distribution(const Matrix& transition) {
  const std::size_t m = transition.rows();
  if (transition.cols() != m) throw DimensionError("stationary_distribution: matrix must be square");
  if (!irreducible(transition)) {
    throw ConvergenceError("stationary_distribution: chain is reducible, no unique stationary law",
                           std::numeric_limits<double>::infinity());
  }
  Vector d(m, 1.0 / static_cast<double>(m));
  Vector next(m);
  double residual = 0.0;
  for (int iter = 0; iter < 100000; ++iter) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto row = transition.row(i);
      for (std::size_t j = 0; j < m; ++j) next[j] += d[i] * row[j];
    }
    double total = 0.0;
    for (double x : next) total += x;
    residual = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      next[j] /= total;
      residual = std::max(residual, std::abs(next[j] - d[j]));
    }
    d.swap(next);
    if (residual < 1e-12) return d;
  }
  std::ostringstream os;
  os << "stationary_distribution: power iteration did not converge (residual " << residual << ")";
  throw ConvergenceError(os.str(), residual);
}

Vector true_value(const FiniteMrp& mrp, double gamma) {
  const std::size_t m = mrp.states();
  Matrix a = Matrix::identity(m) - gamma * mrp.transition;
  Vector v = solve(a, mrp.reward);
  const Vector av = mat_vec(a, v);
  double residual = 0.0;
  for (std::size_t i = 0; i < m; ++i) residual = std::max(residual, std::abs(av[i] - mrp.reward[i]));
  if (residual > 1e-9) throw SingularityError("true_value: Bellman residual above 1e-9", residual);
  return v;
}

}  // namespace ictd
