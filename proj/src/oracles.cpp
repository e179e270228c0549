#include "ictd/oracles.hpp"

namespace ictd {

Context extract_context(const Prompt& prompt) {
  const std::size_t d = prompt.d;
  const std::size_t n = prompt.n;
  Context ctx;
  ctx.phi.assign(n, Vector(d));
  ctx.next_phi.assign(n, Vector(d));
  ctx.rewards.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < d; ++i) {
      ctx.phi[j][i] = prompt.z(i, j);
      ctx.next_phi[j][i] = prompt.z(d + i, j);
    }
    ctx.rewards[j] = prompt.z(2 * d, j);
  }
  ctx.query = prompt.query();
  return ctx;
}

namespace {

void check_c_list(const Context& ctx, std::span<const Matrix> c_list) {
  const std::size_t d = ctx.d();
  for (const Matrix& c : c_list) {
    if (c.rows() != d || c.cols() != d) throw DimensionError("oracle: C_l must be d x d");
  }
  if (ctx.phi.size() != ctx.n() || ctx.next_phi.size() != ctx.n()) {
    throw DimensionError("oracle: inconsistent context");
  }
}

double td_error(const Context& ctx, const Vector& w, std::size_t j) {
  return ctx.rewards[j] + dot(w, ctx.next_phi[j]) - dot(w, ctx.phi[j]);
}

// Runs w_{l+1} = w_l + (1/n) C_l g(w_l) for every C_l.
template <typename Direction>
WeightPath iterate(const Context& ctx, std::span<const Matrix> c_list, Direction direction) {
  check_c_list(ctx, c_list);
  const double scale = 1.0 / static_cast<double>(ctx.n());
  WeightPath path{Vector(ctx.d(), 0.0)};
  for (const Matrix& c : c_list) {
    const Vector& w = path.back();
    const Vector g = direction(w);
    path.push_back(axpy(w, scale, mat_vec(c, g)));
  }
  return path;
}

}  // namespace

WeightPath batch_td0(const Context& ctx, std::span<const Matrix> c_list) {
  return iterate(ctx, c_list, [&](const Vector& w) {
    Vector g(ctx.d(), 0.0);
    for (std::size_t j = 0; j < ctx.n(); ++j) g = axpy(g, td_error(ctx, w, j), ctx.phi[j]);
    return g;
  });
}

WeightPath batch_rg(const Context& ctx, std::span<const Matrix> c_list) {
  return iterate(ctx, c_list, [&](const Vector& w) {
    Vector g(ctx.d(), 0.0);
    for (std::size_t j = 0; j < ctx.n(); ++j) {
      const Vector diff = axpy(ctx.phi[j], -1.0, ctx.next_phi[j]);
      g = axpy(g, td_error(ctx, w, j), diff);
    }
    return g;
  });
}

WeightPath batch_td_lambda(const Context& ctx, std::span<const Matrix> c_list, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("TD(lambda) needs lambda in [0, 1]");
  return iterate(ctx, c_list, [&](const Vector& w) {
    Vector g(ctx.d(), 0.0);
    Vector trace(ctx.d(), 0.0);
    for (std::size_t j = 0; j < ctx.n(); ++j) {
      for (std::size_t i = 0; i < ctx.d(); ++i) trace[i] = lambda * trace[i] + ctx.phi[j][i];
      g = axpy(g, td_error(ctx, w, j), trace);
    }
    return g;
  });
}

WeightPath batch_avg_td(const Context& ctx, std::span<const Matrix> c_list) {
  Vector centred(ctx.n());
  double running = 0.0;
  for (std::size_t j = 0; j < ctx.n(); ++j) {
    running += ctx.rewards[j];
    centred[j] = ctx.rewards[j] - running / static_cast<double>(j + 1);
  }
  return iterate(ctx, c_list, [&](const Vector& w) {
    Vector g(ctx.d(), 0.0);
    for (std::size_t j = 0; j < ctx.n(); ++j) {
      const double delta = centred[j] + dot(w, ctx.next_phi[j]) - dot(w, ctx.phi[j]);
      g = axpy(g, delta, ctx.phi[j]);
    }
    return g;
  });
}

WeightPath online_td0(const Trajectory& traj, std::span<const double> alphas, double gamma, const Vector& w0) {
  const std::size_t steps = traj.length();
  if (alphas.size() != 1 && alphas.size() != steps) {
    throw ParameterError("online_td0: need one step size or one per transition");
  }
  for (double a : alphas) {
    if (!(a > 0.0)) throw ParameterError("online_td0: step sizes must be positive");
  }
  WeightPath path{w0};
  for (std::size_t t = 0; t < steps; ++t) {
    const Vector& w = path.back();
    const double alpha = alphas.size() == 1 ? alphas[0] : alphas[t];
    const double delta = traj.rewards[t] + gamma * dot(w, traj.features[t + 1]) - dot(w, traj.features[t]);
    path.push_back(axpy(w, alpha * delta, traj.features[t]));
  }
  return path;
}

}  // namespace ictd
