#include "ictd/prompt.hpp"

#include <stdexcept>
#include <string>

namespace ictd {

Vector Prompt::query() const {
  Vector q(d);
  for (std::size_t i = 0; i < d; ++i) q[i] = z(i, n);
  return q;
}

namespace {

Prompt fill_prompt(std::span<const Vector> phis, std::span<const Vector> next_phis,
                   std::span<const double> rewards, double next_scale,
                   std::span<const double> query, PromptKind kind) {
  const std::size_t n = rewards.size();
  if (n < 1) throw ParameterError("prompt needs at least one context transition");
  if (phis.size() < n || next_phis.size() < n) {
    throw ParameterError("prompt: fewer feature vectors than rewards");
  }
  const std::size_t d = query.size();
  if (d < 1) throw ParameterError("prompt: empty query");
  for (std::size_t j = 0; j < n; ++j) {
    if (phis[j].size() != d || next_phis[j].size() != d) {
      throw ParameterError("prompt: feature dimension mismatch at column " + std::to_string(j));
    }
  }
  const std::size_t rows = kind == PromptKind::Discounted ? 2 * d + 1 : 2 * d + 2;
  Prompt p{Matrix(rows, n + 1), d, n, kind};
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < d; ++i) {
      p.z(i, j) = phis[j][i];
      p.z(d + i, j) = next_scale * next_phis[j][i];
    }
    p.z(2 * d, j) = rewards[j];
  }
  for (std::size_t i = 0; i < d; ++i) p.z(i, n) = query[i];
  return p;
}

}  // namespace

Prompt build_prompt(std::span<const Vector> phis, std::span<const Vector> next_phis,
                    std::span<const double> rewards, double gamma, std::span<const double> query) {
  return fill_prompt(phis, next_phis, rewards, gamma, query, PromptKind::Discounted);
}

Prompt build_avg_reward_prompt(std::span<const Vector> phis, std::span<const Vector> next_phis,
                               std::span<const double> rewards, std::span<const double> query) {
  return fill_prompt(phis, next_phis, rewards, 1.0, query, PromptKind::AverageReward);
}

PromptPair sliding_prompts(const Trajectory& traj, std::size_t n, double gamma, std::size_t t) {
  if (n < 1) throw ParameterError("context length must be at least 1");
  if (traj.length() < t + n + 2) {
    throw std::out_of_range("sliding_prompts: trajectory has " + std::to_string(traj.length()) +
                            " transitions, need " + std::to_string(t + n + 2));
  }
  const std::span<const Vector> f(traj.features);
  const std::span<const double> r(traj.rewards);
  PromptPair out;
  out.z0 = build_prompt(f.subspan(t, n), f.subspan(t + 1, n), r.subspan(t, n), gamma, f[t + n + 1]);
  out.z0_next = build_prompt(f.subspan(t + 1, n), f.subspan(t + 2, n), r.subspan(t + 1, n), gamma,
                             f[t + n + 2]);
  out.reward = r[t + n + 1];
  return out;
}

Prompt query_substitute(const Prompt& prompt, std::span<const double> phi) {
  if (phi.size() != prompt.d) throw ParameterError("query_substitute: feature dimension mismatch");
  Prompt out = prompt;
  for (std::size_t i = 0; i < prompt.d; ++i) out.z(i, prompt.n) = phi[i];
  return out;
}

}  // namespace ictd
