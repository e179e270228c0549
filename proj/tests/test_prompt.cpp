#include "doctest.h"
#include "helpers.hpp"
#include "ictd/prompt.hpp"

using namespace ictd;

namespace {

Trajectory random_trajectory(std::size_t length, std::size_t d, SeededRng& rng) {
  Trajectory traj;
  for (std::size_t t = 0; t <= length; ++t) traj.features.push_back(rng.uniform_vector(d, -1, 1));
  traj.rewards = rng.uniform_vector(length, -1, 1);
  return traj;
}

}  // namespace

TEST_CASE("build_prompt small example") {
  const std::vector<Vector> phis{{1, 0}};
  const std::vector<Vector> next{{0, 1}};
  const Vector rewards{1.0};
  const Prompt p = build_prompt(phis, next, rewards, 0.9, Vector{1, 0});
  const Matrix expected{{1, 1}, {0, 0}, {0, 0}, {0.9, 0}, {1, 0}};
  CHECK(p.z == expected);
  CHECK(p.d == 2);
  CHECK(p.n == 1);
}

TEST_CASE("gamma = 0 zeroes the middle block") {
  SeededRng rng(1);
  const Trajectory traj = random_trajectory(6, 3, rng);
  const std::span<const Vector> f(traj.features);
  const Prompt p = build_prompt(f.subspan(0, 6), f.subspan(1, 6), traj.rewards, 0.0, f[6]);
  for (std::size_t i = 3; i < 6; ++i)
    for (std::size_t j = 0; j <= 6; ++j) CHECK(p.z(i, j) == 0.0);
}

TEST_CASE("prompt columns re-read from a trajectory") {
  SeededRng rng(2);
  const std::size_t d = 4, n = 7;
  const Trajectory traj = random_trajectory(n, d, rng);
  const std::span<const Vector> f(traj.features);
  const Prompt p = build_prompt(f.subspan(0, n), f.subspan(1, n), traj.rewards, 0.9, f[n]);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(p.z(i, j) == traj.features[j][i]);
      CHECK(p.z(d + i, j) == 0.9 * traj.features[j + 1][i]);
    }
    CHECK(p.z(2 * d, j) == traj.rewards[j]);
  }
  for (std::size_t i = d; i <= 2 * d; ++i) CHECK(p.z(i, n) == 0.0);
}

TEST_CASE("build_prompt rejects inconsistent input") {
  const std::vector<Vector> phis{{1, 0}};
  const std::vector<Vector> bad{{0, 1, 2}};
  CHECK_THROWS_AS(build_prompt(phis, bad, Vector{1.0}, 0.9, Vector{1, 0}), ParameterError);
  CHECK_THROWS_AS(build_prompt(phis, phis, Vector{}, 0.9, Vector{1, 0}), ParameterError);
}

TEST_CASE("sliding_prompts follows the training-loop transcription") {
  SeededRng rng(3);
  const std::size_t d = 3, n = 5;
  const double gamma = 0.8;
  const Trajectory traj = random_trajectory(20, d, rng);
  for (std::size_t t : {0u, 4u}) {
    const PromptPair pp = sliding_prompts(traj, n, gamma, t);
    // Literal transcription: column j is (phi_{t+j}, gamma phi_{t+j+1}, R_{t+j+1}),
    // rewards are stored 0-based so R_k = rewards[k-1].
    for (int shift = 0; shift < 2; ++shift) {
      const Matrix& z = shift == 0 ? pp.z0.z : pp.z0_next.z;
      const std::size_t base = t + shift;
      for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < d; ++i) {
          CHECK(z(i, j) == traj.features[base + j][i]);
          CHECK(z(d + i, j) == gamma * traj.features[base + j + 1][i]);
        }
        CHECK(z(2 * d, j) == traj.rewards[base + j]);
      }
      for (std::size_t i = 0; i < d; ++i) CHECK(z(i, n) == traj.features[base + n + 1][i]);
      for (std::size_t i = d; i <= 2 * d; ++i) CHECK(z(i, n) == 0.0);
    }
    CHECK(pp.reward == traj.rewards[t + n + 1]);
  }
}

TEST_CASE("consecutive windows share n-1 context columns") {
  SeededRng rng(4);
  const std::size_t n = 6;
  const Trajectory traj = random_trajectory(15, 2, rng);
  const Prompt a = sliding_prompts(traj, n, 0.9, 2).z0;
  const Prompt b = sliding_prompts(traj, n, 0.9, 3).z0;
  for (std::size_t j = 0; j + 1 < n; ++j)
    for (std::size_t i = 0; i < a.z.rows(); ++i) CHECK(a.z(i, j + 1) == b.z(i, j));
  const Prompt shifted = sliding_prompts(traj, n, 0.9, 2).z0_next;
  CHECK(shifted.z == b.z);
}

TEST_CASE("sliding_prompts bounds") {
  SeededRng rng(5);
  const Trajectory traj = random_trajectory(10, 2, rng);
  CHECK_NOTHROW(sliding_prompts(traj, 8, 0.9, 0));
  CHECK_THROWS_AS(sliding_prompts(traj, 8, 0.9, 1), std::out_of_range);
}

TEST_CASE("invariant-set prompt uses offset 0 and query phi_{n+1}") {
  SeededRng rng(6);
  const std::size_t n = 4;
  const Trajectory traj = random_trajectory(n + 2, 3, rng);
  const PromptPair pp = sliding_prompts(traj, n, 0.9, 0);
  CHECK(pp.z0.query() == traj.features[n + 1]);
  CHECK(pp.z0_next.query() == traj.features[n + 2]);
}

TEST_CASE("average-reward prompt") {
  SeededRng rng(7);
  const std::size_t d = 3, n = 5;
  const Trajectory traj = random_trajectory(n, d, rng);
  const std::span<const Vector> f(traj.features);
  const Prompt p = build_avg_reward_prompt(f.subspan(0, n), f.subspan(1, n), traj.rewards, f[n]);
  CHECK(p.z.rows() == 2 * d + 2);
  CHECK(p.z.cols() == n + 1);
  CHECK(p.kind == PromptKind::AverageReward);
  for (std::size_t j = 0; j <= n; ++j) CHECK(p.z(2 * d + 1, j) == 0.0);
  for (std::size_t j = 0; j + 1 < n; ++j)
    for (std::size_t i = 0; i < d; ++i) CHECK(p.z(d + i, j) == p.z(i, j + 1));
}

TEST_CASE("query substitution") {
  SeededRng rng(8);
  const std::size_t d = 3, n = 5;
  const Trajectory traj = random_trajectory(n + 1, d, rng);
  const std::span<const Vector> f(traj.features);
  const std::span<const double> r = std::span<const double>(traj.rewards).subspan(0, n);
  const Prompt p = build_prompt(f.subspan(0, n), f.subspan(1, n), r, 0.9, f[n + 1]);

  CHECK(query_substitute(p, p.query()).z == p.z);

  const Prompt q = query_substitute(p, f[n]);
  CHECK(q.z == build_prompt(f.subspan(0, n), f.subspan(1, n), r, 0.9, f[n]).z);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < q.z.rows(); ++i) CHECK(q.z(i, j) == p.z(i, j));
  for (std::size_t i = d; i <= 2 * d; ++i) CHECK(q.z(i, n) == 0.0);

  CHECK_THROWS_AS(query_substitute(p, Vector{1, 2}), ParameterError);
}
