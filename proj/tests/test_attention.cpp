#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "ictd/attention.hpp"
#include "ictd/constructions.hpp"

using namespace ictd;

namespace {

Prompt random_prompt(std::size_t d, std::size_t n, SeededRng& rng, double gamma = 0.9) {
  std::vector<Vector> phis;
  for (std::size_t j = 0; j <= n + 1; ++j) phis.push_back(rng.uniform_vector(d, -1, 1));
  const Vector rewards = rng.uniform_vector(n, -1, 1);
  const std::span<const Vector> f(phis);
  return build_prompt(f.subspan(0, n), f.subspan(1, n), rewards, gamma, f[n + 1]);
}

TransformerParams random_params(std::size_t dim, std::size_t layers, bool shared, AttentionKind attn,
                                SeededRng& rng, double scale = 0.3) {
  TransformerParams params;
  params.shared = shared;
  params.attn = attn;
  params.num_layers = layers;
  const std::size_t count = shared ? 1 : layers;
  for (std::size_t l = 0; l < count; ++l) {
    params.layers.push_back({testing::random_matrix(dim, dim, rng, -scale, scale),
                             testing::random_matrix(dim, dim, rng, -scale, scale)});
  }
  return params;
}

}  // namespace

TEST_CASE("masks") {
  const Matrix td0 = make_mask(MaskKind::td0(), 4);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(td0(i, j) == (i == j && i < 4 ? 1.0 : 0.0));
  CHECK(mat_mul(td0, td0) == td0);
  CHECK(make_mask(MaskKind::td_lambda(0.0), 4) == td0);
  CHECK(make_mask(MaskKind::avg_head2(), 4) == td0);

  const Matrix lam = make_mask(MaskKind::td_lambda(0.5), 3);
  const Matrix expected{{1, 0, 0, 0}, {0.5, 1, 0, 0}, {0.25, 0.5, 1, 0}, {0, 0, 0, 0}};
  CHECK(lam == expected);
  CHECK_THROWS_AS(make_mask(MaskKind::td_lambda(1.5), 3), ParameterError);
  CHECK_THROWS_AS(make_mask(MaskKind::td_lambda(-0.1), 3), ParameterError);

  // (I_3 - U_3 diag(1, 1/2, 1/3)) diag(1, 1, 0), multiplied out by hand.
  const Matrix avg1 = make_mask(MaskKind::avg_head1(), 2);
  const Matrix hand{{0, -0.5, 0}, {0, 0.5, 0}, {0, 0, 0}};
  CHECK(testing::max_abs_diff(avg1, hand) < 1e-15);
}

TEST_CASE("lin_attn") {
  SeededRng rng(1);
  const Matrix z = testing::random_matrix(5, 4, rng);
  const Matrix p = testing::random_matrix(5, 5, rng);
  const Matrix q = testing::random_matrix(5, 5, rng);
  const Matrix m = testing::random_matrix(4, 4, rng);
  const Matrix oracle =
      testing::naive_product(testing::naive_product(testing::naive_product(p, z), m),
                             testing::naive_product(testing::naive_product(z.transposed(), q), z));
  CHECK(testing::max_abs_diff(lin_attn(z, p, q, m), oracle) < 1e-12);
  const Matrix zero_p = lin_attn(z, Matrix(5, 5), q, m);
  const Matrix zero_m = lin_attn(z, p, q, Matrix(4, 4));
  CHECK(zero_p.max_abs() == 0.0);
  CHECK(zero_m.max_abs() == 0.0);
  CHECK_THROWS_AS(lin_attn(z, Matrix(4, 4), q, m), DimensionError);
  CHECK_THROWS_AS(lin_attn(z, p, q, Matrix(5, 5)), DimensionError);
}

TEST_CASE("lin_attn is linear in P") {
  SeededRng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix z = testing::random_matrix(5, 6, rng);
    const Matrix p1 = testing::random_matrix(5, 5, rng), p2 = testing::random_matrix(5, 5, rng);
    const Matrix q = testing::random_matrix(5, 5, rng);
    const Matrix m = make_mask(MaskKind::td0(), 5);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    const Matrix lhs = lin_attn(z, a * p1 + b * p2, q, m);
    const Matrix rhs = a * lin_attn(z, p1, q, m) + b * lin_attn(z, p2, q, m);
    CHECK(testing::max_abs_diff(lhs, rhs) < 1e-12);
  }
}

TEST_CASE("softmax attention") {
  SeededRng rng(3);
  const Matrix z = testing::random_matrix(5, 6, rng);
  const Matrix p = testing::random_matrix(5, 5, rng);
  const Matrix q = testing::random_matrix(5, 5, rng);
  const Matrix m = make_mask(MaskKind::td0(), 5);

  const Matrix s = softmax_rows(mat_mul_tn(z, mat_mul(q, z)));
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double total = 0.0;
    for (double x : s.row(i)) total += x;
    CHECK(std::abs(total - 1.0) < 1e-12);
  }

  const Matrix uniform = softmax_rows(Matrix(6, 6));
  for (double x : uniform.data()) CHECK(x == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  const Matrix zero_q = softmax_attn(z, p, Matrix(5, 5), m);
  const Matrix expected = mat_mul(mat_mul(p, mat_mul(z, m)), Matrix(6, 6, 1.0 / 6.0));
  CHECK(testing::max_abs_diff(zero_q, expected) < 1e-12);

  Matrix logits = mat_mul_tn(z, mat_mul(q, z));
  Matrix shifted = logits;
  for (std::size_t i = 0; i < shifted.rows(); ++i)
    for (double& x : shifted.row(i)) x += 3.0 * static_cast<double>(i) - 1.0;
  CHECK(testing::max_abs_diff(softmax_rows(logits), softmax_rows(shifted)) < 1e-12);

  Matrix huge(2, 3);
  huge(0, 0) = 1000.0;
  huge(1, 2) = -1000.0;
  CHECK(softmax_rows(huge).all_finite());
}

TEST_CASE("forward pass basics") {
  SeededRng rng(4);
  const Prompt z0 = random_prompt(3, 5, rng);
  TransformerParams params = random_params(7, 0, false, AttentionKind::Linear, rng);
  params.layers.push_back({Matrix(7, 7), Matrix(7, 7)});
  params.shared = true;
  params.num_layers = 0;
  CHECK(forward(z0, params).output == 0.0);

  for (std::size_t depth : {1u, 3u, 6u}) {
    params.num_layers = depth;
    const ForwardResult r = forward(z0, params);
    CHECK(r.output == 0.0);
    CHECK(r.trace.size() == depth + 1);
  }

  const TransformerParams wrong = random_params(5, 1, false, AttentionKind::Linear, rng);
  CHECK_THROWS_AS(forward(z0, wrong), DimensionError);
}

TEST_CASE("shared forward equals sequential copies bitwise") {
  SeededRng rng(5);
  for (AttentionKind attn : {AttentionKind::Linear, AttentionKind::Softmax}) {
    const Prompt z0 = random_prompt(3, 6, rng);
    const TransformerParams shared = random_params(7, 4, true, attn, rng);
    TransformerParams seq = shared;
    seq.shared = false;
    seq.layers.assign(4, shared.layers.front());
    const ForwardResult a = forward(z0, shared);
    const ForwardResult b = forward(z0, seq);
    CHECK(a.z_final == b.z_final);
    CHECK(a.output == b.output);
    CHECK(forward_output(z0, shared) == a.output);
  }
}

TEST_CASE("TD construction leaves feature rows untouched") {
  SeededRng rng(6);
  const std::size_t d = 4;
  const Prompt z0 = random_prompt(d, 10, rng);
  std::vector<Matrix> cs;
  for (int l = 0; l < 5; ++l) cs.push_back(testing::random_matrix(d, d, rng));
  const ForwardResult r = forward(z0, construct_td(cs));
  for (const Matrix& z : r.trace)
    for (std::size_t i = 0; i < 2 * d; ++i)
      for (std::size_t j = 0; j < z.cols(); ++j) CHECK(z(i, j) == z0.z(i, j));
}

TEST_CASE("sign coupling of a single linear layer") {
  SeededRng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Prompt z0 = random_prompt(3, 8, rng);
    const TransformerParams params = random_params(7, 1, false, AttentionKind::Linear, rng);
    TransformerParams flipped = params;
    flipped.layers[0].p *= -1.0;
    flipped.layers[0].q *= -1.0;
    CHECK(std::abs(forward(z0, params).output - forward(z0, flipped).output) < 1e-12);
  }
}

TEST_CASE("two-head forward") {
  SeededRng rng(8);
  const std::size_t d = 3, n = 6;
  std::vector<Vector> phis;
  for (std::size_t j = 0; j <= n; ++j) phis.push_back(rng.uniform_vector(d, -1, 1));
  const Vector rewards = rng.uniform_vector(n, -1, 1);
  const std::span<const Vector> f(phis);
  const Prompt z0 = build_avg_reward_prompt(f.subspan(0, n), f.subspan(1, n), rewards, f[n]);

  std::vector<Matrix> cs;
  for (int l = 0; l < 4; ++l) cs.push_back(testing::random_matrix(d, d, rng));
  const TwoHeadParams params = construct_avg_td(cs);
  const ForwardResult r = two_head_forward(z0, params);
  for (const Matrix& z : r.trace)
    for (std::size_t i = 0; i <= 2 * d; ++i)
      for (std::size_t j = 0; j <= n; ++j) CHECK(z(i, j) == z0.z(i, j));

  CHECK(two_head_forward(z0, TwoHeadParams{}).output == 0.0);

  const Prompt discounted = build_prompt(f.subspan(0, n), f.subspan(1, n), rewards, 0.9, f[n]);
  CHECK_THROWS_AS(two_head_forward(discounted, params), ParameterError);
}
