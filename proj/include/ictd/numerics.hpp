// Dense matrix arithmetic, weighted norms, least squares and a seeded PRNG.
//
// Everything in the library is carried by `Matrix` (row-major doubles) and
// `Vector` (std::vector<double>). Sizes are tiny (at most a few hundred
// columns), so all kernels are plain loops.

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ictd {

using Vector = std::vector<double>;

/// Shape mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid argument value (negative weight, out-of-range hyperparameter...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Linear system that cannot be solved to working precision.
class SingularityError : public std::runtime_error {
 public:
  SingularityError(const std::string& what, double condition_estimate)
      : std::runtime_error(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// Iterative procedure that did not reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  /// Row-by-row literal, e.g. Matrix{{1, 2}, {3, 4}}.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);
  static Matrix column(std::span<const double> v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  Vector col(std::size_t c) const;
  void set_col(std::size_t c, std::span<const double> v);

  Matrix transposed() const;
  /// Copy of the [r0, r0+nr) x [c0, c0+nc) block.
  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
  void set_block(std::size_t r0, std::size_t c0, const Matrix& b);

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  /// Largest absolute entry (0 for an empty matrix).
  double max_abs() const;
  bool all_finite() const;

  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

/// Standard product; throws DimensionError unless a.cols() == b.rows().
Matrix mat_mul(const Matrix& a, const Matrix& b);
/// a^T b without forming the transpose.
Matrix mat_mul_tn(const Matrix& a, const Matrix& b);
/// a b^T without forming the transpose.
Matrix mat_mul_nt(const Matrix& a, const Matrix& b);
Vector mat_vec(const Matrix& a, std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
/// Elementwise a + s*b.
Vector axpy(std::span<const double> a, double s, std::span<const double> b);

/// sqrt(sum_s d(s) v(s)^2). Throws ParameterError on negative weights.
double weighted_norm(std::span<const double> v, std::span<const double> d);

/// argmin_w ||Phi w - v||_d via the weighted normal equations and a Cholesky
/// factorization. Throws SingularityError when the Gram matrix is not
/// numerically positive definite or its condition estimate exceeds 1e12.
Vector weighted_least_squares(const Matrix& phi, std::span<const double> v,
                              std::span<const double> d);

/// <a,b>/(|a||b|), or 0 if either norm is below 1e-12.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Solves A x = b by Gaussian elimination with partial pivoting.
Vector solve(Matrix a, Vector b);

/// Seeded pseudo-random generator: xoshiro256** whose 256-bit state is filled
/// from the seed with splitmix64. Both algorithms use only 64-bit integer
/// arithmetic, so a seed yields the same stream on every platform.
///
///   splitmix64: z = (s += 0x9e3779b97f4a7c15);
///               z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9;
///               z = (z ^ (z >> 27)) * 0x94d049bb133111eb;  return z ^ (z >> 31)
///   xoshiro256**: out = rotl(s1 * 5, 7) * 9;  t = s1 << 17;
///               s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t; s3 = rotl(s3, 45)
///
/// Doubles in [0,1) take the top 53 bits of one output.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform in the open interval (0, 1).
  double uniform_open();
  double uniform(double lo, double hi);
  Vector uniform_vector(std::size_t n, double lo, double hi);
  /// Index drawn from an (unnormalized, nonnegative) weight vector.
  std::size_t categorical(std::span<const double> weights);
  /// Independent stream derived from this generator's seed and `stream`.
  SeededRng fork(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace ictd
