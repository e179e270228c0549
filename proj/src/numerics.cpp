#include "ictd/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ictd {

namespace {

std::string shape(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("Matrix: data length does not match rows*cols");
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
  Matrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

Matrix Matrix::column(std::span<const double> v) {
  return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
}

Vector Matrix::col(std::size_t c) const {
  Vector v(rows_);
  for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
  return v;
}

void Matrix::set_col(std::size_t c, std::span<const double> v) {
  if (v.size() != rows_) throw DimensionError("set_col: length mismatch");
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
  if (r0 + nr > rows_ || c0 + nc > cols_) throw DimensionError("block: out of range");
  Matrix b(nr, nc);
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t c = 0; c < nc; ++c) b(r, c) = (*this)(r0 + r, c0 + c);
  return b;
}

void Matrix::set_block(std::size_t r0, std::size_t c0, const Matrix& b) {
  if (r0 + b.rows() > rows_ || c0 + b.cols() > cols_) throw DimensionError("set_block: out of range");
  for (std::size_t r = 0; r < b.rows(); ++r)
    for (std::size_t c = 0; c < b.cols(); ++c) (*this)(r0 + r, c0 + c) = b(r, c);
}

Matrix& Matrix::operator+=(const Matrix& o) {
  require_same_shape(*this, o, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  require_same_shape(*this, o, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::abs(x));
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix mat_mul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("mat_mul: " + shape(a) + " * " + shape(b));
  Matrix c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* bk = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix mat_mul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("mat_mul_tn: " + shape(a) + "^T * " + shape(b));
  Matrix c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* bk = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* ci = c.row(i).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

Matrix mat_mul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionError("mat_mul_nt: " + shape(a) + " * " + shape(b) + "^T");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(ai, b.row(j));
  }
  return c;
}

Vector mat_vec(const Matrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw DimensionError("mat_vec: length mismatch");
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Vector axpy(std::span<const double> a, double s, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("axpy: length mismatch");
  Vector out(a.begin(), a.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * b[i];
  return out;
}

double weighted_norm(std::span<const double> v, std::span<const double> d) {
  if (v.size() != d.size()) throw DimensionError("weighted_norm: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (d[i] < 0.0) throw ParameterError("weighted_norm: negative weight");
    s += d[i] * v[i] * v[i];
  }
  return std::sqrt(s);
}

Vector weighted_least_squares(const Matrix& phi, std::span<const double> v,
                              std::span<const double> d) {
  const std::size_t m = phi.rows();
  const std::size_t k = phi.cols();
  if (v.size() != m || d.size() != m) throw DimensionError("weighted_least_squares: length mismatch");
  for (double w : d)
    if (w < 0.0) throw ParameterError("weighted_least_squares: negative weight");

  // Gram = Phi^T D Phi, rhs = Phi^T D v
  Matrix gram(k, k);
  Vector rhs(k, 0.0);
  for (std::size_t s = 0; s < m; ++s) {
    const auto f = phi.row(s);
    for (std::size_t i = 0; i < k; ++i) {
      rhs[i] += d[s] * f[i] * v[s];
      for (std::size_t j = 0; j < k; ++j) gram(i, j) += d[s] * f[i] * f[j];
    }
  }

  // Cholesky: gram = L L^T
  Matrix l(k, k);
  for (std::size_t j = 0; j < k; ++j) {
    double diag = gram(j, j);
    for (std::size_t p = 0; p < j; ++p) diag -= l(j, p) * l(j, p);
    if (!(diag > 0.0)) {
      throw SingularityError("weighted_least_squares: weighted Gram matrix is not positive definite",
                             std::numeric_limits<double>::infinity());
    }
    l(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < k; ++i) {
      double s = gram(i, j);
      for (std::size_t p = 0; p < j; ++p) s -= l(i, p) * l(j, p);
      l(i, j) = s / l(j, j);
    }
  }
  double lmax = 0.0;
  double lmin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    lmax = std::max(lmax, l(j, j));
    lmin = std::min(lmin, l(j, j));
  }
  const double cond = (lmax / lmin) * (lmax / lmin);
  if (!(cond <= 1e12)) {
    std::ostringstream os;
    os << "weighted_least_squares: condition estimate " << cond << " exceeds 1e12";
    throw SingularityError(os.str(), cond);
  }

  Vector y(k);
  for (std::size_t i = 0; i < k; ++i) {
    double s = rhs[i];
    for (std::size_t p = 0; p < i; ++p) s -= l(i, p) * y[p];
    y[i] = s / l(i, i);
  }
  Vector w(k);
  for (std::size_t ii = k; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t p = ii + 1; p < k; ++p) s -= l(p, ii) * w[p];
    w[ii] = s / l(ii, ii);
  }
  return w;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na < 1e-12 || nb < 1e-12) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

Vector solve(Matrix a, Vector b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw DimensionError("solve: expected square system");
  double scale = a.max_abs();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(piv, c))) piv = r;
    if (std::abs(a(piv, c)) <= 1e-14 * std::max(scale, 1.0)) {
      throw SingularityError("solve: matrix is singular to working precision",
                             std::numeric_limits<double>::infinity());
    }
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(c, j), a(piv, j));
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a(r, c) / a(c, c);
      if (f == 0.0) continue;
      for (std::size_t j = c; j < n; ++j) a(r, j) -= f * a(c, j);
      b[r] -= f * b[c];
    }
  }
  Vector x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
    x[i] = s / a(i, i);
  }
  return x;
}

// ---------------------------------------------------------------------------
// SeededRng

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t SeededRng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double SeededRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double SeededRng::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

Vector SeededRng::uniform_vector(std::size_t n, double lo, double hi) {
  Vector v(n);
  for (double& x : v) x = uniform(lo, hi);
  return v;
}

std::size_t SeededRng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  const double u = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

SeededRng SeededRng::fork(std::uint64_t stream) const {
  std::uint64_t sm = seed_ ^ (0xd1b54a32d192ed03ULL * (stream + 1));
  return SeededRng(splitmix64(sm));
}

}  // namespace ictd
