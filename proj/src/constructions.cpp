#include "ictd/constructions.hpp"

#include <cmath>

namespace ictd {

namespace {

std::size_t common_dim(std::span<const Matrix> c_list) {
  if (c_list.empty()) throw ParameterError("construction needs at least one C_l");
  const std::size_t d = c_list.front().rows();
  for (const Matrix& c : c_list) {
    if (c.rows() != d || c.cols() != d) throw DimensionError("every C_l must be square d x d");
  }
  if (d == 0) throw DimensionError("C_l must be non-empty");
  return d;
}

Matrix bottom_right_selector(std::size_t dim, std::size_t index, double value = 1.0) {
  Matrix p(dim, dim);
  p(index, index) = value;
  return p;
}

// [-C^T, C^T] in the first d rows of a dim x dim matrix.
Matrix td_query(const Matrix& c, std::size_t dim) {
  const std::size_t d = c.rows();
  const Matrix ct = c.transposed();
  Matrix q(dim, dim);
  q.set_block(0, 0, -1.0 * ct);
  q.set_block(0, d, ct);
  return q;
}

TransformerParams unshared(std::vector<LayerParams> layers, MaskKind mask) {
  TransformerParams params;
  params.num_layers = layers.size();
  params.layers = std::move(layers);
  params.shared = false;
  params.attn = AttentionKind::Linear;
  params.mask = mask;
  return params;
}

}  // namespace

TransformerParams construct_td(std::span<const Matrix> c_list) {
  const std::size_t d = common_dim(c_list);
  const std::size_t dim = 2 * d + 1;
  std::vector<LayerParams> layers;
  for (const Matrix& c : c_list) layers.push_back({bottom_right_selector(dim, 2 * d), td_query(c, dim)});
  return unshared(std::move(layers), MaskKind::td0());
}

TransformerParams construct_td_one_layer(const Matrix& c) {
  const std::size_t d = common_dim(std::span<const Matrix>(&c, 1));
  const std::size_t dim = 2 * d + 1;
  Matrix q(dim, dim);
  q.set_block(0, 0, -1.0 * c.transposed());
  return unshared({{bottom_right_selector(dim, 2 * d), std::move(q)}}, MaskKind::td0());
}

TransformerParams construct_rg(std::span<const Matrix> c_list) {
  const std::size_t d = common_dim(c_list);
  const std::size_t dim = 2 * d + 1;
  std::vector<LayerParams> layers;
  for (const Matrix& c : c_list) {
    const Matrix ct = c.transposed();
    Matrix q = td_query(c, dim);
    q.set_block(d, 0, ct);
    q.set_block(d, d, -1.0 * ct);
    layers.push_back({bottom_right_selector(dim, 2 * d), std::move(q)});
  }
  return unshared(std::move(layers), MaskKind::td0());
}

TransformerParams construct_td_lambda(std::span<const Matrix> c_list, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("lambda must lie in [0, 1]");
  TransformerParams params = construct_td(c_list);
  params.mask = MaskKind::td_lambda(lambda);
  return params;
}

TwoHeadParams construct_avg_td(std::span<const Matrix> c_list) {
  const std::size_t d = common_dim(c_list);
  const std::size_t dim = 2 * d + 2;
  TwoHeadParams params;
  for (const Matrix& c : c_list) {
    TwoHeadLayer layer;
    layer.p1 = bottom_right_selector(dim, 2 * d);
    layer.p2 = bottom_right_selector(dim, 2 * d + 1);
    layer.q = td_query(c, dim);
    layer.w = Matrix(dim, 2 * dim);
    layer.w(2 * d + 1, 2 * d) = 1.0;
    layer.w(2 * d + 1, dim + 2 * d + 1) = 1.0;
    params.layers.push_back(std::move(layer));
  }
  return params;
}

TransformerParams theta_star(std::size_t d, double eta, double c, double c_prime) {
  if (d == 0) throw ParameterError("theta_star needs d >= 1");
  const std::size_t dim = 2 * d + 1;
  Matrix q(dim, dim);
  for (std::size_t i = 0; i < d; ++i) {
    q(i, i) = c;
    q(d + i, i) = c_prime;
  }
  return unshared({{bottom_right_selector(dim, 2 * d, eta), std::move(q)}}, MaskKind::td0());
}

bool in_theta_star(const Matrix& p, const Matrix& q, std::size_t d, double tol) {
  const std::size_t dim = 2 * d + 1;
  if (p.rows() != dim || p.cols() != dim || q.rows() != dim || q.cols() != dim) return false;
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      if (i == 2 * d && j == 2 * d) continue;
      if (std::abs(p(i, j)) > tol) return false;
    }
  }
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      const bool diag_block = j < d && i < 2 * d && (i % d) == j;
      if (!diag_block && std::abs(q(i, j)) > tol) return false;
    }
  }
  for (std::size_t i = 1; i < d; ++i) {
    if (std::abs(q(i, i) - q(0, 0)) > tol) return false;
    if (std::abs(q(d + i, i) - q(d, 0)) > tol) return false;
  }
  return true;
}

std::vector<Matrix> scaled_identities(std::size_t d, double alpha, std::size_t layers) {
  return std::vector<Matrix>(layers, alpha * Matrix::identity(d));
}

}  // namespace ictd
