#include "ictd/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace ictd {

Gradient grad_output(const Matrix& z0, const TransformerParams& params) {
  const ForwardResult fwd = forward(z0, params);
  const std::size_t rows = z0.rows();
  const std::size_t n = z0.cols() - 1;
  const Matrix mask = make_mask(params.mask, n);
  const Matrix mask_t = mask.transposed();
  const double scale = 1.0 / static_cast<double>(n);

  Gradient g;
  g.output = fwd.output;
  g.layers.assign(params.layers.size(), LayerParams{Matrix(rows, rows), Matrix(rows, rows)});

  Matrix dz(rows, n + 1);
  dz(rows - 1, n) = -1.0;
  for (std::size_t l = params.num_layers; l-- > 0;) {
    const Matrix& z = fwd.trace[l];
    const LayerParams& lp = params.layer(l);
    LayerParams& acc = params.shared ? g.layers.front() : g.layers[l];

    // Recompute the layer: Y = Z M, A = P Y, X = Z^T Q Z, S = act(X).
    const Matrix y = mat_mul(z, mask);
    const Matrix a = mat_mul(lp.p, y);
    const Matrix qz = mat_mul(lp.q, z);
    const Matrix x = mat_mul_tn(z, qz);
    const bool softmax = params.attn == AttentionKind::Softmax;
    const Matrix s = softmax ? softmax_rows(x) : x;

    const Matrix du = scale * dz;  // dL/d(A S)
    const Matrix da = mat_mul_nt(du, s);
    const Matrix ds = mat_mul_tn(a, du);

    Matrix dx = ds;
    if (softmax) {
      for (std::size_t i = 0; i <= n; ++i) {
        double inner = 0.0;
        for (std::size_t k = 0; k <= n; ++k) inner += ds(i, k) * s(i, k);
        for (std::size_t k = 0; k <= n; ++k) dx(i, k) = s(i, k) * (ds(i, k) - inner);
      }
    }

    acc.p += mat_mul_nt(da, y);
    acc.q += mat_mul(mat_mul(z, dx), z.transposed());

    Matrix dz_prev = dz;
    dz_prev += mat_mul(mat_mul_tn(lp.p, da), mask_t);
    dz_prev += mat_mul_nt(qz, dx);
    dz_prev += mat_mul(mat_mul_tn(lp.q, z), dx);
    dz = std::move(dz_prev);
  }
  g.dz0 = std::move(dz);
  return g;
}

Gradient grad_output(const Prompt& z0, const TransformerParams& params) { return grad_output(z0.z, params); }

Tf1ClosedForm tf1_closed_form(const Prompt& z0, const Matrix& p, const Matrix& q) {
  const std::size_t d = z0.d;
  const std::size_t n = z0.n;
  const std::size_t dim = 2 * d + 1;
  if (z0.kind != PromptKind::Discounted || p.rows() != dim || q.rows() != dim) {
    throw DimensionError("tf1_closed_form: needs a discounted prompt and (2d+1)-square parameters");
  }
  const Matrix& z = z0.z;
  const Vector phi_q = z0.query();
  const double inv_n = 1.0 / static_cast<double>(n);

  Tf1ClosedForm out;
  out.grad_p_top.assign(d, 0.0);
  out.grad_p_mid.assign(d, 0.0);
  out.grad_qa = Matrix(d, d);
  out.grad_qa_prime = Matrix(d, d);
  out.grad_q_a.assign(d, 0.0);

  // Projections of the query through the three blocks of Q's first column block.
  Vector qa_phi(d, 0.0), qap_phi(d, 0.0);
  double qa_row = 0.0;
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      qa_phi[r] += q(r, c) * phi_q[c];
      qap_phi[r] += q(d + r, c) * phi_q[c];
    }
  }
  for (std::size_t c = 0; c < d; ++c) qa_row += q(2 * d, c) * phi_q[c];

  double sum_ab = 0.0;
  double sum_r_alpha = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double reward = z(2 * d, i);
    double alpha = p(2 * d, 2 * d) * reward;
    double beta = reward * qa_row;
    for (std::size_t k = 0; k < d; ++k) {
      alpha += p(2 * d, k) * z(k, i) + p(2 * d, d + k) * z(d + k, i);
      beta += z(k, i) * qa_phi[k] + z(d + k, i) * qap_phi[k];
    }
    sum_ab += alpha * beta;
    sum_r_alpha += reward * alpha;
    for (std::size_t k = 0; k < d; ++k) {
      out.grad_p_top[k] -= inv_n * beta * z(k, i);
      out.grad_p_mid[k] -= inv_n * beta * z(d + k, i);
      for (std::size_t c = 0; c < d; ++c) {
        out.grad_qa(k, c) -= inv_n * alpha * z(k, i) * phi_q[c];
        out.grad_qa_prime(k, c) -= inv_n * alpha * z(d + k, i) * phi_q[c];
      }
    }
    out.grad_p_reward -= inv_n * beta * reward;
  }
  out.value = -inv_n * sum_ab;
  for (std::size_t c = 0; c < d; ++c) out.grad_q_a[c] = -inv_n * sum_r_alpha * phi_q[c];
  return out;
}

std::vector<LayerParams> finite_diff(const Prompt& z0, const TransformerParams& params, double h) {
  if (!(h > 0.0)) throw ParameterError("finite_diff: step must be positive");
  std::vector<LayerParams> grads;
  TransformerParams work = params;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    LayerParams g{Matrix(params.dim(), params.dim()), Matrix(params.dim(), params.dim())};
    for (int which = 0; which < 2; ++which) {
      Matrix& target = which == 0 ? work.layers[l].p : work.layers[l].q;
      Matrix& out = which == 0 ? g.p : g.q;
      for (std::size_t k = 0; k < target.size(); ++k) {
        const double saved = target.data()[k];
        target.data()[k] = saved + h;
        const double up = forward_output(z0, work);
        target.data()[k] = saved - h;
        const double down = forward_output(z0, work);
        target.data()[k] = saved;
        out.data()[k] = (up - down) / (2.0 * h);
      }
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

double relative_error(const std::vector<LayerParams>& a, const std::vector<LayerParams>& b) {
  if (a.size() != b.size()) throw DimensionError("relative_error: layer count mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  auto accumulate = [&](const Matrix& x, const Matrix& y) {
    if (x.size() != y.size()) throw DimensionError("relative_error: shape mismatch");
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double u = x.data()[k];
      const double v = y.data()[k];
      diff += (u - v) * (u - v);
      na += u * u;
      nb += v * v;
    }
  };
  for (std::size_t l = 0; l < a.size(); ++l) {
    accumulate(a[l].p, b[l].p);
    accumulate(a[l].q, b[l].q);
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

}  // namespace ictd
