#include "ictd/attention.hpp"

#include <algorithm>
#include <cmath>

namespace ictd {

std::string to_string(AttentionKind k) { return k == AttentionKind::Linear ? "linear" : "softmax"; }

AttentionKind attention_kind_from_string(const std::string& s) {
  if (s == "linear") return AttentionKind::Linear;
  if (s == "softmax") return AttentionKind::Softmax;
  throw ParameterError("unknown attention kind '" + s + "'");
}

std::string to_string(MaskKind::Variant v) {
  switch (v) {
    case MaskKind::Variant::TD0: return "td0";
    case MaskKind::Variant::TDLambda: return "td-lambda";
    case MaskKind::Variant::AvgHead1: return "avg-head1";
    case MaskKind::Variant::AvgHead2: return "avg-head2";
  }
  return "unknown";
}

MaskKind::Variant mask_variant_from_string(const std::string& s) {
  if (s == "td0") return MaskKind::Variant::TD0;
  if (s == "td-lambda") return MaskKind::Variant::TDLambda;
  if (s == "avg-head1") return MaskKind::Variant::AvgHead1;
  if (s == "avg-head2") return MaskKind::Variant::AvgHead2;
  throw ParameterError("unknown mask kind '" + s + "'");
}

Matrix make_mask(const MaskKind& kind, std::size_t n) {
  if (n < 1) throw ParameterError("mask needs n >= 1");
  Matrix m(n + 1, n + 1);
  switch (kind.variant) {
    case MaskKind::Variant::TD0:
    case MaskKind::Variant::AvgHead2:
      for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
      return m;
    case MaskKind::Variant::TDLambda: {
      const double lambda = kind.lambda;
      if (!(lambda >= 0.0 && lambda <= 1.0)) throw ParameterError("TD(lambda) mask needs lambda in [0, 1]");
      for (std::size_t i = 0; i < n; ++i) {
        double w = 1.0;
        for (std::size_t k = i + 1; k-- > 0;) {
          m(i, k) = w;
          w *= lambda;
        }
      }
      return m;
    }
    case MaskKind::Variant::AvgHead1: {
      Matrix centre = Matrix::identity(n + 1);
      for (std::size_t j = 0; j <= n; ++j) {
        const double inv = 1.0 / static_cast<double>(j + 1);
        for (std::size_t i = 0; i <= j; ++i) centre(i, j) -= inv;
      }
      return mat_mul(centre, make_mask(MaskKind::avg_head2(), n));
    }
  }
  return m;
}

namespace {

void check_attn_shapes(const Matrix& z, const Matrix& p, const Matrix& q, const Matrix& m) {
  const std::size_t r = z.rows();
  if (p.rows() != r || p.cols() != r || q.rows() != r || q.cols() != r) {
    throw DimensionError("attention: P and Q must be square of the prompt row dimension");
  }
  if (m.rows() != z.cols() || m.cols() != z.cols()) {
    throw DimensionError("attention: mask must be (n+1) x (n+1)");
  }
}

}  // namespace

Matrix lin_attn(const Matrix& z, const Matrix& p, const Matrix& q, const Matrix& m) {
  check_attn_shapes(z, p, q, m);
  const Matrix scores = mat_mul_tn(z, mat_mul(q, z));
  return mat_mul(mat_mul(p, mat_mul(z, m)), scores);
}

Matrix softmax_rows(const Matrix& x) {
  Matrix s(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    auto out = s.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      out[j] = std::exp(row[j] - mx);
      total += out[j];
    }
    for (double& v : out) v /= total;
  }
  return s;
}

Matrix softmax_attn(const Matrix& z, const Matrix& p, const Matrix& q, const Matrix& m) {
  check_attn_shapes(z, p, q, m);
  const Matrix scores = softmax_rows(mat_mul_tn(z, mat_mul(q, z)));
  return mat_mul(mat_mul(p, mat_mul(z, m)), scores);
}

namespace {

Matrix attend(const Matrix& z, const LayerParams& lp, AttentionKind attn, const Matrix& mask) {
  return attn == AttentionKind::Linear ? lin_attn(z, lp.p, lp.q, mask) : softmax_attn(z, lp.p, lp.q, mask);
}

}  // namespace

void TransformerParams::validate() const {
  if (layers.empty()) throw ParameterError("TransformerParams: no layers");
  if (shared && layers.size() != 1) throw ParameterError("TransformerParams: shared weights need exactly one layer entry");
  if (!shared && layers.size() != num_layers) {
    throw ParameterError("TransformerParams: layer count does not match num_layers");
  }
  const std::size_t r = dim();
  for (const auto& l : layers) {
    if (l.p.rows() != r || l.p.cols() != r || l.q.rows() != r || l.q.cols() != r) {
      throw DimensionError("TransformerParams: P and Q must all be square of equal size");
    }
  }
}

ForwardResult forward(const Matrix& z0, const TransformerParams& params) {
  params.validate();
  if (z0.rows() != params.dim()) throw DimensionError("forward: prompt rows do not match parameters");
  if (z0.cols() < 2) throw DimensionError("forward: prompt needs at least one context column");
  const std::size_t n = z0.cols() - 1;
  const Matrix mask = make_mask(params.mask, n);
  const double scale = 1.0 / static_cast<double>(n);
  ForwardResult res;
  res.trace.reserve(params.num_layers + 1);
  res.trace.push_back(z0);
  Matrix z = z0;
  for (std::size_t l = 0; l < params.num_layers; ++l) {
    Matrix upd = attend(z, params.layer(l), params.attn, mask);
    upd *= scale;
    z += upd;
    res.trace.push_back(z);
  }
  res.output = -z(z.rows() - 1, n);
  res.z_final = std::move(z);
  return res;
}

ForwardResult forward(const Prompt& z0, const TransformerParams& params) { return forward(z0.z, params); }

double forward_output(const Prompt& z0, const TransformerParams& params) {
  params.validate();
  if (z0.z.rows() != params.dim()) throw DimensionError("forward: prompt rows do not match parameters");
  const Matrix mask = make_mask(params.mask, z0.n);
  const double scale = 1.0 / static_cast<double>(z0.n);
  Matrix z = z0.z;
  for (std::size_t l = 0; l < params.num_layers; ++l) {
    Matrix upd = attend(z, params.layer(l), params.attn, mask);
    upd *= scale;
    z += upd;
  }
  return -z(z.rows() - 1, z0.n);
}

ForwardResult two_head_forward(const Prompt& z0, const TwoHeadParams& params) {
  if (z0.kind != PromptKind::AverageReward) throw ParameterError("two_head_forward: needs an average-reward prompt");
  const std::size_t r = z0.z.rows();
  const std::size_t n = z0.n;
  const Matrix m1 = make_mask(MaskKind::avg_head1(), n);
  const Matrix m2 = make_mask(MaskKind::avg_head2(), n);
  const double scale = 1.0 / static_cast<double>(n);
  ForwardResult res;
  res.trace.push_back(z0.z);
  Matrix z = z0.z;
  for (const TwoHeadLayer& layer : params.layers) {
    if (layer.w.rows() != r || layer.w.cols() != 2 * r) {
      throw DimensionError("two_head_forward: W must be (2d+2) x 2(2d+2)");
    }
    const Matrix h1 = lin_attn(z, layer.p1, layer.q, m1);
    const Matrix h2 = lin_attn(z, layer.p2, layer.q, m2);
    Matrix stacked(2 * r, n + 1);
    stacked.set_block(0, 0, h1);
    stacked.set_block(r, 0, h2);
    Matrix upd = mat_mul(layer.w, stacked);
    upd *= scale;
    z += upd;
    res.trace.push_back(z);
  }
  res.output = -z(r - 1, n);
  res.z_final = std::move(z);
  return res;
}

}  // namespace ictd
