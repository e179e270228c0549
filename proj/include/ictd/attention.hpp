// Masked linear and softmax attention and the L-layer residual forward pass.
//
//   Z_{l+1} = Z_l + (1/n) * P_l Z_l M A(Z_l^T Q_l Z_l)
//
// where A is the identity (linear) or the row-wise softmax. The scalar output
// is minus the bottom-right entry of Z_L.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ictd/numerics.hpp"
#include "ictd/prompt.hpp"

namespace ictd {

enum class AttentionKind { Linear, Softmax };

struct MaskKind {
  enum class Variant { TD0, TDLambda, AvgHead1, AvgHead2 };
  Variant variant = Variant::TD0;
  double lambda = 0.0;  // TDLambda only

  static MaskKind td0() { return {Variant::TD0, 0.0}; }
  static MaskKind td_lambda(double lambda) { return {Variant::TDLambda, lambda}; }
  static MaskKind avg_head1() { return {Variant::AvgHead1, 0.0}; }
  static MaskKind avg_head2() { return {Variant::AvgHead2, 0.0}; }

  friend bool operator==(const MaskKind&, const MaskKind&) = default;
};

std::string to_string(AttentionKind k);
AttentionKind attention_kind_from_string(const std::string& s);
std::string to_string(MaskKind::Variant v);
MaskKind::Variant mask_variant_from_string(const std::string& s);

/// (n+1) x (n+1) mask for a prompt with n context columns.
/// TD0 / AvgHead2: diag(I_n, 0). TDLambda: M[i][k] = lambda^(i-k) for
/// k <= i < n, last row and column zero. AvgHead1: (I - U diag(1, 1/2, ...,
/// 1/(n+1))) * AvgHead2 with U the all-ones upper triangle.
Matrix make_mask(const MaskKind& kind, std::size_t n);

/// P Z M (Z^T Q Z).
Matrix lin_attn(const Matrix& z, const Matrix& p, const Matrix& q, const Matrix& m);
/// P Z M softmax_rows(Z^T Q Z).
Matrix softmax_attn(const Matrix& z, const Matrix& p, const Matrix& q, const Matrix& m);
/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& x);

struct LayerParams {
  Matrix p;
  Matrix q;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// With `shared`, `layers` holds one (P, Q) pair applied `num_layers` times;
/// otherwise it holds one pair per layer.
struct TransformerParams {
  std::vector<LayerParams> layers;
  bool shared = false;
  AttentionKind attn = AttentionKind::Linear;
  MaskKind mask;
  std::size_t num_layers = 0;

  const LayerParams& layer(std::size_t l) const { return shared ? layers.front() : layers.at(l); }
  /// Row dimension of the prompts these parameters accept.
  std::size_t dim() const { return layers.empty() ? 0 : layers.front().p.rows(); }
  /// Throws DimensionError / ParameterError on inconsistent shapes or counts.
  void validate() const;

  friend bool operator==(const TransformerParams&, const TransformerParams&) = default;
};

struct ForwardResult {
  Matrix z_final;
  double output = 0.0;
  std::vector<Matrix> trace;  // Z_0 .. Z_L
};

ForwardResult forward(const Prompt& z0, const TransformerParams& params);
/// Raw-matrix variant; n is taken as z0.cols() - 1.
ForwardResult forward(const Matrix& z0, const TransformerParams& params);

/// Scalar output only; skips the trace.
double forward_output(const Prompt& z0, const TransformerParams& params);

/// One two-head layer: heads (P1, Q, AvgHead1) and (P2, Q, AvgHead2), combined
/// by W, a (2d+2) x 2(2d+2) matrix acting on the stacked head outputs.
struct TwoHeadLayer {
  Matrix p1;
  Matrix p2;
  Matrix q;
  Matrix w;

  friend bool operator==(const TwoHeadLayer&, const TwoHeadLayer&) = default;
};

struct TwoHeadParams {
  std::vector<TwoHeadLayer> layers;

  std::size_t num_layers() const { return layers.size(); }
};

/// Requires an average-reward prompt (ParameterError otherwise).
ForwardResult two_head_forward(const Prompt& z0, const TwoHeadParams& params);

}  // namespace ictd
