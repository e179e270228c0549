// Reverse-mode gradients of the transformer output, the closed-form
// single-layer value and gradients, and central finite differences.

#pragma once

#include <vector>

#include "ictd/attention.hpp"
#include "ictd/prompt.hpp"

namespace ictd {

struct Gradient {
  double output = 0.0;
  /// Same layout as TransformerParams::layers; for shared weights the single
  /// entry holds the sum over all applications.
  std::vector<LayerParams> layers;
  /// Derivative of the output with respect to every prompt entry.
  Matrix dz0;
};

Gradient grad_output(const Prompt& z0, const TransformerParams& params);
Gradient grad_output(const Matrix& z0, const TransformerParams& params);

/// Single linear layer with the TD0 mask, written through
///   alpha_i = <p, z_i>,  beta_i = z_i^T Q z_query,  TF = -(1/n) sum alpha_i beta_i
/// where p is the last row of P and z_i the i-th context column.
struct Tf1ClosedForm {
  double value = 0.0;
  Vector grad_p_top;       // d(TF)/d p[0:d]
  Vector grad_p_mid;       // d(TF)/d p[d:2d]
  double grad_p_reward = 0.0;  // d(TF)/d p[2d]
  Matrix grad_qa;          // Q[0:d, 0:d]
  Matrix grad_qa_prime;    // Q[d:2d, 0:d]
  Vector grad_q_a;         // Q[2d, 0:d]
};

Tf1ClosedForm tf1_closed_form(const Prompt& z0, const Matrix& p, const Matrix& q);

/// Central differences on every parameter entry.
std::vector<LayerParams> finite_diff(const Prompt& z0, const TransformerParams& params, double h);

/// ||a - b|| / max(||a||, ||b||) over all entries jointly (0 if both vanish).
double relative_error(const std::vector<LayerParams>& a, const std::vector<LayerParams>& b);

}  // namespace ictd
