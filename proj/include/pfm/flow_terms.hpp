#pragma once

#include <Eigen/Dense>
#include <complex>
#include <span>

#include "pfm/network.hpp"
#include "pfm/powerflow.hpp"

namespace pfm {

enum class Provenance { Data, Model };

/// Complex per-pair flow terms C_ij = H_ij + i K_ij at the operating point,
/// recovered from first-order data or evaluated from the model. Together
/// with the base voltages these generate every higher-order derivative of
/// the full power-flow map:
///
///   d/d(delta_m) C_ij = i ([m=i] - [m=j]) C_ij        (rotation)
///   d/d(V_m)     C_ij = ([m=i] + [m=j]) / V_m * C_ij   (scaling)
///
/// with repeated voltage derivatives terminating at the polynomial degree
/// of C_ij in each magnitude (1 off-diagonal, 2 on the diagonal).
struct FlowTermSet {
  Layout layout;
  Eigen::MatrixXcd C;  // (N-1) x N
  Eigen::VectorXd V;   // length N, base-point magnitudes
  Provenance provenance = Provenance::Model;

  /// Row-sum residuals against given base injections: sum_j Re C_ij - P_i
  /// and sum_j Im C_ij - Q_i.
  double row_sum_residual(const Eigen::VectorXd& p, const Eigen::VectorXd& q) const;
};

/// Exact evaluation from network data; the model-provenance reference.
FlowTermSet model_flow_terms(const NetworkCase& net, const AdmittanceMatrices& Y,
                             const OperatingPoint& op);

/// Rebuild the terms from the angle columns of a full-map Jacobian plus the
/// base-point (P, Q, V):
///   off-diagonal j <= N-2, j != i:  K_ij = dP_i/d(delta_j), H_ij = -dQ_i/d(delta_j)
///   diagonal:  K_ii = Q_i + dP_i/d(delta_i),  H_ii = P_i - dQ_i/d(delta_i)
///   slack partner:  C_iN = (P_i + i Q_i) - sum_{j<=N-2} C_ij
FlowTermSet recover_flow_terms(const Eigen::MatrixXd& jac_full,
                               const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                               const Eigen::VectorXd& v, const Layout& layout,
                               Provenance provenance);

/// Exact mixed partials of the full power-flow map at the base point,
/// generated on demand from a FlowTermSet. Entries are symmetric in the
/// differentiation indices by construction (lookups canonicalize), and
/// nonzero only when every index touches the row bus or one common
/// partner bus.
class DerivativeTensor {
 public:
  DerivativeTensor(const FlowTermSet& terms, int order, int max_order = 8);

  int order() const { return order_; }
  const FlowTermSet& terms() const { return *terms_; }

  /// d^k (P_row or Q_row) / d x_{vars[0]} ... d x_{vars[k-1]}.
  /// `row` indexes the full map; `vars` are reduced-coordinate indices.
  double entry(int row, std::span<const int> vars) const;

 private:
  const FlowTermSet* terms_;
  int order_;
};

inline DerivativeTensor derivative_tensor(const FlowTermSet& terms, int order,
                                          int max_order = 8) {
  return DerivativeTensor(terms, order, max_order);
}

/// Predicted voltage-magnitude columns of the full Jacobian implied by the
/// terms; used to cross-check measured V columns (they are redundant).
Eigen::MatrixXd v_columns_from_terms(const FlowTermSet& terms,
                                     const Eigen::VectorXd& p,
                                     const Eigen::VectorXd& q);

}  // namespace pfm
