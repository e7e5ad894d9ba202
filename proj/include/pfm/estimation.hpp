#pragma once

#include <Eigen/Dense>

#include "pfm/flow_terms.hpp"
#include "pfm/measurement.hpp"

namespace pfm {

/// First-order full-map Jacobian recovered from measurement increments.
struct JacobianEstimate {
  Layout layout;
  Eigen::MatrixXd jac_full;      // 2(N-1) x n
  double condition_number = 0;   // of the increment matrix dX
  double fit_residual = 0;       // ||J dX - dY||_F / ||dY||_F
  Eigen::VectorXd row_residuals;
  Provenance source = Provenance::Data;
};

/// dX must have at least n columns of numerical rank n
/// (sigma_min / sigma_max >= 1e-10). With exactly n columns this inverts
/// the increment matrix; with more it is the least-squares fit.
JacobianEstimate estimate_jacobian(const Layout& layout, const Eigen::MatrixXd& dX,
                                   const Eigen::MatrixXd& dY);

/// Model-provenance estimate: the closed-form Jacobian, verbatim.
JacobianEstimate model_jacobian(const NetworkCase& net, const AdmittanceMatrices& Y,
                                const OperatingPoint& op);

/// Relative discrepancy between the measured voltage-magnitude columns and
/// their reconstruction from the angle columns via the flow terms. Large
/// values flag a bad patch; the V block is redundant for a consistent map.
double v_block_consistency(const JacobianEstimate& est, const Eigen::VectorXd& p,
                           const Eigen::VectorXd& q, const Eigen::VectorXd& v);

std::string jacobian_to_csv(const NetworkCase& net, const JacobianEstimate& est);

}  // namespace pfm
