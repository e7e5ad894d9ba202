#include "pfm/estimation.hpp"

#include <Eigen/SVD>
#include <cstdio>

namespace pfm {

JacobianEstimate estimate_jacobian(const Layout& layout, const Eigen::MatrixXd& dX,
                                   const Eigen::MatrixXd& dY) {
  const int n = layout.n();
  const int m = static_cast<int>(dX.cols());
  if (dX.rows() != n || dY.rows() != layout.full_rows() || dY.cols() != m)
    throw ValidationError("estimate_jacobian: inconsistent increment shapes");
  if (m < n)
    throw ValidationError("estimate_jacobian: " + std::to_string(m) +
                          " samples, need at least " + std::to_string(n));

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dX, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cond = sv(0) / sv(n - 1);
  if (!(sv(n - 1) > 0.0) || sv(n - 1) / sv(0) < 1e-10) {
    Eigen::VectorXd null_dir = svd.matrixU().col(n - 1);
    std::vector<double> dir(null_dir.data(), null_dir.data() + n);
    throw RankDeficiencyError(
        "increment matrix is rank-deficient; unexcited state direction attached",
        std::move(dir));
  }

  JacobianEstimate est;
  est.layout = layout;
  est.condition_number = cond;
  est.source = Provenance::Data;

  // J dX = dY  =>  dX^T J^T = dY^T, solved via the SVD of dX
  // (invariant to sample order up to roundoff; exact inverse when m == n)
  est.jac_full = svd.solve(dY.transpose()).transpose();

  Eigen::MatrixXd resid = est.jac_full * dX - dY;
  est.fit_residual = dY.norm() > 0 ? resid.norm() / dY.norm() : 0.0;
  est.row_residuals = resid.rowwise().norm();
  return est;
}

JacobianEstimate model_jacobian(const NetworkCase& net, const AdmittanceMatrices& Y,
                                const OperatingPoint& op) {
  JacobianEstimate est;
  est.layout = net.layout();
  est.jac_full = full_jacobian(net.layout(), Y, op.delta, op.v);
  est.condition_number = 1.0;
  est.fit_residual = 0.0;
  est.row_residuals = Eigen::VectorXd::Zero(est.layout.full_rows());
  est.source = Provenance::Model;
  return est;
}

double v_block_consistency(const JacobianEstimate& est, const Eigen::VectorXd& p,
                           const Eigen::VectorXd& q, const Eigen::VectorXd& v) {
  const Layout& L = est.layout;
  FlowTermSet terms = recover_flow_terms(est.jac_full, p, q, v, L, est.source);
  Eigen::MatrixXd predicted = v_columns_from_terms(terms, p, q);
  Eigen::MatrixXd measured = est.jac_full.rightCols(L.Nl);
  const double scale = measured.norm();
  return scale > 0 ? (predicted - measured).norm() / scale : 0.0;
}

std::string jacobian_to_csv(const NetworkCase& net, const JacobianEstimate& est) {
  const Layout& L = net.layout();
  std::string out = "row";
  for (int i = 0; i < L.N - 1; ++i)
    out += ",ddelta_bus" + std::to_string(net.original_id(i));
  for (int i = 0; i < L.Nl; ++i)
    out += ",dv_bus" + std::to_string(net.original_id(i));
  out += "\n";
  char buf[64];
  for (int a = 0; a < L.full_rows(); ++a) {
    out += (L.row_is_p(a) ? "p_bus" : "q_bus") +
           std::to_string(net.original_id(L.row_bus(a)));
    for (int c = 0; c < L.n(); ++c) {
      std::snprintf(buf, sizeof buf, ",%.17g", est.jac_full(a, c));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace pfm
