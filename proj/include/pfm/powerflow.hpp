#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "pfm/network.hpp"

namespace pfm {

/// Full system state and injections at one point. Vectors have length N
/// in canonical bus order; slack angle and PV/slack magnitudes are fixed
/// by the case data.
struct OperatingPoint {
  Eigen::VectorXd delta;  // radians
  Eigen::VectorXd v;      // p.u.
  Eigen::VectorXd p;      // p.u.
  Eigen::VectorXd q;      // p.u.
};

/// P_i = V_i sum_j V_j (G_ij cos d_ij + B_ij sin d_ij)
/// Q_i = V_i sum_j V_j (G_ij sin d_ij - B_ij cos d_ij), for every bus i.
void evaluate_injections(const AdmittanceMatrices& Y, const Eigen::VectorXd& delta,
                         const Eigen::VectorXd& v, Eigen::VectorXd& p,
                         Eigen::VectorXd& q);

/// Complex per-pair flow terms C_ij = H_ij + i K_ij for rows i < N-1,
/// where H_ij = V_i V_j (G_ij cos d_ij + B_ij sin d_ij) and
/// K_ij = V_i V_j (G_ij sin d_ij - B_ij cos d_ij).
Eigen::MatrixXcd flow_term_matrix(const AdmittanceMatrices& Y,
                                  const Eigen::VectorXd& delta,
                                  const Eigen::VectorXd& v);

/// Closed-form trigonometric Jacobian of the full map, 2(N-1) rows
/// [P_0..P_{N-2}, Q_0..Q_{N-2}] by n columns [delta, V_pq]. Validation
/// oracle and Newton workhorse; the data-based pipeline never sees it.
Eigen::MatrixXd full_jacobian(const Layout& layout, const AdmittanceMatrices& Y,
                              const Eigen::VectorXd& delta, const Eigen::VectorXd& v);

/// Square n-by-n block: drop the Q rows at PV buses.
inline Eigen::MatrixXd reduced_jacobian(const Layout& layout,
                                        const Eigen::MatrixXd& jac_full) {
  return jac_full.topRows(layout.n());
}

double smallest_singular_value(const Eigen::MatrixXd& m);

/// Per-angle admissible windows [b_k, b_k + L_k] with L_k < 2*pi.
struct AngleWindows {
  double lo = -3.14159265358979323846;
  double hi = 3.14159265358979323846;
  bool contains(const Eigen::VectorXd& delta) const {
    return (delta.array() >= lo).all() && (delta.array() <= hi).all();
  }
};

/// Injection targets in reduced coordinates: P at every non-slack bus,
/// Q at PQ buses.
struct InjectionTargets {
  Eigen::VectorXd y;  // length n
};

/// Reduced injection vector of an operating point.
Eigen::VectorXd reduced_injections(const Layout& layout, const OperatingPoint& op);
/// Reduced state vector [delta_0..delta_{N-2}, V_pq].
Eigen::VectorXd reduced_state(const Layout& layout, const OperatingPoint& op);

struct NewtonOptions {
  double tol = 1e-10;  // mismatch infinity-norm
  int max_iter = 50;
  AngleWindows windows;
};

struct NewtonResult {
  OperatingPoint op;
  int iterations = 0;
  double mismatch = 0.0;
  std::vector<double> history;  // mismatch after each iteration
};

/// Solve the reduced power flow for the given targets starting from the
/// reduced state x_init. Throws ConvergenceError / NumericalError.
NewtonResult newton_solve(const NetworkCase& net, const AdmittanceMatrices& Y,
                          const InjectionTargets& targets,
                          const Eigen::VectorXd& x_init,
                          const NewtonOptions& opts = {});

/// Same as newton_solve but reports failure via nullopt.
std::optional<NewtonResult> try_newton(const NetworkCase& net,
                                       const AdmittanceMatrices& Y,
                                       const InjectionTargets& targets,
                                       const Eigen::VectorXd& x_init,
                                       const NewtonOptions& opts = {});

/// Operating point implied by the case set-points, solved from a flat start.
OperatingPoint solve_base_point(const NetworkCase& net, const AdmittanceMatrices& Y,
                                const NewtonOptions& opts = {});

/// Builds a full OperatingPoint from a reduced state vector.
OperatingPoint operating_point_from_state(const NetworkCase& net,
                                          const AdmittanceMatrices& Y,
                                          const Eigen::VectorXd& x);

struct ContinuationConfig {
  double initial_step = 0.05;     // p.u. along the ray
  double max_step = 0.1;
  double min_step = 1e-9;
  double sigma_tol = 1e-6;        // singularity threshold on sigma_min
  double bisect_width = 1e-6;     // final bracket width for lambda*
  double max_state_jump = 0.5;    // reject steps that leap branches
  int max_steps = 20000;
  NewtonOptions newton;
};

struct TraceSample {
  double lambda;
  Eigen::VectorXd x;  // reduced state
  double sigma_min;
};

/// Ground-truth path r(x) = y0 + lambda*u up to the singular boundary.
struct ContinuationTrace {
  Eigen::VectorXd u;
  std::vector<TraceSample> samples;  // lambda strictly increasing
  double boundary_lambda = 0.0;
  Eigen::VectorXd boundary_state;
  double boundary_sigma = 0.0;
};

ContinuationTrace continuation_trace(const NetworkCase& net,
                                     const AdmittanceMatrices& Y,
                                     const OperatingPoint& base,
                                     const Eigen::VectorXd& u,
                                     const ContinuationConfig& cfg = {});

/// Newton solve at injections y0 + lambda*u, warm-started by marching from
/// the base point. Used to produce truth states on evaluation grids.
std::optional<Eigen::VectorXd> solve_along_ray(const NetworkCase& net,
                                               const AdmittanceMatrices& Y,
                                               const OperatingPoint& base,
                                               const Eigen::VectorXd& u,
                                               double lambda,
                                               const NewtonOptions& opts = {});

std::string trace_to_csv(const NetworkCase& net, const ContinuationTrace& trace);

}  // namespace pfm
