#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "pfm/flow_terms.hpp"
#include "pfm/poly.hpp"

namespace pfm {

/// Multivariate Taylor expansion of a square map y = r(x) around x0, stored
/// as per-row coefficient arrays over a shared monomial basis (coefficient
/// of monomial alpha is the alpha-th partial divided by alpha!). Constant
/// coefficients are y0, linear ones the Jacobian.
struct MapTaylor {
  std::shared_ptr<const MonomialBasis> basis;
  int nvars = 0;
  int order = 0;
  Eigen::VectorXd x0;
  std::vector<Poly> rows;  // each of length basis->size_up_to(order)

  Eigen::VectorXd value() const;      // y0
  Eigen::MatrixXd jacobian() const;   // rows x nvars

  /// y(lambda) coefficients of r(x0 + h(lambda)), h given as nvars rows of
  /// lambda coefficients with zero constant column.
  Eigen::MatrixXd compose(const Eigen::MatrixXd& h, int out_deg) const;
};

/// Reduced-map expansion generated from recovered flow terms: rows are
/// [P_0..P_{N-2}, Q at PQ buses], variables the reduced coordinates.
MapTaylor map_taylor_from_terms(const FlowTermSet& terms, const Eigen::VectorXd& x0,
                                int order);

/// Assemble from an arbitrary mixed-partial evaluator (tests, toy maps).
/// `partial(row, vars)` returns the raw derivative for |vars| >= 2 and may
/// be empty for linear maps.
using PartialFn = std::function<double(int, std::span<const int>)>;
MapTaylor make_map_taylor(const Eigen::VectorXd& x0, const Eigen::VectorXd& y0,
                          const Eigen::MatrixXd& jac, const PartialFn& partial,
                          int order);

}  // namespace pfm
