#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "pfm/map_taylor.hpp"

namespace pfm {

/// Riemannian data of the pullback metric g = J^T J at a single point,
/// with spatial Taylor jets of the inverse metric and the Christoffel
/// symbols up to order s_max. Immutable after construction.
class GeometryContext {
 public:
  int dim() const { return n_; }
  int jet_order() const { return s_max_; }
  const Eigen::VectorXd& x0() const { return x0_; }
  const Eigen::MatrixXd& jacobian() const { return J_; }
  const Eigen::MatrixXd& metric() const { return g_; }
  const Eigen::MatrixXd& metric_inverse() const { return ginv_; }
  const Eigen::PartialPivLU<Eigen::MatrixXd>& jacobian_lu() const { return J_lu_; }

  double christoffel(int m, int i, int j) const;
  /// d Gamma^m_ij / d x_k (first-order spatial derivative).
  double dchristoffel(int m, int i, int j, int k) const;
  /// d g^{ij} / d x_k.
  double dmetric_inverse(int i, int j, int k) const;
  /// Raw derivative for an arbitrary multi-index of order <= s_max.
  double christoffel_derivative(int m, int i, int j,
                                std::span<const int> vars) const;

  const MonomialBasis& basis() const { return *basis_; }
  /// Taylor coefficient row of Gamma^m_ij over the basis prefix.
  const Poly& christoffel_jet(int m, int i, int j) const;
  const Poly& metric_jet(int i, int j) const;
  const Poly& metric_inverse_jet(int i, int j) const;

 private:
  friend GeometryContext build_geometry(const MapTaylor&, int, int);
  int n_ = 0, s_max_ = 0;
  Eigen::VectorXd x0_;
  Eigen::MatrixXd J_, g_, ginv_;
  Eigen::PartialPivLU<Eigen::MatrixXd> J_lu_;
  std::shared_ptr<const MonomialBasis> basis_;
  std::vector<Poly> gamma_;  // (m, pair i<=j) -> coefficients
  std::vector<Poly> g_jet_, ginv_jet_;  // pair i<=j -> coefficients
  int pair_index(int i, int j) const;
};

/// Builds metric, inverse, Christoffel symbols and their spatial jets from
/// the map expansion (which must carry derivatives up to order s_max + 2).
/// `workers` bounds the thread count for the heavy contractions.
GeometryContext build_geometry(const MapTaylor& map, int s_max, int workers = 1);

/// Truncated geodesic series x(lambda) = sum Omega_k lambda^k emanating
/// from x0 with unit injection-space speed.
struct GeodesicJet {
  Eigen::VectorXd x0;
  Eigen::VectorXd u;         // unit direction in injection space
  int order = 0;             // K
  Eigen::MatrixXd coeffs;    // n x (K+1); column k holds Omega_k
};

/// Christoffel-recursion expansion: Omega_2 = -1/2 Gamma(xd, xd), higher
/// orders from the lambda-jet of Gamma composed along the partial curve.
GeodesicJet geodesic_jet(const GeometryContext& ctx, const Eigen::VectorXd& u,
                         int order);

/// Independent derivation: solve r(x(lambda)) = y0 + lambda*u order by
/// order. Produces the same coefficients because pullback geodesics map to
/// straight injection-space rays.
GeodesicJet series_inversion_jet(const MapTaylor& map, const Eigen::VectorXd& u,
                                 int order);

/// Horner evaluation of the truncated series.
Eigen::VectorXd evaluate_jet(const GeodesicJet& jet, double lambda);

/// Lambda-coefficients of r(x(lambda)) for the given jet; order 0 must be
/// y0, order 1 the direction u, higher orders vanish to truncation error.
Eigen::MatrixXd compose_map_with_jet(const MapTaylor& map, const GeodesicJet& jet);

/// Lambda-coefficients of g_{ij}(x(lambda)) xd^i xd^j (speed squared along
/// the curve); equals 1 through order K-2 for a unit-speed geodesic.
Eigen::VectorXd speed_squared_jet(const GeometryContext& ctx, const GeodesicJet& jet);

std::string jet_to_json(const GeodesicJet& jet);

}  // namespace pfm
