#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "pfm/errors.hpp"

namespace pfm {

/// Rational [L/M] approximant of a truncated power series, normalized to
/// b_0 = 1, with the roots of both polynomials attached.
struct PadeApproximant {
  Eigen::VectorXd num;  // a_0..a_L
  Eigen::VectorXd den;  // b_0..b_M, b_0 = 1
  int order_l = 0, order_m = 0;
  double toeplitz_rcond = 1.0;
  std::vector<std::complex<double>> den_roots;
  std::vector<std::complex<double>> num_roots;
};

/// Denominator from the M x M Toeplitz system over the top coefficients,
/// numerator by convolution. Throws NumericalError when the system's
/// reciprocal condition number falls below `rcond_min` (an even or odd
/// series does this structurally).
PadeApproximant pade_from_taylor(std::span<const double> coeffs, int L, int M,
                                 double rcond_min = 1e-12);

/// Retries at (L+1, M-1), (L+2, M-2), ... until a well-posed system is
/// found; the final fallback is the truncated polynomial itself.
PadeApproximant pade_with_fallback(std::span<const double> coeffs, int L, int M,
                                   double rcond_min = 1e-12);

/// Rational evaluation; refuses within 1e-9 of a real pole.
double evaluate_pade(const PadeApproximant& p, double lambda);

/// Residual of re-expanding num/den against the input series through order
/// L+M, scaled by the largest input coefficient.
double reexpansion_residual(const PadeApproximant& p, std::span<const double> coeffs);

/// Roots of a real polynomial: closed form through degree 3, companion
/// matrix eigenvalues beyond.
std::vector<std::complex<double>> polynomial_roots(const Eigen::VectorXd& coeffs);

struct PoleFilter {
  double imag_tol = 1e-3;       // |Im z| <= imag_tol * |z| counts as real
  double froissart_tol = 1e-6;  // pole-zero pair closer than this is spurious
  double horizon = 1e6;         // ignore poles beyond this distance
};

/// Distance to the singular boundary along one direction, aggregated over
/// the per-coordinate approximants.
struct BoundaryEstimate {
  double lambda_s = 0.0;          // median of per-coordinate smallest poles
  double spread_min = 0.0, spread_max = 0.0;
  std::vector<double> coordinate_poles;  // NaN where a coordinate had none
  int usable_coordinates = 0;
  Eigen::VectorXd boundary_injection;    // y0 + lambda_s * u
  Eigen::VectorXd boundary_state;        // evaluated just inside lambda_s
};

/// Smallest positive (filtered) real denominator root per coordinate,
/// median across coordinates. Returns nullopt when no coordinate exposes a
/// positive real pole within the horizon — reported, not fatal.
std::optional<BoundaryEstimate> smallest_real_pole(
    std::span<const PadeApproximant> coords, const PoleFilter& filter,
    const Eigen::VectorXd& y0, const Eigen::VectorXd& u);

}  // namespace pfm
