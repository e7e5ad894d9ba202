#include "pfm/pade.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace pfm {

namespace {

// One Newton polish step keeps the closed-form roots honest in floating
// point; cheap and safe since we start next to the root.
std::complex<double> polish(const Eigen::VectorXd& c, std::complex<double> z) {
  for (int it = 0; it < 2; ++it) {
    std::complex<double> f(0, 0), df(0, 0);
    for (int k = static_cast<int>(c.size()) - 1; k >= 0; --k) {
      df = df * z + f;
      f = f * z + c[k];
    }
    if (std::abs(df) == 0.0) break;
    z -= f / df;
  }
  return z;
}

}  // namespace

std::vector<std::complex<double>> polynomial_roots(const Eigen::VectorXd& coeffs) {
  // strip trailing zeros
  int deg = static_cast<int>(coeffs.size()) - 1;
  while (deg > 0 && coeffs[deg] == 0.0) --deg;
  std::vector<std::complex<double>> roots;
  if (deg <= 0) return roots;

  if (deg == 1) {
    roots.push_back(polish(coeffs, {-coeffs[0] / coeffs[1], 0.0}));
  } else if (deg == 2) {
    const double a = coeffs[2], b = coeffs[1], c = coeffs[0];
    const std::complex<double> disc = std::sqrt(std::complex<double>(b * b - 4 * a * c));
    // stable split: avoid cancellation in the small root
    const std::complex<double> qq = -0.5 * (b + (b >= 0 ? disc : -disc));
    roots.push_back(polish(coeffs, qq / a));
    roots.push_back(polish(coeffs, std::abs(qq) > 0 ? c / qq : -qq / a));
  } else if (deg == 3) {
    // depressed-cubic closed form (Cardano), then polish
    const double a = coeffs[3], b = coeffs[2], c = coeffs[1], d = coeffs[0];
    const double p = (3 * a * c - b * b) / (3 * a * a);
    const double q = (2 * b * b * b - 9 * a * b * c + 27 * a * a * d) / (27 * a * a * a);
    const std::complex<double> sq =
        std::sqrt(std::complex<double>(q * q / 4 + p * p * p / 27));
    std::complex<double> w = -q / 2.0 + sq;
    if (std::abs(w) < 1e-300) w = -q / 2.0 - sq;
    const std::complex<double> cr = std::pow(w, 1.0 / 3.0);
    const std::complex<double> omega(-0.5, std::sqrt(3.0) / 2.0);
    for (int k = 0; k < 3; ++k) {
      std::complex<double> t = cr * std::pow(omega, k);
      std::complex<double> z = (std::abs(t) > 0 ? t - p / (3.0 * t) : t) - b / (3 * a);
      roots.push_back(polish(coeffs, z));
    }
  } else {
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -coeffs[i] / coeffs[deg];
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    for (int i = 0; i < deg; ++i) roots.push_back(es.eigenvalues()[i]);
  }
  return roots;
}

PadeApproximant pade_from_taylor(std::span<const double> coeffs, int L, int M,
                                 double rcond_min) {
  if (L < 0 || M < 0 || L + M + 1 > static_cast<int>(coeffs.size()))
    throw ValidationError("pade: need L+M+1 series coefficients");

  PadeApproximant p;
  p.order_l = L;
  p.order_m = M;
  p.den = Eigen::VectorXd::Zero(M + 1);
  p.den[0] = 1.0;

  if (M > 0) {
    Eigen::MatrixXd A(M, M);
    Eigen::VectorXd rhs(M);
    for (int r = 0; r < M; ++r) {
      const int k = L + 1 + r;
      rhs[r] = -coeffs[k];
      for (int j = 1; j <= M; ++j) A(r, j - 1) = (k - j) >= 0 ? coeffs[k - j] : 0.0;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    p.toeplitz_rcond = sv(0) > 0 ? sv(M - 1) / sv(0) : 0.0;
    if (!(p.toeplitz_rcond >= rcond_min))
      throw NumericalError("pade: coefficient system is singular (rcond " +
                           std::to_string(p.toeplitz_rcond) + ")");
    p.den.tail(M) = svd.solve(rhs);
  }

  p.num = Eigen::VectorXd::Zero(L + 1);
  for (int k = 0; k <= L; ++k) {
    double s = 0.0;
    for (int j = 0; j <= std::min(k, M); ++j) s += p.den[j] * coeffs[k - j];
    p.num[k] = s;
  }
  p.den_roots = polynomial_roots(p.den);
  p.num_roots = polynomial_roots(p.num);
  return p;
}

PadeApproximant pade_with_fallback(std::span<const double> coeffs, int L, int M,
                                   double rcond_min) {
  while (M > 0) {
    try {
      return pade_from_taylor(coeffs, L, M, rcond_min);
    } catch (const NumericalError&) {
      ++L;
      --M;
    }
  }
  return pade_from_taylor(coeffs, L, 0, rcond_min);
}

double evaluate_pade(const PadeApproximant& p, double lambda) {
  for (const auto& z : p.den_roots)
    if (std::abs(z.imag()) <= 1e-9 && std::abs(lambda - z.real()) < 1e-9)
      throw NumericalError("pade evaluation at a pole");
  double num = 0.0, den = 0.0;
  for (int k = static_cast<int>(p.num.size()) - 1; k >= 0; --k)
    num = num * lambda + p.num[k];
  for (int k = static_cast<int>(p.den.size()) - 1; k >= 0; --k)
    den = den * lambda + p.den[k];
  return num / den;
}

double reexpansion_residual(const PadeApproximant& p, std::span<const double> coeffs) {
  const int K = p.order_l + p.order_m;
  // series of num/den: c'_k = (a_k - sum_{j>=1} b_j c'_{k-j}) / b_0
  std::vector<double> c(K + 1, 0.0);
  double scale = 0.0;
  for (int k = 0; k <= K; ++k) {
    double s = k < p.num.size() ? p.num[k] : 0.0;
    for (int j = 1; j <= std::min<int>(k, p.order_m); ++j) s -= p.den[j] * c[k - j];
    c[k] = s;
    scale = std::max(scale, std::abs(coeffs[k]));
  }
  double worst = 0.0;
  for (int k = 0; k <= K; ++k) worst = std::max(worst, std::abs(c[k] - coeffs[k]));
  return scale > 0 ? worst / scale : worst;
}

std::optional<BoundaryEstimate> smallest_real_pole(
    std::span<const PadeApproximant> coords, const PoleFilter& filter,
    const Eigen::VectorXd& y0, const Eigen::VectorXd& u) {
  BoundaryEstimate est;
  est.coordinate_poles.assign(coords.size(), std::numeric_limits<double>::quiet_NaN());

  std::vector<double> poles;
  for (size_t c = 0; c < coords.size(); ++c) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& z : coords[c].den_roots) {
      if (!(z.real() > 0.0)) continue;
      if (std::abs(z.imag()) > filter.imag_tol * std::abs(z)) continue;
      if (z.real() > filter.horizon) continue;
      bool spurious = false;
      for (const auto& nz : coords[c].num_roots)
        if (std::abs(z - nz) <= filter.froissart_tol * std::abs(z)) {
          spurious = true;
          break;
        }
      if (spurious) continue;
      best = std::min(best, z.real());
    }
    if (std::isfinite(best)) {
      est.coordinate_poles[c] = best;
      poles.push_back(best);
    }
  }
  if (poles.empty()) return std::nullopt;

  std::sort(poles.begin(), poles.end());
  const size_t h = poles.size() / 2;
  est.lambda_s = poles.size() % 2 ? poles[h] : 0.5 * (poles[h - 1] + poles[h]);
  est.spread_min = poles.front();
  est.spread_max = poles.back();
  est.usable_coordinates = static_cast<int>(poles.size());
  est.boundary_injection = y0 + est.lambda_s * u;

  // state estimate just inside the first singularity any coordinate sees
  const double inside = 0.999 * std::min(est.lambda_s, poles.front());
  est.boundary_state.resize(coords.size());
  for (size_t c = 0; c < coords.size(); ++c)
    est.boundary_state[c] = evaluate_pade(coords[c], inside);
  return est;
}

}  // namespace pfm
