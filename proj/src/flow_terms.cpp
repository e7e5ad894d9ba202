#include "pfm/flow_terms.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace pfm {

double FlowTermSet::row_sum_residual(const Eigen::VectorXd& p,
                                     const Eigen::VectorXd& q) const {
  double worst = 0.0;
  for (int i = 0; i < layout.N - 1; ++i) {
    std::complex<double> s = C.row(i).sum();
    worst = std::max(worst, std::abs(s.real() - p[i]));
    worst = std::max(worst, std::abs(s.imag() - q[i]));
  }
  return worst;
}

FlowTermSet model_flow_terms(const NetworkCase& net, const AdmittanceMatrices& Y,
                             const OperatingPoint& op) {
  FlowTermSet t;
  t.layout = net.layout();
  t.C = flow_term_matrix(Y, op.delta, op.v);
  t.V = op.v;
  t.provenance = Provenance::Model;
  return t;
}

FlowTermSet recover_flow_terms(const Eigen::MatrixXd& jac_full,
                               const Eigen::VectorXd& p, const Eigen::VectorXd& q,
                               const Eigen::VectorXd& v, const Layout& layout,
                               Provenance provenance) {
  const int N = layout.N;
  if (jac_full.rows() != layout.full_rows() || jac_full.cols() != layout.n())
    throw ValidationError("recover_flow_terms: Jacobian has wrong shape");
  if (v.size() != N) throw ValidationError("recover_flow_terms: need all bus voltages");

  FlowTermSet t;
  t.layout = layout;
  t.V = v;
  t.provenance = provenance;
  t.C = Eigen::MatrixXcd::Zero(N - 1, N);

  for (int i = 0; i < N - 1; ++i) {
    std::complex<double> partner_sum(0.0, 0.0);
    for (int j = 0; j < N - 1; ++j) {
      double h, k;
      if (j == i) {
        k = q[i] + jac_full(i, i);            // K_ii = Q_i + dP_i/d(delta_i)
        h = p[i] - jac_full((N - 1) + i, i);  // H_ii = P_i - dQ_i/d(delta_i)
      } else {
        k = jac_full(i, j);             // dP_i/d(delta_j)
        h = -jac_full((N - 1) + i, j);  // -dQ_i/d(delta_j)
      }
      t.C(i, j) = std::complex<double>(h, k);
      partner_sum += t.C(i, j);
    }
    t.C(i, N - 1) = std::complex<double>(p[i], q[i]) - partner_sum;
  }
  return t;
}

DerivativeTensor::DerivativeTensor(const FlowTermSet& terms, int order, int max_order)
    : terms_(&terms), order_(order) {
  if (order < 1) throw ValidationError("derivative order must be >= 1");
  if (order > max_order)
    throw ValidationError("derivative order " + std::to_string(order) +
                          " exceeds configured maximum " + std::to_string(max_order));
  if ((terms.V.array() <= 0.0).any())
    throw ValidationError("derivative tensor requires positive voltages");
}

namespace {

// Derivative of a single term C_ij under per-bus multiplicities:
//   p angle derivatives at i, q at j, m_i / m_j magnitude derivatives.
// Off-diagonal terms are degree 1 in each magnitude, the diagonal is
// degree 2 in V_i and angle-free.
inline std::complex<double> term_derivative(const std::complex<double>& c, int i,
                                            int j, double vi, double vj, int p,
                                            int q, int mi, int mj) {
  if (i == j) {
    if (p + q > 0) return {0.0, 0.0};
    const int m = mi;
    if (m == 0) return c;
    if (m == 1) return 2.0 * c / vi;
    if (m == 2) return 2.0 * c / (vi * vi);
    return {0.0, 0.0};
  }
  if (mi > 1 || mj > 1) return {0.0, 0.0};
  std::complex<double> out = c;
  static const std::complex<double> ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  out *= ipow[(p + q) % 4];
  if (q % 2 == 1) out = -out;
  if (mi) out /= vi;
  if (mj) out /= vj;
  return out;
}

}  // namespace

double DerivativeTensor::entry(int row, std::span<const int> vars) const {
  const FlowTermSet& t = *terms_;
  const Layout& L = t.layout;
  const int i = L.row_bus(row);
  const bool is_p = L.row_is_p(row);

  // multiplicities per (bus, kind); at most `order` distinct slots
  std::array<int, 8> bus{}, ang{}, mag{};
  int nb = 0;
  for (int v : vars) {
    const int b = L.var_bus(v);
    const bool a = L.var_is_angle(v);
    int s = 0;
    while (s < nb && bus[s] != b) ++s;
    if (s == nb) {
      bus[s] = b;
      ang[s] = mag[s] = 0;
      ++nb;
    }
    (a ? ang[s] : mag[s]) += 1;
  }

  int self = -1, other = -1;
  for (int s = 0; s < nb; ++s) {
    if (bus[s] == i) self = s;
    else if (other < 0) other = s;
    else return 0.0;  // touches two distinct partner buses
  }
  const int p = self >= 0 ? ang[self] : 0;
  const int mi = self >= 0 ? mag[self] : 0;

  if (other >= 0) {
    const int j = bus[other];
    std::complex<double> d = term_derivative(t.C(i, j), i, j, t.V[i], t.V[j], p,
                                             ang[other], mi, mag[other]);
    return is_p ? d.real() : d.imag();
  }

  // every index touches the row bus: all partner terms participate
  std::complex<double> acc(0.0, 0.0);
  for (int l = 0; l < L.N; ++l)
    acc += term_derivative(t.C(i, l), i, l, t.V[i], t.V[l], p, 0, mi, 0);
  return is_p ? acc.real() : acc.imag();
}

Eigen::MatrixXd v_columns_from_terms(const FlowTermSet& terms,
                                     const Eigen::VectorXd& p,
                                     const Eigen::VectorXd& q) {
  const Layout& L = terms.layout;
  Eigen::MatrixXd out(L.full_rows(), L.Nl);
  for (int i = 0; i < L.N - 1; ++i) {
    for (int m = 0; m < L.Nl; ++m) {
      if (m == i) {
        out(i, m) = (p[i] + terms.C(i, i).real()) / terms.V[i];
        out((L.N - 1) + i, m) = (q[i] + terms.C(i, i).imag()) / terms.V[i];
      } else {
        out(i, m) = terms.C(i, m).real() / terms.V[m];
        out((L.N - 1) + i, m) = terms.C(i, m).imag() / terms.V[m];
      }
    }
  }
  return out;
}

}  // namespace pfm
