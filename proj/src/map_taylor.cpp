#include "pfm/map_taylor.hpp"

namespace pfm {

Eigen::VectorXd MapTaylor::value() const {
  Eigen::VectorXd y(rows.size());
  for (size_t a = 0; a < rows.size(); ++a) y[a] = rows[a][0];
  return y;
}

Eigen::MatrixXd MapTaylor::jacobian() const {
  Eigen::MatrixXd J(rows.size(), nvars);
  for (size_t a = 0; a < rows.size(); ++a)
    for (int i = 0; i < nvars; ++i) J(a, i) = rows[a][1 + i];
  return J;
}

Eigen::MatrixXd MapTaylor::compose(const Eigen::MatrixXd& h, int out_deg) const {
  const int cap = std::min(order, out_deg);
  Eigen::MatrixXd mono = monomial_curve_values(*basis, cap, h, out_deg);
  Eigen::MatrixXd out(rows.size(), out_deg + 1);
  for (size_t a = 0; a < rows.size(); ++a)
    out.row(a) = compose_row(rows[a], mono, out_deg).transpose();
  return out;
}

namespace {

MapTaylor build(const Eigen::VectorXd& x0, int nvars, int nrows, int order,
                const std::function<double(int, std::span<const int>)>& raw_partial,
                const Eigen::VectorXd& y0, const Eigen::MatrixXd& jac) {
  MapTaylor m;
  m.basis = std::make_shared<MonomialBasis>(nvars, order);
  m.nvars = nvars;
  m.order = order;
  m.x0 = x0;
  m.rows.assign(nrows, Poly::Zero(m.basis->size_up_to(order)));
  for (int a = 0; a < nrows; ++a) {
    m.rows[a][0] = y0[a];
    for (int i = 0; i < nvars; ++i) m.rows[a][1 + i] = jac(a, i);
  }
  if (!raw_partial) return m;
  std::vector<int> vars;
  for (int idx = m.basis->size_up_to(1); idx < m.basis->size_up_to(order); ++idx) {
    vars.assign(m.basis->vars(idx).begin(), m.basis->vars(idx).end());
    const double inv_fact = 1.0 / m.basis->alpha_factorial(idx);
    for (int a = 0; a < nrows; ++a) {
      const double d = raw_partial(a, vars);
      if (d != 0.0) m.rows[a][idx] = d * inv_fact;
    }
  }
  return m;
}

}  // namespace

MapTaylor map_taylor_from_terms(const FlowTermSet& terms, const Eigen::VectorXd& x0,
                                int order) {
  const Layout& L = terms.layout;
  const int n = L.n();
  if (x0.size() != n) throw ValidationError("map taylor: bad expansion point size");

  // base-point injections implied by the terms themselves
  Eigen::VectorXd y0(n);
  for (int a = 0; a < n; ++a) {
    std::complex<double> s = terms.C.row(L.row_bus(a)).sum();
    y0[a] = L.row_is_p(a) ? s.real() : s.imag();
  }
  DerivativeTensor t1(terms, 1);
  Eigen::MatrixXd jac(n, n);
  for (int a = 0; a < n; ++a)
    for (int i = 0; i < n; ++i) {
      const int v[1] = {i};
      jac(a, i) = t1.entry(a, v);
    }

  // reuse one tensor handle per order through the shared entry evaluator
  auto partial = [&terms](int row, std::span<const int> vars) {
    DerivativeTensor t(terms, static_cast<int>(vars.size()),
                       std::max<int>(8, vars.size()));
    return t.entry(row, vars);
  };
  return build(x0, n, n, order, partial, y0, jac);
}

MapTaylor make_map_taylor(const Eigen::VectorXd& x0, const Eigen::VectorXd& y0,
                          const Eigen::MatrixXd& jac, const PartialFn& partial,
                          int order) {
  return build(x0, static_cast<int>(x0.size()), static_cast<int>(y0.size()), order,
               partial, y0, jac);
}

}  // namespace pfm
