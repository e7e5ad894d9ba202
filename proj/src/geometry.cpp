#include "pfm/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <cstdio>
#include <thread>

namespace pfm {

namespace {

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += workers) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace

int GeometryContext::pair_index(int i, int j) const {
  if (i > j) std::swap(i, j);
  return i * n_ - i * (i - 1) / 2 + (j - i);
}

double GeometryContext::christoffel(int m, int i, int j) const {
  return gamma_[m * (n_ * (n_ + 1) / 2) + pair_index(i, j)][0];
}

double GeometryContext::dchristoffel(int m, int i, int j, int k) const {
  return gamma_[m * (n_ * (n_ + 1) / 2) + pair_index(i, j)][1 + k];
}

double GeometryContext::dmetric_inverse(int i, int j, int k) const {
  return ginv_jet_[pair_index(i, j)][1 + k];
}

double GeometryContext::christoffel_derivative(int m, int i, int j,
                                               std::span<const int> vars) const {
  if (static_cast<int>(vars.size()) > s_max_)
    throw ValidationError("christoffel derivative order exceeds jet order");
  std::vector<uint8_t> sorted(vars.begin(), vars.end());
  std::sort(sorted.begin(), sorted.end());
  int idx = 0;
  for (uint8_t v : sorted) {
    idx = basis_->index_times_var(idx, v);
    if (idx < 0) throw ValidationError("bad variable index");
  }
  return christoffel_jet(m, i, j)[idx] * basis_->alpha_factorial(idx);
}

const Poly& GeometryContext::christoffel_jet(int m, int i, int j) const {
  return gamma_[m * (n_ * (n_ + 1) / 2) + pair_index(i, j)];
}
const Poly& GeometryContext::metric_jet(int i, int j) const {
  return g_jet_[pair_index(i, j)];
}
const Poly& GeometryContext::metric_inverse_jet(int i, int j) const {
  return ginv_jet_[pair_index(i, j)];
}

GeometryContext build_geometry(const MapTaylor& map, int s_max, int workers) {
  const int n = map.nvars;
  if (static_cast<int>(map.rows.size()) != n)
    throw ValidationError("geometry needs a square (reduced) map");
  if (map.order < s_max + 2)
    throw ValidationError("map expansion order too low for requested jet order");

  GeometryContext ctx;
  ctx.n_ = n;
  ctx.s_max_ = s_max;
  ctx.x0_ = map.x0;
  ctx.basis_ = map.basis;
  const MonomialBasis& basis = *map.basis;
  const int M = basis.size_up_to(s_max);
  const int P = n * (n + 1) / 2;

  ctx.J_ = map.jacobian();
  {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ctx.J_);
    if (svd.singularValues().tail(1)(0) <= 1e-10)
      throw NumericalError("reduced Jacobian is singular: base point on boundary");
  }
  ctx.J_lu_ = Eigen::PartialPivLU<Eigen::MatrixXd>(ctx.J_);

  // jets of the basis vectors r_i (Jacobian columns) and of the second
  // derivative vectors r_ij, shifted out of the map coefficients:
  //   J_{a,i}[alpha]  = c[alpha + e_i] * (alpha_i + 1)
  //   r_{ij,a}[alpha] = c[alpha + e_i + e_j] * shift factor
  auto pair_of = [n](int i, int j) { return i * n - i * (i - 1) / 2 + (j - i); };

  std::vector<Poly> Jjet(n * n, Poly::Zero(M));
  parallel_for(n * n, workers, [&](int ai) {
    const int a = ai / n, i = ai % n;
    Poly& row = Jjet[ai];
    for (int idx = 0; idx < M; ++idx) {
      const int up = basis.index_times_var(idx, i);
      row[idx] = map.rows[a][up] * (basis.exponent(idx, i) + 1);
    }
  });

  std::vector<Poly> Hjet(static_cast<size_t>(n) * P, Poly::Zero(M));
  parallel_for(P, workers, [&](int pr) {
    // recover (i, j) from the pair index
    int i = 0, rem = pr;
    while (rem >= n - i) rem -= n - i, ++i;
    const int j = i + rem;
    for (int a = 0; a < n; ++a) {
      Poly& row = Hjet[static_cast<size_t>(a) * P + pr];
      for (int idx = 0; idx < M; ++idx) {
        int up = basis.index_times_var(idx, i);
        up = basis.index_times_var(up, j);
        double f = (i == j) ? (basis.exponent(idx, i) + 2) * (basis.exponent(idx, i) + 1)
                            : (basis.exponent(idx, i) + 1) * (basis.exponent(idx, j) + 1);
        row[idx] = map.rows[a][up] * f;
      }
    }
  });

  // metric jet g_ij = sum_a J_{a,i} J_{a,j}
  ctx.g_jet_.assign(P, Poly::Zero(M));
  parallel_for(P, workers, [&](int pr) {
    int i = 0, rem = pr;
    while (rem >= n - i) rem -= n - i, ++i;
    const int j = i + rem;
    for (int a = 0; a < n; ++a)
      poly_mul_acc(basis, s_max, Jjet[a * n + i], Jjet[a * n + j], ctx.g_jet_[pr]);
  });

  ctx.g_ = Eigen::MatrixXd(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      ctx.g_(i, j) = ctx.g_(j, i) = ctx.g_jet_[pair_of(i, j)][0];
  ctx.ginv_ = ctx.g_.inverse();

  // inverse metric jet by the Neumann series (I + E)^{-1} g0^{-1},
  // E = g0^{-1} (g - g0); E has no constant term so the series truncates
  std::vector<Poly> E(n * n, Poly::Zero(M));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Poly& e = E[i * n + j];
      for (int k = 0; k < n; ++k)
        e += ctx.ginv_(i, k) * ctx.g_jet_[pair_of(std::min(k, j), std::max(k, j))];
      e[0] = 0.0;  // constant part of g0^{-1} g is the identity
    }
  std::vector<Poly> series(n * n, Poly::Zero(M));
  std::vector<Poly> term(n * n, Poly::Zero(M));
  for (int i = 0; i < n; ++i) series[i * n + i][0] = term[i * n + i][0] = 1.0;
  for (int t = 1; t <= s_max; ++t) {
    std::vector<Poly> next(n * n, Poly::Zero(M));
    parallel_for(n * n, workers, [&](int ij) {
      const int i = ij / n, j = ij % n;
      for (int k = 0; k < n; ++k)
        poly_mul_acc(basis, s_max, term[i * n + k], E[k * n + j], next[ij]);
      next[ij] *= -1.0;
    });
    term.swap(next);
    for (int ij = 0; ij < n * n; ++ij) series[ij] += term[ij];
  }
  ctx.ginv_jet_.assign(P, Poly::Zero(M));
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      Poly& out = ctx.ginv_jet_[pair_of(i, j)];
      for (int k = 0; k < n; ++k) out += series[i * n + k] * ctx.ginv_(k, j);
    }

  // Christoffel jets: Gamma^m_ij = <r_ij, r_k> g^{mk}
  ctx.gamma_.assign(static_cast<size_t>(n) * P, Poly::Zero(M));
  parallel_for(P, workers, [&](int pr) {
    std::vector<Poly> b(n, Poly::Zero(M));  // <r_ij, r_k>
    for (int k = 0; k < n; ++k)
      for (int a = 0; a < n; ++a)
        poly_mul_acc(basis, s_max, Hjet[static_cast<size_t>(a) * P + pr],
                     Jjet[a * n + k], b[k]);
    for (int m = 0; m < n; ++m) {
      Poly& out = ctx.gamma_[static_cast<size_t>(m) * P + pr];
      for (int k = 0; k < n; ++k)
        poly_mul_acc(basis, s_max, b[k],
                     ctx.ginv_jet_[pair_of(std::min(m, k), std::max(m, k))], out);
    }
  });

  return ctx;
}

GeodesicJet geodesic_jet(const GeometryContext& ctx, const Eigen::VectorXd& u,
                         int order) {
  const int n = ctx.dim();
  if (order < 2) throw ValidationError("geodesic jet order must be >= 2");
  if (order - 2 > ctx.jet_order())
    throw ValidationError("jet order exceeds available Christoffel derivatives");
  if (std::abs(u.norm() - 1.0) > 1e-9)
    throw ValidationError("direction must be a unit vector");

  GeodesicJet jet;
  jet.x0 = ctx.x0();
  jet.u = u;
  jet.order = order;
  jet.coeffs = Eigen::MatrixXd::Zero(n, order + 1);
  jet.coeffs.col(0) = ctx.x0();
  jet.coeffs.col(1) = ctx.jacobian_lu().solve(u);

  const int P = n * (n + 1) / 2;
  for (int k = 2; k <= order; ++k) {
    const int deg = k - 2;
    // displacement curve from the known coefficients
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, deg + 2);
    for (int p = 1; p < k && p <= deg + 1; ++p) h.col(p) = jet.coeffs.col(p);
    Eigen::MatrixXd mono = monomial_curve_values(ctx.basis(), deg, h, deg);

    // velocity lambda-polynomial
    Eigen::MatrixXd xd = Eigen::MatrixXd::Zero(n, deg + 1);
    for (int p = 1; p < k; ++p)
      if (p - 1 <= deg) xd.col(p - 1) = p * jet.coeffs.col(p);

    // lambda^{k-2} coefficient of Gamma^m_ij xd^i xd^j
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        const double w = (i == j) ? 1.0 : 2.0;
        // (xd_i * xd_j)(lambda) up to deg
        Eigen::VectorXd vv = Eigen::VectorXd::Zero(deg + 1);
        for (int t1 = 0; t1 <= deg; ++t1)
          for (int t2 = 0; t1 + t2 <= deg; ++t2)
            vv[t1 + t2] += xd(i, t1) * xd(j, t2);
        for (int m = 0; m < n; ++m) {
          const Poly& gam = ctx.christoffel_jet(m, i, j);
          Eigen::VectorXd gl = compose_row(gam, mono, deg);
          double s = 0.0;
          for (int t = 0; t <= deg; ++t) s += gl[t] * vv[deg - t];
          acc[m] += w * s;
        }
      }
    }
    jet.coeffs.col(k) = -acc / (static_cast<double>(k) * (k - 1));
  }
  return jet;
}

GeodesicJet series_inversion_jet(const MapTaylor& map, const Eigen::VectorXd& u,
                                 int order) {
  const int n = map.nvars;
  if (static_cast<int>(map.rows.size()) != n)
    throw ValidationError("series inversion needs a square map");
  if (map.order < order)
    throw ValidationError("map expansion order too low for requested jet order");
  Eigen::MatrixXd J = map.jacobian();
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
  {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
    if (svd.singularValues().tail(1)(0) <= 1e-10)
      throw NumericalError("series inversion: singular Jacobian");
  }

  GeodesicJet jet;
  jet.x0 = map.x0;
  jet.u = u;
  jet.order = order;
  jet.coeffs = Eigen::MatrixXd::Zero(n, order + 1);
  jet.coeffs.col(0) = map.x0;
  jet.coeffs.col(1) = lu.solve(u);

  for (int k = 2; k <= order; ++k) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, k + 1);
    for (int p = 1; p < k; ++p) h.col(p) = jet.coeffs.col(p);
    Eigen::MatrixXd mono = monomial_curve_values(*map.basis, k, h, k);
    // lambda^k coefficient of the nonlinear orders of r composed with h
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    const int lo = map.basis->size_up_to(1), hi = map.basis->size_up_to(std::min(k, map.order));
    for (int a = 0; a < n; ++a) {
      double sum = 0.0, comp = 0.0;
      for (int idx = lo; idx < hi; ++idx) {
        const double term = map.rows[a][idx] * mono(idx, k) - comp;
        const double next = sum + term;
        comp = (next - sum) - term;
        sum = next;
      }
      rhs[a] = -sum;
    }
    jet.coeffs.col(k) = lu.solve(rhs);
  }
  return jet;
}

Eigen::VectorXd evaluate_jet(const GeodesicJet& jet, double lambda) {
  Eigen::VectorXd x = jet.coeffs.col(jet.order);
  for (int k = jet.order - 1; k >= 0; --k) x = x * lambda + jet.coeffs.col(k);
  return x;
}

Eigen::MatrixXd compose_map_with_jet(const MapTaylor& map, const GeodesicJet& jet) {
  const int K = jet.order;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(map.nvars, K + 1);
  for (int p = 1; p <= K; ++p) h.col(p) = jet.coeffs.col(p);
  return map.compose(h, K);
}

Eigen::VectorXd speed_squared_jet(const GeometryContext& ctx, const GeodesicJet& jet) {
  const int n = ctx.dim();
  const int deg = std::min(jet.order - 2, ctx.jet_order());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, deg + 2);
  for (int p = 1; p <= std::min(jet.order, deg + 1); ++p) h.col(p) = jet.coeffs.col(p);
  Eigen::MatrixXd mono = monomial_curve_values(ctx.basis(), deg, h, deg);
  Eigen::MatrixXd xd = Eigen::MatrixXd::Zero(n, deg + 1);
  for (int p = 1; p <= jet.order; ++p)
    if (p - 1 <= deg) xd.col(p - 1) = p * jet.coeffs.col(p);

  Eigen::VectorXd out = Eigen::VectorXd::Zero(deg + 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd gl = compose_row(ctx.metric_jet(i, j), mono, deg);
      for (int t1 = 0; t1 <= deg; ++t1)
        for (int t2 = 0; t1 + t2 <= deg; ++t2)
          for (int t3 = 0; t1 + t2 + t3 <= deg; ++t3)
            out[t1 + t2 + t3] += gl[t1] * xd(i, t2) * xd(j, t3);
    }
  return out;
}

std::string jet_to_json(const GeodesicJet& jet) {
  char buf[64];
  std::string s = "{\n  \"order\": " + std::to_string(jet.order) + ",\n  \"direction\": [";
  for (int i = 0; i < jet.u.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.17g", i ? ", " : "", jet.u[i]);
    s += buf;
  }
  s += "],\n  \"coefficients\": [";
  for (int k = 0; k <= jet.order; ++k) {
    s += k ? ",\n    [" : "\n    [";
    for (int i = 0; i < jet.coeffs.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.17g", i ? ", " : "", jet.coeffs(i, k));
      s += buf;
    }
    s += "]";
  }
  s += "\n  ]\n}\n";
  return s;
}

}  // namespace pfm
