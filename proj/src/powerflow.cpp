#include "pfm/powerflow.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <cstdio>

namespace pfm {

void evaluate_injections(const AdmittanceMatrices& Y, const Eigen::VectorXd& delta,
                         const Eigen::VectorXd& v, Eigen::VectorXd& p,
                         Eigen::VectorXd& q) {
  const int N = static_cast<int>(delta.size());
  p.resize(N);
  q.resize(N);
  for (int i = 0; i < N; ++i) {
    double pi = 0.0, qi = 0.0;
    for (int j = 0; j < N; ++j) {
      const double g = Y.G(i, j), b = Y.B(i, j);
      if (g == 0.0 && b == 0.0) continue;
      const double dij = delta[i] - delta[j];
      const double c = std::cos(dij), s = std::sin(dij);
      pi += v[j] * (g * c + b * s);
      qi += v[j] * (g * s - b * c);
    }
    p[i] = v[i] * pi;
    q[i] = v[i] * qi;
  }
}

Eigen::MatrixXcd flow_term_matrix(const AdmittanceMatrices& Y,
                                  const Eigen::VectorXd& delta,
                                  const Eigen::VectorXd& v) {
  const int N = static_cast<int>(delta.size());
  Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(N - 1, N);
  for (int i = 0; i < N - 1; ++i) {
    for (int j = 0; j < N; ++j) {
      const double g = Y.G(i, j), b = Y.B(i, j);
      if (g == 0.0 && b == 0.0) continue;
      const double dij = delta[i] - delta[j];
      const double c = std::cos(dij), s = std::sin(dij);
      C(i, j) = std::complex<double>(v[i] * v[j] * (g * c + b * s),
                                     v[i] * v[j] * (g * s - b * c));
    }
  }
  return C;
}

Eigen::MatrixXd full_jacobian(const Layout& layout, const AdmittanceMatrices& Y,
                              const Eigen::VectorXd& delta,
                              const Eigen::VectorXd& v) {
  const int N = layout.N;
  const int n = layout.n();
  Eigen::MatrixXcd C = flow_term_matrix(Y, delta, v);
  Eigen::VectorXd p, q;
  evaluate_injections(Y, delta, v, p, q);

  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(layout.full_rows(), n);
  for (int i = 0; i < N - 1; ++i) {
    const int rp = i, rq = (N - 1) + i;
    for (int col = 0; col < n; ++col) {
      const int bus = layout.var_bus(col);
      if (layout.var_is_angle(col)) {
        if (bus == i) {
          J(rp, col) = -q[i] - Y.B(i, i) * v[i] * v[i];  // K_ii - Q_i
          J(rq, col) = p[i] - Y.G(i, i) * v[i] * v[i];   // P_i - H_ii
        } else {
          J(rp, col) = C(i, bus).imag();   // K_ij
          J(rq, col) = -C(i, bus).real();  // -H_ij
        }
      } else {
        if (bus == i) {
          J(rp, col) = p[i] / v[i] + Y.G(i, i) * v[i];  // (P_i + H_ii)/V_i
          J(rq, col) = q[i] / v[i] - Y.B(i, i) * v[i];  // (Q_i + K_ii)/V_i
        } else {
          J(rp, col) = C(i, bus).real() / v[bus];
          J(rq, col) = C(i, bus).imag() / v[bus];
        }
      }
    }
  }
  return J;
}

double smallest_singular_value(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues().tail(1)(0);
}

Eigen::VectorXd reduced_injections(const Layout& layout, const OperatingPoint& op) {
  Eigen::VectorXd y(layout.n());
  for (int i = 0; i < layout.N - 1; ++i) y[i] = op.p[i];
  for (int i = 0; i < layout.Nl; ++i) y[layout.N - 1 + i] = op.q[i];
  return y;
}

Eigen::VectorXd reduced_state(const Layout& layout, const OperatingPoint& op) {
  Eigen::VectorXd x(layout.n());
  for (int i = 0; i < layout.N - 1; ++i) x[i] = op.delta[i];
  for (int i = 0; i < layout.Nl; ++i) x[layout.N - 1 + i] = op.v[i];
  return x;
}

OperatingPoint operating_point_from_state(const NetworkCase& net,
                                          const AdmittanceMatrices& Y,
                                          const Eigen::VectorXd& x) {
  const Layout& L = net.layout();
  OperatingPoint op;
  op.delta.resize(L.N);
  op.v.resize(L.N);
  for (int i = 0; i < L.N - 1; ++i) op.delta[i] = x[i];
  op.delta[L.slack()] = net.bus(L.slack()).angle;
  for (int i = 0; i < L.N; ++i)
    op.v[i] = L.is_pq(i) ? x[L.N - 1 + i] : net.bus(i).v_set;
  evaluate_injections(Y, op.delta, op.v, op.p, op.q);
  return op;
}

namespace {

Eigen::VectorXd reduced_map_value(const NetworkCase& net, const AdmittanceMatrices& Y,
                                  const Eigen::VectorXd& x) {
  OperatingPoint op = operating_point_from_state(net, Y, x);
  return reduced_injections(net.layout(), op);
}

}  // namespace

std::optional<NewtonResult> try_newton(const NetworkCase& net,
                                       const AdmittanceMatrices& Y,
                                       const InjectionTargets& targets,
                                       const Eigen::VectorXd& x_init,
                                       const NewtonOptions& opts) {
  const Layout& L = net.layout();
  const int n = L.n();
  if (x_init.size() != n) throw ValidationError("newton: bad initial state size");
  if (!opts.windows.contains(x_init.head(L.N - 1)))
    throw ValidationError("newton: initial angles outside admissible window");

  NewtonResult res;
  Eigen::VectorXd x = x_init;
  Eigen::VectorXd f = reduced_map_value(net, Y, x);
  double mis = (f - targets.y).lpNorm<Eigen::Infinity>();
  res.history.push_back(mis);

  for (int it = 0; it < opts.max_iter; ++it) {
    if (mis <= opts.tol) {
      res.op = operating_point_from_state(net, Y, x);
      res.iterations = it;
      res.mismatch = mis;
      return res;
    }
    OperatingPoint op = operating_point_from_state(net, Y, x);
    Eigen::MatrixXd Jr = reduced_jacobian(L, full_jacobian(L, Y, op.delta, op.v));
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(Jr);
    Eigen::VectorXd dx = lu.solve(targets.y - f);
    if (!dx.allFinite()) return std::nullopt;  // singular iterate
    x += dx;
    if (!opts.windows.contains(x.head(L.N - 1))) return std::nullopt;
    if ((x.tail(L.Nl).array() <= 0.0).any()) return std::nullopt;  // collapsed voltage
    f = reduced_map_value(net, Y, x);
    mis = (f - targets.y).lpNorm<Eigen::Infinity>();
    res.history.push_back(mis);
    if (!std::isfinite(mis)) return std::nullopt;
  }
  if (mis <= opts.tol) {
    res.op = operating_point_from_state(net, Y, x);
    res.iterations = opts.max_iter;
    res.mismatch = mis;
    return res;
  }
  return std::nullopt;
}

NewtonResult newton_solve(const NetworkCase& net, const AdmittanceMatrices& Y,
                          const InjectionTargets& targets,
                          const Eigen::VectorXd& x_init, const NewtonOptions& opts) {
  auto r = try_newton(net, Y, targets, x_init, opts);
  if (!r)
    throw ConvergenceError(
        "power flow did not converge; target may lie outside the feasible region");
  return *r;
}

OperatingPoint solve_base_point(const NetworkCase& net, const AdmittanceMatrices& Y,
                                const NewtonOptions& opts) {
  const Layout& L = net.layout();
  InjectionTargets t;
  t.y.resize(L.n());
  for (int i = 0; i < L.N - 1; ++i) t.y[i] = net.bus(i).p_inj;
  for (int i = 0; i < L.Nl; ++i) t.y[L.N - 1 + i] = net.bus(i).q_inj;

  Eigen::VectorXd x0(L.n());
  for (int i = 0; i < L.N - 1; ++i) x0[i] = net.bus(L.slack()).angle;
  for (int i = 0; i < L.Nl; ++i) x0[L.N - 1 + i] = 1.0;
  return newton_solve(net, Y, t, x0, opts).op;
}

std::optional<Eigen::VectorXd> solve_along_ray(const NetworkCase& net,
                                               const AdmittanceMatrices& Y,
                                               const OperatingPoint& base,
                                               const Eigen::VectorXd& u,
                                               double lambda,
                                               const NewtonOptions& opts) {
  const Layout& L = net.layout();
  Eigen::VectorXd y0 = reduced_injections(L, base);
  Eigen::VectorXd x = reduced_state(L, base);
  double step = std::max(0.05, lambda / 64.0);
  double at = 0.0;
  while (at < lambda) {
    double next = std::min(lambda, at + step);
    InjectionTargets t{y0 + next * u};
    auto r = try_newton(net, Y, t, x, opts);
    if (!r) {
      step /= 2;
      if (step < 1e-10) return std::nullopt;
      continue;
    }
    x = reduced_state(L, r->op);
    at = next;
  }
  return x;
}

ContinuationTrace continuation_trace(const NetworkCase& net,
                                     const AdmittanceMatrices& Y,
                                     const OperatingPoint& base,
                                     const Eigen::VectorXd& u,
                                     const ContinuationConfig& cfg) {
  const Layout& L = net.layout();
  if (std::abs(u.norm() - 1.0) > 1e-9)
    throw ValidationError("continuation direction must be a unit vector");

  Eigen::VectorXd y0 = reduced_injections(L, base);
  auto sigma_at = [&](const Eigen::VectorXd& x) {
    OperatingPoint op = operating_point_from_state(net, Y, x);
    return smallest_singular_value(
        reduced_jacobian(L, full_jacobian(L, Y, op.delta, op.v)));
  };

  ContinuationTrace trace;
  trace.u = u;
  Eigen::VectorXd x = reduced_state(L, base);
  double lambda = 0.0;
  trace.samples.push_back({0.0, x, sigma_at(x)});

  auto attempt = [&](double lam, const Eigen::VectorXd& from,
                     Eigen::VectorXd& out) -> bool {
    InjectionTargets t{y0 + lam * u};
    auto r = try_newton(net, Y, t, from, cfg.newton);
    if (!r) return false;
    out = reduced_state(L, r->op);
    if ((out - from).lpNorm<Eigen::Infinity>() > cfg.max_state_jump) return false;
    return true;
  };

  double step = cfg.initial_step;
  double bad = -1.0;  // smallest known infeasible lambda
  int steps = 0;
  while (steps++ < cfg.max_steps) {
    double lam = lambda + step;
    Eigen::VectorXd xn;
    if (attempt(lam, x, xn)) {
      double sig = sigma_at(xn);
      if (sig > cfg.sigma_tol) {
        x = xn;
        lambda = lam;
        trace.samples.push_back({lambda, x, sig});
        step = std::min(step * 1.25, cfg.max_step);
        continue;
      }
    }
    bad = lam;
    step /= 2;
    if (step < cfg.min_step) break;
  }
  if (bad < 0.0)
    throw ConvergenceError("continuation exhausted step budget before the boundary");
  if (trace.samples.size() < 2 && lambda == 0.0 && bad <= cfg.min_step * 4)
    throw ConvergenceError("continuation made no progress; base point near-singular");

  // bisection refinement of [lambda, bad]
  while (bad - lambda > cfg.bisect_width) {
    double mid = 0.5 * (lambda + bad);
    Eigen::VectorXd xn;
    if (attempt(mid, x, xn) && sigma_at(xn) > cfg.sigma_tol) {
      x = xn;
      lambda = mid;
    } else {
      bad = mid;
    }
  }
  trace.boundary_lambda = 0.5 * (lambda + bad);
  trace.boundary_state = x;
  trace.boundary_sigma = sigma_at(x);
  if (trace.samples.back().lambda < lambda)
    trace.samples.push_back({lambda, x, trace.boundary_sigma});
  return trace;
}

std::string trace_to_csv(const NetworkCase& net, const ContinuationTrace& trace) {
  const Layout& L = net.layout();
  std::string out = "lambda";
  char buf[64];
  for (int i = 0; i < L.N - 1; ++i)
    out += ",delta_bus" + std::to_string(net.original_id(i));
  for (int i = 0; i < L.Nl; ++i)
    out += ",v_bus" + std::to_string(net.original_id(i));
  out += ",sigma_min\n";
  for (const auto& s : trace.samples) {
    std::snprintf(buf, sizeof buf, "%.17g", s.lambda);
    out += buf;
    for (int i = 0; i < L.n(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", s.x[i]);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g\n", s.sigma_min);
    out += buf;
  }
  return out;
}

}  // namespace pfm
