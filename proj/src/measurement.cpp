#include "pfm/measurement.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

namespace pfm {

namespace {

// Counter-based generator: every (seed, sample, attempt) tuple owns an
// independent substream, so results do not depend on scheduling.
struct SubStream {
  uint64_t state;
  explicit SubStream(uint64_t seed, uint64_t sample, uint64_t attempt) {
    state = seed;
    state = mix(state ^ (0x9e3779b97f4a7c15ULL + sample * 0xbf58476d1ce4e5b9ULL));
    state = mix(state ^ (0x94d049bb133111ebULL + attempt * 0xd6e8feb86659fd93ULL));
  }
  static uint64_t mix(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  uint64_t next() { return state = mix(state); }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double gaussian() {
    // Box-Muller on two fresh uniforms
    double u1 = uniform(), u2 = uniform();
    u1 = std::max(u1, 0x1.0p-60);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
};

void add_noise(MeasurementSample& s, SubStream& rng, double sigma) {
  if (sigma <= 0.0) return;
  auto jitter = [&](Eigen::VectorXd& v) {
    for (int i = 0; i < v.size(); ++i) v[i] += sigma * rng.gaussian();
  };
  jitter(s.d_delta);
  jitter(s.d_v);
  jitter(s.d_p);
  jitter(s.d_q);
}

}  // namespace

MeasurementSample make_sample(const Layout& layout, const OperatingPoint& base,
                              const OperatingPoint& perturbed) {
  MeasurementSample s;
  s.d_delta = perturbed.delta.head(layout.N - 1) - base.delta.head(layout.N - 1);
  s.d_v = perturbed.v.head(layout.Nl) - base.v.head(layout.Nl);
  s.d_p = perturbed.p.head(layout.N - 1) - base.p.head(layout.N - 1);
  s.d_q = perturbed.q.head(layout.N - 1) - base.q.head(layout.N - 1);
  return s;
}

std::vector<Eigen::VectorXd> axis_directions(int n) {
  std::vector<Eigen::VectorXd> dirs(n, Eigen::VectorXd::Zero(n));
  for (int i = 0; i < n; ++i) dirs[i][i] = 1.0;
  return dirs;
}

std::vector<MeasurementSample> sample_patch(const NetworkCase& net,
                                            const AdmittanceMatrices& Y,
                                            const OperatingPoint& base,
                                            const PatchSpec& spec) {
  const Layout& L = net.layout();
  const int n = L.n();
  if (spec.radius <= 0.0) throw ValidationError("patch radius must be positive");

  int m;
  if (spec.mode == PatchMode::FixedDirections) {
    m = static_cast<int>(spec.directions.size());
    if (m == 0) throw ValidationError("fixed-direction patch needs directions");
    for (const auto& d : spec.directions)
      if (d.size() != n || std::abs(d.norm() - 1.0) > 1e-9)
        throw ValidationError("patch directions must be unit vectors of size n");
  } else {
    m = spec.sample_count;
    if (m <= 0) throw ValidationError("random patch needs a positive sample count");
  }

  const Eigen::VectorXd y0 = reduced_injections(L, base);
  const Eigen::VectorXd x0 = reduced_state(L, base);
  std::vector<MeasurementSample> out(m);
  std::vector<std::string> failures(m);

  auto solve_one = [&](int idx) {
    if (spec.mode == PatchMode::FixedDirections) {
      InjectionTargets t{y0 + spec.radius * spec.directions[idx]};
      auto r = try_newton(net, Y, t, x0);
      if (!r) {
        failures[idx] = "fixed-direction sample " + std::to_string(idx) +
                        " is infeasible at radius " + std::to_string(spec.radius);
        return;
      }
      out[idx] = make_sample(L, base, r->op);
      SubStream rng(spec.seed, static_cast<uint64_t>(idx), 0);
      add_noise(out[idx], rng, spec.noise_sigma);
      return;
    }
    for (int attempt = 0; attempt < spec.max_redraws; ++attempt) {
      SubStream rng(spec.seed, static_cast<uint64_t>(idx),
                    static_cast<uint64_t>(attempt));
      Eigen::VectorXd dy(n);
      for (int i = 0; i < n; ++i) dy[i] = rng.uniform(-spec.radius, spec.radius);
      InjectionTargets t{y0 + dy};
      auto r = try_newton(net, Y, t, x0);
      if (r) {
        out[idx] = make_sample(L, base, r->op);
        add_noise(out[idx], rng, spec.noise_sigma);
        return;
      }
    }
    failures[idx] = "sample " + std::to_string(idx) + " exhausted " +
                    std::to_string(spec.max_redraws) +
                    " redraws; patch extends outside the feasible region";
  };

  const int workers = std::max(1, std::min(spec.workers, m));
  if (workers == 1) {
    for (int i = 0; i < m; ++i) solve_one(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int i = w; i < m; i += workers) solve_one(i);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& f : failures)
    if (!f.empty()) throw ConvergenceError(f);
  return out;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> stack_increments(
    const Layout& layout, const std::vector<MeasurementSample>& samples) {
  const int m = static_cast<int>(samples.size());
  if (m < 1) throw ValidationError("no samples to stack");
  Eigen::MatrixXd dX(layout.n(), m), dY(layout.full_rows(), m);
  for (int c = 0; c < m; ++c) {
    const auto& s = samples[c];
    if (s.d_delta.size() != layout.N - 1 || s.d_v.size() != layout.Nl ||
        s.d_p.size() != layout.N - 1 || s.d_q.size() != layout.N - 1)
      throw ValidationError("sample " + std::to_string(c) +
                            " has inconsistent dimensions");
    dX.col(c) << s.d_delta, s.d_v;
    dY.col(c) << s.d_p, s.d_q;
  }
  return {dX, dY};
}

std::string samples_to_csv(const NetworkCase& net,
                           const std::vector<MeasurementSample>& samples) {
  const Layout& L = net.layout();
  std::string out;
  for (int i = 0; i < L.N - 1; ++i)
    out += (i ? "," : "") + ("ddelta_bus" + std::to_string(net.original_id(i)));
  for (int i = 0; i < L.Nl; ++i)
    out += ",dv_bus" + std::to_string(net.original_id(i));
  for (int i = 0; i < L.N - 1; ++i)
    out += ",dp_bus" + std::to_string(net.original_id(i));
  for (int i = 0; i < L.N - 1; ++i)
    out += ",dq_bus" + std::to_string(net.original_id(i));
  out += "\n";
  char buf[64];
  for (const auto& s : samples) {
    bool first = true;
    auto emit = [&](const Eigen::VectorXd& v) {
      for (int i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, first ? "%.17g" : ",%.17g", v[i]);
        out += buf;
        first = false;
      }
    };
    emit(s.d_delta);
    emit(s.d_v);
    emit(s.d_p);
    emit(s.d_q);
    out += "\n";
  }
  return out;
}

std::vector<MeasurementSample> samples_from_csv(const NetworkCase& net,
                                                const std::string& csv) {
  const Layout& L = net.layout();
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty sample CSV");
  const int want = (L.N - 1) * 3 + L.Nl;
  std::vector<MeasurementSample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
    if (static_cast<int>(vals.size()) != want)
      throw ParseError("sample row has " + std::to_string(vals.size()) +
                       " fields, expected " + std::to_string(want));
    MeasurementSample s;
    int at = 0;
    auto take = [&](int count) {
      Eigen::VectorXd v(count);
      for (int i = 0; i < count; ++i) v[i] = vals[at++];
      return v;
    };
    s.d_delta = take(L.N - 1);
    s.d_v = take(L.Nl);
    s.d_p = take(L.N - 1);
    s.d_q = take(L.N - 1);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace pfm
