#include "pfm/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

namespace pfm {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void stage_fail(const std::string& stage, const std::exception& e) {
  throw Error("[" + stage + "] " + e.what());
}

void parallel_indices(int count, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, count));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += workers) fn(i);
    });
  for (auto& t : pool) t.join();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << content;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read case file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int injection_index(const NetworkCase& net, int original_bus, char qty) {
  const Layout& L = net.layout();
  const int b = net.internal_index(original_bus);
  if (qty == 'p' || qty == 'P') {
    if (b == L.slack())
      throw ValidationError("slack-bus active power is not an injection coordinate");
    return b;
  }
  if (qty == 'q' || qty == 'Q') {
    if (!L.is_pq(b))
      throw ValidationError("reactive injection is only controllable at PQ buses");
    return L.N - 1 + b;
  }
  throw ValidationError(std::string("unknown injection quantity '") + qty + "'");
}

PipelineContext build_pipeline_context(const PipelineConfig& cfg,
                                       const NetworkCase& net) {
  PipelineContext ctx{net, {}, {}, {}, 0.0, {}, {}, {}};
  try {
    ctx.Y = build_admittance(ctx.net);
    ctx.base = solve_base_point(ctx.net, ctx.Y);
  } catch (const Error& e) {
    stage_fail("load-case", e);
  }

  const Layout& L = ctx.net.layout();
  try {
    if (cfg.provenance == Provenance::Data) {
      PatchSpec patch = cfg.patch;
      if (patch.mode == PatchMode::FixedDirections && patch.directions.empty())
        patch.directions = axis_directions(L.n());
      if (patch.mode == PatchMode::UniformRandomBox && patch.sample_count == 0)
        patch.sample_count = L.n();
      patch.workers = cfg.workers;
      auto samples = sample_patch(ctx.net, ctx.Y, ctx.base, patch);
      auto [dX, dY] = stack_increments(L, samples);
      ctx.estimate = estimate_jacobian(L, dX, dY);
    } else {
      ctx.estimate = model_jacobian(ctx.net, ctx.Y, ctx.base);
    }
    ctx.consistency_score =
        v_block_consistency(ctx.estimate, ctx.base.p, ctx.base.q, ctx.base.v);
  } catch (const Error& e) {
    stage_fail("estimate-jacobian", e);
  }

  try {
    ctx.terms = recover_flow_terms(ctx.estimate.jac_full, ctx.base.p, ctx.base.q,
                                   ctx.base.v, L, ctx.estimate.source);
  } catch (const Error& e) {
    stage_fail("recover-terms", e);
  }

  try {
    ctx.map = map_taylor_from_terms(ctx.terms, reduced_state(L, ctx.base),
                                    cfg.taylor_order);
    ctx.geometry = build_geometry(ctx.map, cfg.taylor_order - 2, cfg.workers);
  } catch (const Error& e) {
    stage_fail("build-geometry", e);
  }
  return ctx;
}

DirectionResult evaluate_direction(const PipelineContext& ctx,
                                   const PipelineConfig& cfg,
                                   const Eigen::VectorXd& u, double angle) {
  const Layout& L = ctx.net.layout();
  DirectionResult res;
  res.u = u;
  res.angle = angle;
  res.jet = geodesic_jet(ctx.geometry, u, cfg.taylor_order);

  const int n = L.n();
  res.pades.reserve(n);
  std::vector<double> coeffs(cfg.taylor_order + 1);
  for (int c = 0; c < n; ++c) {
    for (int k = 0; k <= cfg.taylor_order; ++k) coeffs[k] = res.jet.coeffs(c, k);
    res.pades.push_back(pade_with_fallback(coeffs, cfg.pade_l, cfg.pade_m));
  }
  const Eigen::VectorXd y0 = reduced_injections(L, ctx.base);
  res.boundary = smallest_real_pole(res.pades, cfg.pole_filter, y0, u);

  double lambda_star = kNaN;
  if (cfg.validate) {
    ContinuationTrace truth =
        continuation_trace(ctx.net, ctx.Y, ctx.base, u, cfg.continuation);
    lambda_star = truth.boundary_lambda;
    res.lambda_star_true = lambda_star;
  }

  const SweepSpec spec = cfg.sweep.value_or(SweepSpec{});
  const int points = spec.grid_points;
  const double reach =
      cfg.validate ? lambda_star
                   : (res.boundary ? res.boundary->lambda_s : kNaN);
  if (points > 0 && std::isfinite(reach)) {
    res.grid_lambda.resize(points);
    res.grid_states.resize(n, points);
    if (cfg.validate) res.truth_states.resize(n, points);
    for (int t = 0; t < points; ++t) {
      const double lam = spec.grid_fraction * reach * (t + 1) / points;
      res.grid_lambda[t] = lam;
      for (int c = 0; c < n; ++c) {
        double v;
        try {
          v = evaluate_pade(res.pades[c], lam);
        } catch (const NumericalError&) {
          v = evaluate_jet(res.jet, lam)[c];  // grid point sits on a pole
        }
        res.grid_states(c, t) = v;
      }
      if (cfg.validate) {
        auto x = solve_along_ray(ctx.net, ctx.Y, ctx.base, u, lam);
        if (!x)
          throw ConvergenceError("truth solve failed inside the nominal boundary");
        res.truth_states.col(t) = *x;
      }
    }
  }
  return res;
}

ErrorReport error_report(const PipelineContext& ctx,
                         const std::vector<DirectionResult>& dirs,
                         const std::vector<double>& fractions, double radius,
                         uint64_t seed, Provenance prov) {
  const Layout& L = ctx.net.layout();
  ErrorReport rep;
  rep.radius = radius;
  rep.seed = seed;
  rep.provenance = prov;

  for (double frac : fractions) {
    RegionStats st;
    st.fraction = frac;
    double sum = 0.0;
    for (const auto& d : dirs) {
      if (!std::isfinite(d.lambda_star_true) || d.truth_states.size() == 0) continue;
      for (int t = 0; t < d.grid_lambda.size(); ++t) {
        if (d.grid_lambda[t] > frac * d.lambda_star_true) continue;
        double err = 0.0;
        for (int b = 0; b < L.Nl; ++b)
          err = std::max(err, std::abs(d.grid_states(L.N - 1 + b, t) -
                                       d.truth_states(L.N - 1 + b, t)));
        sum += err;
        st.max_error = std::max(st.max_error, err);
        ++st.points;
      }
    }
    if (st.points == 0)
      throw ValidationError("error report region " + std::to_string(frac) +
                            " has an empty grid");
    st.avg_error = sum / st.points;
    rep.regions.push_back(st);
  }
  for (const auto& d : dirs) {
    if (!d.boundary || !std::isfinite(d.lambda_star_true)) continue;
    rep.boundary_errors.push_back(
        std::abs(d.boundary->lambda_s - d.lambda_star_true) / d.lambda_star_true);
  }
  return rep;
}

namespace {

std::vector<Eigen::VectorXd> plane_directions(const NetworkCase& net,
                                              const SweepSpec& spec) {
  const int ia = injection_index(net, spec.bus_a, spec.qty_a);
  const int ib = injection_index(net, spec.bus_b, spec.qty_b);
  if (ia == ib) throw ValidationError("sweep plane axes coincide");
  std::vector<Eigen::VectorXd> dirs;
  const int n = net.layout().n();
  for (int d = 0; d < spec.directions; ++d) {
    const double th = 2.0 * 3.14159265358979323846 * d / spec.directions;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    u[ia] = std::cos(th);
    u[ib] = std::sin(th);
    dirs.push_back(u);
  }
  return dirs;
}

std::string boundary_csv(const NetworkCase& net,
                         const std::vector<DirectionResult>& dirs) {
  const int n = net.layout().n();
  std::string out =
      "direction,angle,lambda_s,spread_min,spread_max,usable_coords,lambda_star_true";
  for (int c = 0; c < n; ++c) out += ",pole_coord" + std::to_string(c);
  out += "\n";
  for (size_t d = 0; d < dirs.size(); ++d) {
    const auto& r = dirs[d];
    out += std::to_string(d) + "," + fmt(r.angle) + ",";
    if (r.boundary) {
      out += fmt(r.boundary->lambda_s) + "," + fmt(r.boundary->spread_min) + "," +
             fmt(r.boundary->spread_max) + "," +
             std::to_string(r.boundary->usable_coordinates);
    } else {
      out += "nan,nan,nan,0";
    }
    out += "," + fmt(r.lambda_star_true);
    for (int c = 0; c < n; ++c)
      out += "," + (r.boundary ? fmt(r.boundary->coordinate_poles[c]) : "nan");
    out += "\n";
  }
  return out;
}

std::string direction_trace_csv(const NetworkCase& net, const DirectionResult& r,
                                bool validated) {
  const Layout& L = net.layout();
  std::string out = "lambda";
  for (int i = 0; i < L.N - 1; ++i)
    out += ",delta_bus" + std::to_string(net.original_id(i));
  for (int i = 0; i < L.Nl; ++i)
    out += ",v_bus" + std::to_string(net.original_id(i));
  if (validated) {
    for (int i = 0; i < L.N - 1; ++i)
      out += ",true_delta_bus" + std::to_string(net.original_id(i));
    for (int i = 0; i < L.Nl; ++i)
      out += ",true_v_bus" + std::to_string(net.original_id(i));
  }
  out += "\n";
  for (int t = 0; t < r.grid_lambda.size(); ++t) {
    out += fmt(r.grid_lambda[t]);
    for (int c = 0; c < L.n(); ++c) out += "," + fmt(r.grid_states(c, t));
    if (validated)
      for (int c = 0; c < L.n(); ++c) out += "," + fmt(r.truth_states(c, t));
    out += "\n";
  }
  return out;
}

std::string report_csv(const ErrorReport& rep) {
  std::string out = "region_fraction,avg_voltage_error,max_voltage_error,points\n";
  for (const auto& r : rep.regions)
    out += fmt(r.fraction) + "," + fmt(r.avg_error) + "," + fmt(r.max_error) + "," +
           std::to_string(r.points) + "\n";
  return out;
}

ordered_json config_json(const PipelineConfig& cfg) {
  ordered_json j;
  j["case"] = cfg.case_path;
  j["radius"] = cfg.patch.radius;
  j["patch_mode"] =
      cfg.patch.mode == PatchMode::UniformRandomBox ? "uniform-random-box"
                                                    : "fixed-directions";
  j["samples"] = cfg.patch.sample_count;
  j["seed"] = cfg.patch.seed;
  j["noise_sigma"] = cfg.patch.noise_sigma;
  j["taylor_order"] = cfg.taylor_order;
  j["pade"] = {cfg.pade_l, cfg.pade_m};
  j["provenance"] = cfg.provenance == Provenance::Data ? "data" : "model";
  j["workers"] = cfg.workers;
  j["validate"] = cfg.validate;
  if (cfg.sweep) {
    j["sweep"] = {{"bus_a", cfg.sweep->bus_a},
                  {"qty_a", std::string(1, cfg.sweep->qty_a)},
                  {"bus_b", cfg.sweep->bus_b},
                  {"qty_b", std::string(1, cfg.sweep->qty_b)},
                  {"directions", cfg.sweep->directions},
                  {"grid_points", cfg.sweep->grid_points},
                  {"grid_fraction", cfg.sweep->grid_fraction}};
  }
  return j;
}

void write_manifest(const fs::path& dir, const PipelineConfig& cfg,
                    const PipelineContext& ctx,
                    const std::vector<std::string>& artifacts) {
  ordered_json j;
  j["tool"] = "pfm";
  j["version"] = "1.0.0";
  j["config"] = config_json(cfg);
  j["config_hash"] = fnv1a(config_json(cfg).dump());
  j["estimate"] = {{"condition_number", ctx.estimate.condition_number},
                   {"fit_residual", ctx.estimate.fit_residual},
                   {"v_block_consistency", ctx.consistency_score}};
  j["artifacts"] = artifacts;
  write_file(dir / "run_manifest.json", j.dump(2) + "\n");
}

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  NetworkCase net = [&] {
    try {
      return NetworkCase::load(read_text_file(cfg.case_path));
    } catch (const Error& e) {
      stage_fail("load-case", e);
    }
  }();
  PipelineContext ctx = build_pipeline_context(cfg, net);
  const Layout& L = ctx.net.layout();

  PipelineResult result;
  std::vector<std::string> artifacts;

  if (cfg.sweep) {
    auto dirs = plane_directions(ctx.net, *cfg.sweep);
    result.directions.resize(dirs.size());
    std::vector<std::string> errors(dirs.size());
    parallel_indices(static_cast<int>(dirs.size()), cfg.workers, [&](int d) {
      try {
        const double th =
            2.0 * 3.14159265358979323846 * d / cfg.sweep->directions;
        result.directions[d] = evaluate_direction(ctx, cfg, dirs[d], th);
      } catch (const std::exception& e) {
        errors[d] = e.what();
      }
    });
    for (size_t d = 0; d < errors.size(); ++d)
      if (!errors[d].empty())
        throw Error("[evaluate] direction " + std::to_string(d) + ": " + errors[d]);
    if (cfg.validate) {
      result.report = error_report(ctx, result.directions, {0.80, 0.95, 0.99},
                                   cfg.patch.radius, cfg.patch.seed, cfg.provenance);
    }
  }

  const Eigen::VectorXd y0 = reduced_injections(L, ctx.base);
  for (const auto& profile : cfg.targets) {
    try {
      Eigen::VectorXd yt = y0;
      for (const auto& e : profile.entries)
        yt[injection_index(ctx.net, e.bus, e.qty)] = e.value;
      TargetResult tr;
      tr.target_y = yt;
      tr.lambda = (yt - y0).norm();
      if (tr.lambda < 1e-14) {
        tr.lambda_s = kNaN;
        tr.outcome = TargetOutcome::Solution;
        tr.state = reduced_state(L, ctx.base);
        result.targets.push_back(std::move(tr));
        continue;
      }
      Eigen::VectorXd u = (yt - y0) / tr.lambda;
      DirectionResult dr = evaluate_direction(ctx, cfg, u, 0.0);
      tr.lambda_s = dr.boundary ? dr.boundary->lambda_s : kNaN;
      if (std::isfinite(tr.lambda_s) && tr.lambda >= tr.lambda_s) {
        tr.outcome = TargetOutcome::InfeasibleAlarm;
      } else {
        tr.outcome = TargetOutcome::Solution;
        tr.state.resize(L.n());
        for (int c = 0; c < L.n(); ++c)
          tr.state[c] = evaluate_pade(dr.pades[c], tr.lambda);
      }
      result.targets.push_back(std::move(tr));
    } catch (const Error& e) {
      stage_fail("evaluate-target", e);
    }
  }

  if (!cfg.out_dir.empty()) {
    fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    result.out_dir = dir;

    if (cfg.provenance == Provenance::Data) {
      // re-generate deterministically for the artifact record
      PatchSpec patch = cfg.patch;
      if (patch.mode == PatchMode::FixedDirections && patch.directions.empty())
        patch.directions = axis_directions(L.n());
      if (patch.mode == PatchMode::UniformRandomBox && patch.sample_count == 0)
        patch.sample_count = L.n();
      patch.workers = cfg.workers;
      auto samples = sample_patch(ctx.net, ctx.Y, ctx.base, patch);
      write_file(dir / "samples.csv", samples_to_csv(ctx.net, samples));
      artifacts.push_back("samples.csv");
    }
    write_file(dir / "jacobian.csv", jacobian_to_csv(ctx.net, ctx.estimate));
    artifacts.push_back("jacobian.csv");

    if (!result.directions.empty()) {
      write_file(dir / "boundary.csv", boundary_csv(ctx.net, result.directions));
      artifacts.push_back("boundary.csv");
      std::string jets = "[\n";
      for (size_t d = 0; d < result.directions.size(); ++d) {
        jets += jet_to_json(result.directions[d].jet);
        if (d + 1 < result.directions.size()) jets += ",";
      }
      jets += "]\n";
      write_file(dir / "jets.json", jets);
      artifacts.push_back("jets.json");
      for (size_t d = 0; d < result.directions.size(); ++d) {
        char name[64];
        std::snprintf(name, sizeof name, "trace_%03zu.csv", d);
        write_file(dir / name,
                   direction_trace_csv(ctx.net, result.directions[d], cfg.validate));
        artifacts.push_back(name);
      }
    }
    if (result.report) {
      write_file(dir / "error_report.csv", report_csv(*result.report));
      artifacts.push_back("error_report.csv");
    }
    write_manifest(dir, cfg, ctx, artifacts);
  }
  return result;
}

PipelineResult sweep_directions(const PipelineConfig& cfg) {
  if (!cfg.sweep) throw ValidationError("sweep requires a plane specification");
  return run_pipeline(cfg);
}

std::vector<std::pair<double, ErrorReport>> radius_study(
    const PipelineConfig& base_cfg, const std::vector<double>& radii) {
  if (radii.empty()) throw ValidationError("radius study needs at least one radius");
  for (size_t i = 1; i < radii.size(); ++i)
    if (radii[i] <= radii[i - 1])
      throw ValidationError("radii must be positive and ascending");

  std::vector<std::pair<double, ErrorReport>> out;
  for (double rho : radii) {
    PipelineConfig cfg = base_cfg;
    cfg.provenance = Provenance::Data;
    cfg.patch.mode = PatchMode::FixedDirections;
    cfg.patch.radius = rho;
    cfg.validate = true;
    if (!cfg.out_dir.empty())
      cfg.out_dir = base_cfg.out_dir + "/radius_" + fmt(rho);
    PipelineResult r = run_pipeline(cfg);
    if (!r.report) throw Error("radius study produced no error report");
    out.emplace_back(rho, *r.report);
  }
  PipelineConfig cfg = base_cfg;
  cfg.provenance = Provenance::Model;
  cfg.validate = true;
  if (!cfg.out_dir.empty()) cfg.out_dir = base_cfg.out_dir + "/model";
  PipelineResult r = run_pipeline(cfg);
  if (!r.report) throw Error("radius study produced no model baseline report");
  out.emplace_back(0.0, *r.report);
  return out;
}

}  // namespace pfm
