#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pfm/estimation.hpp"
#include "pfm/geometry.hpp"
#include "pfm/measurement.hpp"
#include "pfm/pade.hpp"

namespace pfm {

/// Two injection coordinates spanning the evaluation plane, plus the
/// direction fan and the per-direction lambda grid.
struct SweepSpec {
  int bus_a = 0;  // original bus ids
  int bus_b = 0;
  char qty_a = 'p';
  char qty_b = 'p';
  int directions = 64;
  int grid_points = 50;
  double grid_fraction = 0.99;
};

/// Absolute injection set-points overriding the base values.
struct TargetProfile {
  struct Entry {
    int bus;
    char qty;  // 'p' or 'q'
    double value;
  };
  std::vector<Entry> entries;
};

struct PipelineConfig {
  std::string case_path;
  PatchSpec patch;
  int taylor_order = 6;
  int pade_l = 3;
  int pade_m = 3;
  Provenance provenance = Provenance::Data;
  std::optional<SweepSpec> sweep;
  std::vector<TargetProfile> targets;
  std::string out_dir;
  int workers = 1;
  bool validate = false;  // compute continuation truth alongside
  ContinuationConfig continuation;
  PoleFilter pole_filter;
};

/// Everything shared by later stages: built once, read-only afterwards.
struct PipelineContext {
  NetworkCase net;
  AdmittanceMatrices Y;
  OperatingPoint base;
  JacobianEstimate estimate;
  double consistency_score = 0.0;
  FlowTermSet terms;
  MapTaylor map;            // reduced map expansion, order = taylor_order
  GeometryContext geometry; // jets to order taylor_order - 2
};

struct DirectionResult {
  Eigen::VectorXd u;
  double angle = 0.0;  // radians within the sweep plane
  GeodesicJet jet;
  std::vector<PadeApproximant> pades;
  std::optional<BoundaryEstimate> boundary;
  Eigen::VectorXd grid_lambda;
  Eigen::MatrixXd grid_states;  // n x grid, geodesic/Pade estimates
  double lambda_star_true = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd truth_states;  // n x grid when validated
};

enum class TargetOutcome { Solution, InfeasibleAlarm };

struct TargetResult {
  Eigen::VectorXd target_y;
  double lambda = 0.0;    // distance from base injections
  double lambda_s = 0.0;  // estimated boundary distance (NaN if undetected)
  TargetOutcome outcome = TargetOutcome::Solution;
  Eigen::VectorXd state;  // reduced state estimate (Solution only)
};

struct RegionStats {
  double fraction = 0.0;
  double avg_error = 0.0;
  double max_error = 0.0;
  long points = 0;
};

struct ErrorReport {
  std::vector<RegionStats> regions;       // nested grids: 0.80, 0.95, 0.99
  std::vector<double> boundary_errors;    // per direction |l_s - l*| / l*
  double radius = 0.0;
  uint64_t seed = 0;
  Provenance provenance = Provenance::Data;
};

struct PipelineResult {
  std::vector<DirectionResult> directions;
  std::vector<TargetResult> targets;
  std::optional<ErrorReport> report;
  std::filesystem::path out_dir;
};

/// Stages 1..3 of the evaluation routine: estimate the Jacobian once,
/// recover the flow terms once, build geometry once.
PipelineContext build_pipeline_context(const PipelineConfig& cfg,
                                       const NetworkCase& net);

/// One direction end to end: jet, Pade conversion per coordinate, boundary
/// estimate, lambda grid (and continuation truth when requested).
DirectionResult evaluate_direction(const PipelineContext& ctx,
                                   const PipelineConfig& cfg,
                                   const Eigen::VectorXd& u, double angle);

/// Full run with artifacts on disk.
PipelineResult run_pipeline(const PipelineConfig& cfg);

/// Direction fan in the configured plane; writes traces, a boundary curve
/// and (when validated) an error report.
PipelineResult sweep_directions(const PipelineConfig& cfg);

/// Voltage-error statistics of estimates against continuation truth within
/// nested fractions of the true boundary distance.
ErrorReport error_report(const PipelineContext& ctx,
                         const std::vector<DirectionResult>& dirs,
                         const std::vector<double>& fractions, double radius,
                         uint64_t seed, Provenance prov);

/// One pipeline per radius on identical directions; returns per-radius
/// reports, the last entry being the model-provenance baseline.
std::vector<std::pair<double, ErrorReport>> radius_study(
    const PipelineConfig& base_cfg, const std::vector<double>& radii);

/// Reduced injection-space direction for a (bus, quantity) pair.
int injection_index(const NetworkCase& net, int original_bus, char qty);

std::string read_text_file(const std::string& path);

}  // namespace pfm
