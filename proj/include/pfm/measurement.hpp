#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "pfm/powerflow.hpp"

namespace pfm {

/// One noise-free local observation: exact increments between a perturbed
/// solved operating point and the base point. dQ spans buses 1..N-1 and so
/// includes reactive power at PV buses.
struct MeasurementSample {
  Eigen::VectorXd d_delta;  // length N-1, radians
  Eigen::VectorXd d_v;      // length Nl (PQ magnitudes)
  Eigen::VectorXd d_p;      // length N-1
  Eigen::VectorXd d_q;      // length N-1
};

MeasurementSample make_sample(const Layout& layout, const OperatingPoint& base,
                              const OperatingPoint& perturbed);

enum class PatchMode { UniformRandomBox, FixedDirections };

struct PatchSpec {
  double radius = 0.05;  // p.u.
  PatchMode mode = PatchMode::UniformRandomBox;
  int sample_count = 0;  // random mode; fixed mode uses directions.size()
  uint64_t seed = 0;
  std::vector<Eigen::VectorXd> directions;  // unit vectors, fixed mode
  double noise_sigma = 0.0;  // optional Gaussian noise per channel
  int workers = 1;
  int max_redraws = 64;  // random-mode attempts per sample
};

/// The n injection-space coordinate axes; the default fixed-direction set.
std::vector<Eigen::VectorXd> axis_directions(int n);

/// Draws perturbed injections around the base point and solves each one.
/// Random mode perturbs every controllable injection uniformly in
/// [-radius, radius] and redraws on solve failure; fixed mode places the
/// targets exactly at `radius` along each direction and fails hard.
/// Bit-reproducible for a fixed seed regardless of worker count.
std::vector<MeasurementSample> sample_patch(const NetworkCase& net,
                                            const AdmittanceMatrices& Y,
                                            const OperatingPoint& base,
                                            const PatchSpec& spec);

/// Stacks increments into (dX: n x m, dY: 2(N-1) x m), columns per sample.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> stack_increments(
    const Layout& layout, const std::vector<MeasurementSample>& samples);

std::string samples_to_csv(const NetworkCase& net,
                           const std::vector<MeasurementSample>& samples);
std::vector<MeasurementSample> samples_from_csv(const NetworkCase& net,
                                                const std::string& csv);

}  // namespace pfm
