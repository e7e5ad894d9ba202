#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pfm/errors.hpp"

namespace pfm {

enum class BusType { PQ, PV, Slack };

/// Coordinate bookkeeping for the canonical bus ordering:
/// PQ buses first, then PV buses, slack last.
///
/// Reduced state variables x: [delta_0..delta_{N-2}, V_0..V_{Nl-1}].
/// Full map rows:            [P_0..P_{N-2}, Q_0..Q_{N-2}].
/// Reduced map rows (= injection-space coordinates) are the first
/// n = (N-1)+Nl full rows, because PQ buses lead the ordering.
struct Layout {
  int N = 0;   // total buses
  int Nl = 0;  // PQ buses
  int Ng = 0;  // PV buses

  int n() const { return N - 1 + Nl; }
  int full_rows() const { return 2 * (N - 1); }

  bool var_is_angle(int v) const { return v < N - 1; }
  int var_bus(int v) const { return var_is_angle(v) ? v : v - (N - 1); }

  bool row_is_p(int a) const { return a < N - 1; }
  int row_bus(int a) const { return row_is_p(a) ? a : a - (N - 1); }

  bool is_pq(int bus) const { return bus < Nl; }
  bool is_pv(int bus) const { return bus >= Nl && bus < Nl + Ng; }
  int slack() const { return N - 1; }
};

struct Bus {
  int id = 0;  // original label from the source document
  BusType type = BusType::PQ;
  double v_set = 1.0;    // magnitude set-point (PV/slack)
  double angle = 0.0;    // radians; only meaningful for the slack bus
  double p_inj = 0.0;    // net injection, p.u.
  double q_inj = 0.0;    // net injection, p.u. (PQ buses)
  double shunt_g = 0.0;  // p.u.
  double shunt_b = 0.0;  // p.u.
};

struct Branch {
  int from = 0;  // internal bus index
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b_charging = 0.0;  // total line charging susceptance
  double tap = 1.0;         // off-nominal turns ratio on the from side
  double phase_shift = 0.0; // radians; must be zero (reciprocal networks only)
};

/// Immutable validated network case in canonical bus order.
class NetworkCase {
 public:
  static NetworkCase load(std::string_view text);          // auto-detect format
  static NetworkCase from_json_text(std::string_view text);
  static NetworkCase from_matrix_text(std::string_view text);
  static NetworkCase from_parts(double base_mva, std::vector<Bus> buses,
                                std::vector<Branch> branches);

  double base_mva() const { return base_mva_; }
  const Layout& layout() const { return layout_; }
  int bus_count() const { return layout_.N; }
  int pq_count() const { return layout_.Nl; }
  int pv_count() const { return layout_.Ng; }
  int reduced_dim() const { return layout_.n(); }

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const Bus& bus(int internal) const { return buses_[internal]; }

  /// Original label -> internal index.
  int internal_index(int original_id) const;
  int original_id(int internal) const { return buses_[internal].id; }

 private:
  NetworkCase() = default;
  void validate_and_order(std::vector<Bus> buses, std::vector<Branch> branches);

  double base_mva_ = 100.0;
  Layout layout_;
  std::vector<Bus> buses_;          // canonical order
  std::vector<Branch> branches_;    // endpoints remapped to internal indices
  std::unordered_map<int, int> id_to_internal_;
};

/// Real and imaginary parts of the bus admittance matrix.
struct AdmittanceMatrices {
  Eigen::MatrixXd G;
  Eigen::MatrixXd B;
};

/// Standard nodal assembly. Deterministic regardless of branch list order:
/// contributions per matrix slot are sorted before summation.
AdmittanceMatrices build_admittance(const NetworkCase& net);

}  // namespace pfm
