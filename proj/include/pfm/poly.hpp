#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <unordered_map>
#include <vector>

#include "pfm/errors.hpp"

namespace pfm {

/// Graded basis of monomials in `nvars` variables up to total degree
/// `max_degree`. A monomial is kept as its sorted variable multiset, e.g.
/// x0*x0*x3 -> (0,0,3). Enumeration is graded, lexicographic within each
/// degree, so the basis of a lower degree is a prefix of this one.
class MonomialBasis {
 public:
  MonomialBasis(int nvars, int max_degree);

  int nvars() const { return nvars_; }
  int max_degree() const { return max_degree_; }
  int size() const { return static_cast<int>(vars_.size()); }
  int size_up_to(int degree) const { return offsets_[degree + 1]; }

  int degree(int idx) const { return static_cast<int>(vars_[idx].size()); }
  const std::vector<uint8_t>& vars(int idx) const { return vars_[idx]; }

  /// Monomial with the largest variable removed; defined for idx > 0.
  int parent(int idx) const { return parent_[idx]; }
  int last_var(int idx) const { return last_var_[idx]; }

  /// alpha! = product of per-variable exponent factorials.
  double alpha_factorial(int idx) const { return alpha_fact_[idx]; }

  /// Index of this monomial times x_var, or -1 past max_degree.
  int index_times_var(int idx, int var) const;

  /// Exponent of `var` in monomial `idx`.
  int exponent(int idx, int var) const;

  struct Triple {
    int32_t a, b, out;
  };
  /// All (a, b, a*b) with deg a + deg b <= cap, a/b ascending. Cached.
  const std::vector<Triple>& product_triples(int cap) const;

 private:
  uint64_t key_of(const std::vector<uint8_t>& v) const;

  int nvars_, max_degree_;
  std::vector<std::vector<uint8_t>> vars_;
  std::vector<int32_t> parent_, last_var_;
  std::vector<double> alpha_fact_;
  std::vector<int> offsets_;  // size max_degree+2
  std::unordered_map<uint64_t, int32_t> index_;
  mutable std::vector<std::vector<Triple>> triples_;  // per cap
};

using Poly = Eigen::ArrayXd;  // coefficients over a basis prefix

/// out += a * b truncated at degree cap.
void poly_mul_acc(const MonomialBasis& basis, int cap, const Poly& a, const Poly& b,
                  Poly& out);

/// Coefficients of each monomial (up to deg_cap) evaluated along a curve
/// x(l) = x0 + h(l): row idx holds the lambda-polynomial of that monomial in
/// h, truncated at lambda^out_deg. `h` is nvars x (out_deg+1) with zero
/// constant column.
Eigen::MatrixXd monomial_curve_values(const MonomialBasis& basis, int deg_cap,
                                      const Eigen::MatrixXd& h, int out_deg);

/// Compensated dot of a coefficient row with monomial curve values:
/// returns the lambda-polynomial of the composed series (length out_deg+1).
Eigen::VectorXd compose_row(const Poly& coeffs, const Eigen::MatrixXd& mono_vals,
                            int out_deg);

}  // namespace pfm
