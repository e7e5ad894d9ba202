#include "pfm/poly.hpp"

#include <algorithm>

namespace pfm {

MonomialBasis::MonomialBasis(int nvars, int max_degree)
    : nvars_(nvars), max_degree_(max_degree) {
  if (nvars < 1 || nvars > 60) throw ValidationError("monomial basis: bad nvars");
  if (max_degree < 0 || max_degree > 10)
    throw ValidationError("monomial basis: bad max degree");

  offsets_.assign(max_degree + 2, 0);
  vars_.push_back({});
  parent_.push_back(-1);
  last_var_.push_back(-1);
  alpha_fact_.push_back(1.0);
  offsets_[1] = 1;

  // grade by grade: extend each monomial of degree d-1 by a variable not
  // smaller than its last, keeping tuples sorted and enumeration stable
  for (int d = 1; d <= max_degree; ++d) {
    const int lo = offsets_[d - 1], hi = offsets_[d];
    for (int p = lo; p < hi; ++p) {
      const int first = vars_[p].empty() ? 0 : vars_[p].back();
      for (int v = first; v < nvars; ++v) {
        std::vector<uint8_t> m = vars_[p];
        m.push_back(static_cast<uint8_t>(v));
        parent_.push_back(p);
        last_var_.push_back(v);
        int rep = 1;
        for (auto it = m.rbegin(); it != m.rend() && *it == m.back(); ++it) ++rep;
        --rep;  // occurrences of v before appending
        alpha_fact_.push_back(alpha_fact_[p] * (rep + 1));
        vars_.push_back(std::move(m));
      }
    }
    offsets_[d + 1] = static_cast<int>(vars_.size());
  }

  index_.reserve(vars_.size() * 2);
  for (int i = 0; i < size(); ++i) index_.emplace(key_of(vars_[i]), i);
  triples_.resize(max_degree + 1);
}

uint64_t MonomialBasis::key_of(const std::vector<uint8_t>& v) const {
  uint64_t key = 0;
  for (size_t t = 0; t < v.size(); ++t)
    key |= static_cast<uint64_t>(v[t] + 1) << (6 * t);
  return key;
}

int MonomialBasis::index_times_var(int idx, int var) const {
  if (degree(idx) + 1 > max_degree_) return -1;
  std::vector<uint8_t> m = vars_[idx];
  m.insert(std::upper_bound(m.begin(), m.end(), static_cast<uint8_t>(var)),
           static_cast<uint8_t>(var));
  auto it = index_.find(key_of(m));
  return it == index_.end() ? -1 : it->second;
}

int MonomialBasis::exponent(int idx, int var) const {
  int e = 0;
  for (uint8_t v : vars_[idx])
    if (v == var) ++e;
  return e;
}

const std::vector<MonomialBasis::Triple>& MonomialBasis::product_triples(
    int cap) const {
  auto& t = triples_[cap];
  if (!t.empty() || cap == 0) {
    if (t.empty() && cap == 0) t.push_back({0, 0, 0});
    return t;
  }
  for (int a = 0; a < size_up_to(cap); ++a) {
    const int da = degree(a);
    for (int b = 0; b < size_up_to(cap - da); ++b) {
      std::vector<uint8_t> m;
      m.reserve(vars_[a].size() + vars_[b].size());
      std::merge(vars_[a].begin(), vars_[a].end(), vars_[b].begin(), vars_[b].end(),
                 std::back_inserter(m));
      t.push_back({a, static_cast<int32_t>(b), index_.at(key_of(m))});
    }
  }
  return t;
}

void poly_mul_acc(const MonomialBasis& basis, int cap, const Poly& a, const Poly& b,
                  Poly& out) {
  for (const auto& tr : basis.product_triples(cap)) {
    const double av = a[tr.a];
    if (av != 0.0) out[tr.out] += av * b[tr.b];
  }
}

Eigen::MatrixXd monomial_curve_values(const MonomialBasis& basis, int deg_cap,
                                      const Eigen::MatrixXd& h, int out_deg) {
  const int count = basis.size_up_to(deg_cap);
  Eigen::MatrixXd vals = Eigen::MatrixXd::Zero(count, out_deg + 1);
  vals(0, 0) = 1.0;
  for (int idx = 1; idx < count; ++idx) {
    const int par = basis.parent(idx);
    const auto hv = h.row(basis.last_var(idx));
    // truncated product parent * h_var; h has no constant term, so the
    // value of a degree-d monomial starts at lambda^d
    for (int t1 = basis.degree(par); t1 <= out_deg; ++t1) {
      const double pv = vals(par, t1);
      if (pv == 0.0) continue;
      for (int t2 = 1; t1 + t2 <= out_deg; ++t2)
        vals(idx, t1 + t2) += pv * hv(t2);
    }
  }
  return vals;
}

Eigen::VectorXd compose_row(const Poly& coeffs, const Eigen::MatrixXd& mono_vals,
                            int out_deg) {
  const int count = static_cast<int>(mono_vals.rows());
  Eigen::VectorXd out(out_deg + 1);
  for (int t = 0; t <= out_deg; ++t) {
    // Kahan-compensated accumulation; composition sums are cancellation-prone
    double sum = 0.0, comp = 0.0;
    for (int idx = 0; idx < count; ++idx) {
      const double term = coeffs[idx] * mono_vals(idx, t) - comp;
      const double next = sum + term;
      comp = (next - sum) - term;
      sum = next;
    }
    out[t] = sum;
  }
  return out;
}

}  // namespace pfm
