#include "pfm/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <nlohmann/json.hpp>
#include <sstream>

namespace pfm {

using nlohmann::json;

int NetworkCase::internal_index(int original_id) const {
  auto it = id_to_internal_.find(original_id);
  if (it == id_to_internal_.end())
    throw ValidationError("unknown bus id " + std::to_string(original_id));
  return it->second;
}

void NetworkCase::validate_and_order(std::vector<Bus> buses,
                                     std::vector<Branch> branches) {
  if (buses.empty()) throw ValidationError("case has no buses");
  if (branches.empty()) throw ValidationError("case has no branches");

  int n_slack = 0, n_pq = 0, n_pv = 0;
  std::unordered_map<int, int> seen;
  for (size_t i = 0; i < buses.size(); ++i) {
    if (!seen.emplace(buses[i].id, 1).second)
      throw ValidationError("duplicate bus id " + std::to_string(buses[i].id));
    switch (buses[i].type) {
      case BusType::PQ: ++n_pq; break;
      case BusType::PV: ++n_pv; break;
      case BusType::Slack: ++n_slack; break;
    }
  }
  if (n_slack == 0) throw ValidationError("case has no slack bus");
  if (n_slack > 1) throw ValidationError("case has more than one slack bus");

  // canonical order: PQ, PV, slack; ties broken by original id
  std::stable_sort(buses.begin(), buses.end(), [](const Bus& a, const Bus& b) {
    auto rank = [](BusType t) {
      return t == BusType::PQ ? 0 : (t == BusType::PV ? 1 : 2);
    };
    if (rank(a.type) != rank(b.type)) return rank(a.type) < rank(b.type);
    return a.id < b.id;
  });

  layout_.N = static_cast<int>(buses.size());
  layout_.Nl = n_pq;
  layout_.Ng = n_pv;

  id_to_internal_.clear();
  for (int i = 0; i < layout_.N; ++i) id_to_internal_[buses[i].id] = i;

  for (auto& br : branches) {
    auto f = id_to_internal_.find(br.from);
    auto t = id_to_internal_.find(br.to);
    if (f == id_to_internal_.end() || t == id_to_internal_.end())
      throw ValidationError("branch references unknown bus " +
                            std::to_string(f == id_to_internal_.end() ? br.from : br.to));
    br.from = f->second;
    br.to = t->second;
    if (br.from == br.to)
      throw ValidationError("branch connects bus " + std::to_string(buses[br.from].id) +
                            " to itself");
    if (br.tap <= 0.0) throw ValidationError("branch tap ratio must be positive");
    if (br.phase_shift != 0.0)
      throw ValidationError("phase-shifting branches are not supported");
  }

  // connectivity over the branch graph
  std::vector<char> vis(layout_.N, 0);
  std::deque<int> queue{0};
  vis[0] = 1;
  int count = 1;
  while (!queue.empty()) {
    int b = queue.front();
    queue.pop_front();
    for (const auto& br : branches) {
      int other = -1;
      if (br.from == b) other = br.to;
      else if (br.to == b) other = br.from;
      if (other >= 0 && !vis[other]) {
        vis[other] = 1;
        ++count;
        queue.push_back(other);
      }
    }
  }
  if (count != layout_.N) throw ValidationError("branch graph is not connected");

  buses_ = std::move(buses);
  branches_ = std::move(branches);
}

NetworkCase NetworkCase::from_parts(double base_mva, std::vector<Bus> buses,
                                    std::vector<Branch> branches) {
  NetworkCase net;
  net.base_mva_ = base_mva;
  net.validate_and_order(std::move(buses), std::move(branches));
  return net;
}

NetworkCase NetworkCase::from_json_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON case: ") + e.what());
  }

  try {
    double base = doc.value("base_mva", 100.0);
    std::vector<Bus> buses;
    for (const auto& jb : doc.at("buses")) {
      Bus b;
      b.id = jb.at("id").get<int>();
      std::string t = jb.at("type").get<std::string>();
      if (t == "pq") b.type = BusType::PQ;
      else if (t == "pv") b.type = BusType::PV;
      else if (t == "slack") b.type = BusType::Slack;
      else throw ParseError("unknown bus type '" + t + "'");
      b.v_set = jb.value("v_set", 1.0);
      b.angle = jb.value("angle", 0.0);
      b.p_inj = jb.value("p_inj", 0.0);
      b.q_inj = jb.value("q_inj", 0.0);
      b.shunt_g = jb.value("shunt_g", 0.0);
      b.shunt_b = jb.value("shunt_b", 0.0);
      buses.push_back(b);
    }
    std::vector<Branch> branches;
    for (const auto& jb : doc.at("branches")) {
      Branch br;
      br.from = jb.at("from").get<int>();
      br.to = jb.at("to").get<int>();
      br.r = jb.value("r", 0.0);
      br.x = jb.value("x", 0.0);
      br.b_charging = jb.value("b_charging", 0.0);
      br.tap = jb.value("tap", 1.0);
      br.phase_shift = jb.value("phase_shift", 0.0);
      branches.push_back(br);
    }
    return from_parts(base, std::move(buses), std::move(branches));
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad case schema: ") + e.what());
  }
}

namespace {

// Pulls the rows of "name = [ ... ];" as vectors of doubles.
std::vector<std::vector<double>> matrix_block(std::string_view text,
                                              std::string_view name) {
  size_t pos = text.find(name);
  if (pos == std::string_view::npos) return {};
  pos = text.find('[', pos);
  size_t end = text.find(']', pos);
  if (pos == std::string_view::npos || end == std::string_view::npos)
    throw ParseError("unterminated matrix block for " + std::string(name));
  std::string body(text.substr(pos + 1, end - pos - 1));
  // strip comments
  std::istringstream in(body);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line, ';')) {
    if (auto c = line.find('%'); c != std::string::npos) line.resize(c);
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

double scalar_field(std::string_view text, std::string_view name, double dflt) {
  size_t pos = text.find(name);
  if (pos == std::string_view::npos) return dflt;
  pos = text.find('=', pos);
  if (pos == std::string_view::npos) return dflt;
  return std::strtod(std::string(text.substr(pos + 1, 64)).c_str(), nullptr);
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

NetworkCase NetworkCase::from_matrix_text(std::string_view text) {
  auto bus_rows = matrix_block(text, "mpc.bus");
  auto gen_rows = matrix_block(text, "mpc.gen");
  auto branch_rows = matrix_block(text, "mpc.branch");
  if (bus_rows.empty() || branch_rows.empty())
    throw ParseError("matrix-style case is missing bus or branch tables");
  double base = scalar_field(text, "mpc.baseMVA", 100.0);

  std::vector<Bus> buses;
  for (const auto& row : bus_rows) {
    if (row.size() < 9) throw ParseError("bus table row too short");
    Bus b;
    b.id = static_cast<int>(row[0]);
    int type = static_cast<int>(row[1]);
    if (type == 1) b.type = BusType::PQ;
    else if (type == 2) b.type = BusType::PV;
    else if (type == 3) b.type = BusType::Slack;
    else throw ParseError("unsupported bus type code " + std::to_string(type));
    b.p_inj = -row[2] / base;  // Pd
    b.q_inj = -row[3] / base;  // Qd
    b.shunt_g = row[4] / base;
    b.shunt_b = row[5] / base;
    b.v_set = row[7];
    b.angle = row[8] * kPi / 180.0;
    buses.push_back(b);
  }

  for (const auto& row : gen_rows) {
    if (row.size() < 8) throw ParseError("gen table row too short");
    if (row[7] <= 0) continue;  // out of service
    int id = static_cast<int>(row[0]);
    auto it = std::find_if(buses.begin(), buses.end(),
                           [id](const Bus& b) { return b.id == id; });
    if (it == buses.end()) throw ParseError("generator at unknown bus");
    it->p_inj += row[1] / base;  // Pg
    it->v_set = row[5];          // Vg
  }

  std::vector<Branch> branches;
  for (const auto& row : branch_rows) {
    if (row.size() < 5) throw ParseError("branch table row too short");
    if (row.size() >= 11 && row[10] <= 0) continue;  // out of service
    Branch br;
    br.from = static_cast<int>(row[0]);
    br.to = static_cast<int>(row[1]);
    br.r = row[2];
    br.x = row[3];
    br.b_charging = row[4];
    br.tap = (row.size() >= 9 && row[8] != 0.0) ? row[8] : 1.0;
    br.phase_shift = row.size() >= 10 ? row[9] * kPi / 180.0 : 0.0;
    branches.push_back(br);
  }

  return from_parts(base, std::move(buses), std::move(branches));
}

NetworkCase NetworkCase::load(std::string_view text) {
  size_t i = text.find_first_not_of(" \t\r\n");
  if (i == std::string_view::npos) throw ParseError("empty case document");
  if (text[i] == '{') return from_json_text(text);
  return from_matrix_text(text);
}

AdmittanceMatrices build_admittance(const NetworkCase& net) {
  const int N = net.bus_count();
  using C = std::complex<double>;

  // Gather contributions per slot, then sum in sorted order so the
  // result does not depend on branch list order.
  std::vector<std::vector<C>> diag(N);
  std::vector<std::unordered_map<int, std::vector<C>>> off(N);

  for (const auto& br : net.branches()) {
    if (br.r == 0.0 && br.x == 0.0)
      throw NumericalError("zero-impedance branch between buses " +
                           std::to_string(net.original_id(br.from)) + " and " +
                           std::to_string(net.original_id(br.to)));
    C ys = 1.0 / C(br.r, br.x);
    C ysh(0.0, br.b_charging / 2.0);
    double t = br.tap;
    diag[br.from].push_back((ys + ysh) / (t * t));
    diag[br.to].push_back(ys + ysh);
    off[br.from][br.to].push_back(-ys / t);
    off[br.to][br.from].push_back(-ys / t);
  }
  for (int i = 0; i < N; ++i)
    diag[i].push_back(C(net.bus(i).shunt_g, net.bus(i).shunt_b));

  auto ordered_sum = [](std::vector<C>& v) {
    std::sort(v.begin(), v.end(), [](const C& a, const C& b) {
      if (a.real() != b.real()) return a.real() < b.real();
      return a.imag() < b.imag();
    });
    C s(0.0, 0.0);
    for (const C& c : v) s += c;
    return s;
  };

  AdmittanceMatrices Y;
  Y.G = Eigen::MatrixXd::Zero(N, N);
  Y.B = Eigen::MatrixXd::Zero(N, N);
  for (int i = 0; i < N; ++i) {
    C d = ordered_sum(diag[i]);
    Y.G(i, i) = d.real();
    Y.B(i, i) = d.imag();
    for (auto& [j, contrib] : off[i]) {
      C o = ordered_sum(contrib);
      Y.G(i, j) = o.real();
      Y.B(i, j) = o.imag();
    }
  }
  return Y;
}

}  // namespace pfm
