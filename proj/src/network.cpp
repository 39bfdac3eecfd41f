#include "dampplan/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "dampplan/error.hpp"

namespace dampplan {

int NetworkGraph::index_of(int node_id) const {
  auto it = std::find(nodes.begin(), nodes.end(), node_id);
  return it == nodes.end() ? -1 : static_cast<int>(it - nodes.begin());
}

const char* to_string(BranchKind kind) {
  switch (kind) {
    case BranchKind::Rl: return "rl";
    case BranchKind::PiCable: return "pi_cable";
    case BranchKind::Transformer: return "transformer";
  }
  return "?";
}

const char* to_string(ShuntKind kind) {
  switch (kind) {
    case ShuntKind::Inverter: return "inverter";
    case ShuntKind::ActiveDamper: return "ad";
    case ShuntKind::Grid: return "grid";
    case ShuntKind::Capacitor: return "capacitor";
  }
  return "?";
}

std::vector<std::string> validate(const NetworkGraph& g) {
  std::vector<std::string> diag;
  if (g.nodes.empty()) {
    diag.emplace_back("network has no nodes");
    return diag;
  }
  if (!(g.omega0 >= 0.0) || !std::isfinite(g.omega0)) diag.emplace_back("fundamental frequency must be >= 0");

  std::set<int> seen;
  for (int id : g.nodes)
    if (!seen.insert(id).second) diag.push_back("duplicate node id " + std::to_string(id));

  auto known = [&](int id) { return seen.count(id) > 0; };

  for (std::size_t b = 0; b < g.branches.size(); ++b) {
    const Branch& br = g.branches[b];
    const std::string tag = "branch " + std::to_string(b + 1) + " (" + to_string(br.kind) + " " +
                            std::to_string(br.from) + "-" + std::to_string(br.to) + ")";
    if (!known(br.from)) diag.push_back(tag + " references unknown node " + std::to_string(br.from));
    if (!known(br.to)) diag.push_back(tag + " references unknown node " + std::to_string(br.to));
    if (br.from == br.to) diag.push_back(tag + " connects a node to itself");
    if (!(br.r_ohm >= 0.0) || !(br.l_h >= 0.0)) diag.push_back(tag + " has negative R or L");
    if (br.r_ohm == 0.0 && br.l_h == 0.0) diag.push_back(tag + " has R = L = 0");
    if (br.kind == BranchKind::PiCable && !(br.c_f > 0.0)) diag.push_back(tag + " needs C > 0");
    if (!(br.turns_ratio > 0.0)) diag.push_back(tag + " needs turns_ratio > 0");
  }

  std::map<int, int> dampers;
  for (std::size_t s = 0; s < g.shunts.size(); ++s) {
    const Shunt& sh = g.shunts[s];
    const std::string tag = "shunt " + std::to_string(s + 1) + " (" + to_string(sh.kind()) + ")";
    if (!known(sh.node)) diag.push_back(tag + " references unknown node " + std::to_string(sh.node));
    try {
      if (auto* inv = std::get_if<InverterDevice>(&sh.device)) {
        if (auto* p = std::get_if<InverterParams>(&inv->model)) p->validate();
        else if (!std::get<std::shared_ptr<const AdmittanceTable>>(inv->model))
          diag.push_back(tag + " has no admittance table");
      } else if (auto* ad = std::get_if<ADParams>(&sh.device)) {
        ad->validate();
        if (++dampers[sh.node] == 2) diag.push_back("node " + std::to_string(sh.node) + " has more than one AD");
      } else if (auto* gp = std::get_if<GridParams>(&sh.device)) {
        if (!(gp->r_ohm >= 0.0) || !(gp->l_h >= 0.0) || !(gp->c_f >= 0.0) || !(gp->turns_ratio > 0.0))
          diag.push_back(tag + " has invalid grid parameters");
        else if (gp->r_ohm == 0.0 && gp->l_h == 0.0)
          diag.push_back(tag + " grid impedance R = L = 0 (ideal bus must be eliminated)");
      } else if (auto* cp = std::get_if<CapacitorParams>(&sh.device)) {
        if (!(cp->c_f > 0.0)) diag.push_back(tag + " needs C > 0");
      }
    } catch (const Error& e) {
      diag.push_back(tag + ": " + e.what());
    }
  }

  // connectivity over series branches
  if (seen.size() == g.nodes.size()) {
    std::map<int, std::vector<int>> adj;
    for (const Branch& br : g.branches) {
      if (!known(br.from) || !known(br.to)) continue;
      adj[br.from].push_back(br.to);
      adj[br.to].push_back(br.from);
    }
    std::set<int> reached{g.nodes.front()};
    std::vector<int> stack{g.nodes.front()};
    while (!stack.empty()) {
      int n = stack.back();
      stack.pop_back();
      for (int m : adj[n])
        if (reached.insert(m).second) stack.push_back(m);
    }
    if (reached.size() != g.nodes.size()) {
      std::ostringstream msg;
      msg << "network is not connected; unreachable from node " << g.nodes.front() << ":";
      for (int id : g.nodes)
        if (!reached.count(id)) msg << ' ' << id;
      diag.push_back(msg.str());
    }
  }
  return diag;
}

void require_valid(const NetworkGraph& g) {
  auto diag = validate(g);
  if (diag.empty()) return;
  std::string msg = "invalid network:";
  for (const auto& d : diag) msg += "\n  " + d;
  throw Error(ErrorCode::Validation, msg);
}

DqBlock NodalAdmittance::block(std::size_t i, std::size_t j) const {
  return {matrix(2 * i, 2 * j), matrix(2 * i, 2 * j + 1), matrix(2 * i + 1, 2 * j),
          matrix(2 * i + 1, 2 * j + 1)};
}

void add_block(Eigen::MatrixXcd& m, std::size_t i, std::size_t j, const DqBlock& b) {
  m(2 * i, 2 * j) += b.dd;
  m(2 * i, 2 * j + 1) += b.dq;
  m(2 * i + 1, 2 * j) += b.qd;
  m(2 * i + 1, 2 * j + 1) += b.qq;
}

DqBlock branch_series_admittance(const Branch& b, double f_hz, double omega0) {
  const double a2 = b.turns_ratio * b.turns_ratio;
  const DqBlock z = rl_series_dq({b.r_ohm / a2, b.l_h / a2}, f_hz, omega0);
  try {
    return block_inverse(z);
  } catch (const Error&) {
    std::ostringstream msg;
    msg << to_string(b.kind) << " branch " << b.from << "-" << b.to << " has singular impedance at f = " << f_hz
        << " Hz";
    throw Error(ErrorCode::SingularBranch, msg.str());
  }
}

DqBlock grid_shunt_admittance(const GridParams& p, double f_hz, double omega0) {
  const double a2 = p.turns_ratio * p.turns_ratio;
  const DqBlock z = rl_series_dq({p.r_ohm / a2, p.l_h / a2}, f_hz, omega0);
  DqBlock y;
  try {
    y = block_inverse(z);
  } catch (const Error&) {
    throw Error(ErrorCode::SingularBranch, "grid impedance is singular at f = " + std::to_string(f_hz) + " Hz");
  }
  if (p.c_f > 0.0) y += capacitor_dq(0.5 * p.c_f * a2, f_hz, omega0);
  return y;
}

Assembler::Assembler(NetworkGraph g) : graph_(std::move(g)) {
  require_valid(graph_);
  dampers_.resize(graph_.shunts.size());
  for (std::size_t s = 0; s < graph_.shunts.size(); ++s)
    if (auto* ad = std::get_if<ADParams>(&graph_.shunts[s].device)) dampers_[s].emplace(*ad, graph_.omega0);
}

void Assembler::stamp(Eigen::MatrixXcd& net, Eigen::MatrixXcd& dev, double f_hz) const {
  const double w0 = graph_.omega0;
  for (const Branch& b : graph_.branches) {
    const auto i = static_cast<std::size_t>(graph_.index_of(b.from));
    const auto j = static_cast<std::size_t>(graph_.index_of(b.to));
    const DqBlock y = branch_series_admittance(b, f_hz, w0);
    add_block(net, i, i, y);
    add_block(net, j, j, y);
    add_block(net, i, j, -y);
    add_block(net, j, i, -y);
    if (b.kind == BranchKind::PiCable) {
      const DqBlock ye = capacitor_dq(0.5 * b.c_f * b.turns_ratio * b.turns_ratio, f_hz, w0);
      add_block(net, i, i, ye);
      add_block(net, j, j, ye);
    }
  }
  for (std::size_t s = 0; s < graph_.shunts.size(); ++s) {
    const Shunt& sh = graph_.shunts[s];
    const auto k = static_cast<std::size_t>(graph_.index_of(sh.node));
    switch (sh.kind()) {
      case ShuntKind::Grid:
        add_block(net, k, k, grid_shunt_admittance(std::get<GridParams>(sh.device), f_hz, w0));
        break;
      case ShuntKind::Capacitor:
        add_block(net, k, k, capacitor_dq(std::get<CapacitorParams>(sh.device).c_f, f_hz, w0));
        break;
      case ShuntKind::Inverter: {
        const auto& model = std::get<InverterDevice>(sh.device).model;
        if (auto* p = std::get_if<InverterParams>(&model))
          add_block(dev, k, k, inverter_admittance(*p, f_hz, w0));
        else
          add_block(dev, k, k, tabulated_admittance(*std::get<std::shared_ptr<const AdmittanceTable>>(model), f_hz));
        break;
      }
      case ShuntKind::ActiveDamper:
        add_block(dev, k, k, dampers_[s]->block(f_hz));
        break;
    }
  }
}

NodalAdmittance Assembler::operator()(double f_hz) const {
  if (!(f_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "assembly needs f > 0");
  const auto n = static_cast<Eigen::Index>(2 * graph_.size());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  stamp(m, m, f_hz);
  return {f_hz, graph_.nodes, std::move(m)};
}

Assembler::Parts Assembler::parts(double f_hz) const {
  if (!(f_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "assembly needs f > 0");
  const auto n = static_cast<Eigen::Index>(2 * graph_.size());
  Parts p{Eigen::MatrixXcd::Zero(n, n), Eigen::MatrixXcd::Zero(n, n)};
  stamp(p.network, p.devices, f_hz);
  return p;
}

NodalAdmittance assemble(const NetworkGraph& g, double f_hz) { return Assembler(g)(f_hz); }

NodalAdmittance with_shunt(const NodalAdmittance& a, int node_id, const DqBlock& y) {
  auto it = std::find(a.node_ids.begin(), a.node_ids.end(), node_id);
  if (it == a.node_ids.end())
    throw Error(ErrorCode::InvalidArgument, "with_shunt: unknown node " + std::to_string(node_id));
  NodalAdmittance out = a;
  const auto k = static_cast<std::size_t>(it - a.node_ids.begin());
  add_block(out.matrix, k, k, y);
  return out;
}

}  // namespace dampplan
