#include "dampplan/network_io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dampplan/error.hpp"

namespace dampplan {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void parse_fail(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::Parse, where + ": " + what);
}

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

const json& field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) parse_fail(where, std::string("missing key \"") + key + "\"");
  return *it;
}

double number(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number()) parse_fail(where, std::string("\"") + key + "\" must be a number");
  return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
  return obj.contains(key) ? number(obj, key, where) : fallback;
}

int integer(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number_integer()) parse_fail(where, std::string("\"") + key + "\" must be an integer");
  return v.get<int>();
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) parse_fail(where, "unknown key \"" + it.key() + "\"");
  }
}

InverterParams inverter_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) parse_fail(where, "params must be an object");
  reject_unknown(j, {"v_dc_v", "l_h", "c_f", "i_d_a", "i_q_a", "k_pi", "k_ii", "k_ppll", "k_ipll", "f_s_hz",
                     "v_d0_v", "k_dec"},
                 where);
  InverterParams p;
  p.v_dc_v = number_or(j, "v_dc_v", p.v_dc_v, where);
  p.l_h = number_or(j, "l_h", p.l_h, where);
  p.c_f = number_or(j, "c_f", p.c_f, where);
  p.i_d_a = number_or(j, "i_d_a", p.i_d_a, where);
  p.i_q_a = number_or(j, "i_q_a", p.i_q_a, where);
  p.k_pi = number_or(j, "k_pi", p.k_pi, where);
  p.k_ii = number_or(j, "k_ii", p.k_ii, where);
  p.k_ppll = number_or(j, "k_ppll", p.k_ppll, where);
  p.k_ipll = number_or(j, "k_ipll", p.k_ipll, where);
  p.f_s_hz = number_or(j, "f_s_hz", p.f_s_hz, where);
  p.v_d0_v = number_or(j, "v_d0_v", p.v_d0_v, where);
  p.k_dec = number_or(j, "k_dec", p.k_dec, where);
  return p;
}

AdMode mode_from(const json& v, const std::string& where) {
  if (!v.is_string()) parse_fail(where, "\"mode\" must be a string");
  const auto s = v.get<std::string>();
  if (s == "proposed") return AdMode::Proposed;
  if (s == "traditional") return AdMode::Traditional;
  parse_fail(where, "unknown AD mode \"" + s + "\"");
}

ADParams ad_from_json(const json& j, const ADParams& d, const std::string& where) {
  if (!j.is_object()) parse_fail(where, "params must be an object");
  reject_unknown(j, {"v_dc_v", "l_f_h", "k_pi", "k_ii", "xi", "tau_s", "beta", "omega_low_rad_s", "omega_c_rad_s",
                     "g_s", "k_v", "f_s_hz", "mode"},
                 where);
  ADParams p = d;
  p.v_dc_v = number_or(j, "v_dc_v", p.v_dc_v, where);
  p.l_f_h = number_or(j, "l_f_h", p.l_f_h, where);
  p.k_pi = number_or(j, "k_pi", p.k_pi, where);
  p.k_ii = number_or(j, "k_ii", p.k_ii, where);
  p.xi = number_or(j, "xi", p.xi, where);
  p.tau_s = number_or(j, "tau_s", p.tau_s, where);
  p.beta = number_or(j, "beta", p.beta, where);
  p.omega_low = number_or(j, "omega_low_rad_s", p.omega_low, where);
  p.omega_c = number_or(j, "omega_c_rad_s", p.omega_c, where);
  p.g_s = number_or(j, "g_s", p.g_s, where);
  p.k_v = number_or(j, "k_v", p.k_v, where);
  p.f_s_hz = number_or(j, "f_s_hz", p.f_s_hz, where);
  if (j.contains("mode")) p.mode = mode_from(j["mode"], where);
  return p;
}

Branch branch_from_json(const json& b, const std::string& where) {
  if (!b.is_object()) parse_fail(where, "must be an object");
  const json& t = field(b, "type", where);
  if (!t.is_string()) parse_fail(where, "\"type\" must be a string");
  const auto type = t.get<std::string>();
  Branch br;
  if (type == "rl") {
    br.kind = BranchKind::Rl;
    reject_unknown(b, {"type", "from", "to", "r_ohm", "l_h"}, where);
  } else if (type == "pi_cable") {
    br.kind = BranchKind::PiCable;
    reject_unknown(b, {"type", "from", "to", "r_ohm", "l_h", "c_f", "turns_ratio"}, where);
    br.c_f = number(b, "c_f", where);
  } else if (type == "transformer") {
    br.kind = BranchKind::Transformer;
    reject_unknown(b, {"type", "from", "to", "r_ohm", "l_h", "turns_ratio"}, where);
  } else {
    parse_fail(where, "unknown branch type \"" + type + "\"");
  }
  br.from = integer(b, "from", where);
  br.to = integer(b, "to", where);
  br.r_ohm = number(b, "r_ohm", where);
  br.l_h = number(b, "l_h", where);
  br.turns_ratio = number_or(b, "turns_ratio", 1.0, where);
  return br;
}

Shunt shunt_from_json(const json& s, const std::filesystem::path& base_dir, const std::optional<ADParams>& ad_defaults,
                      const std::string& where) {
  if (!s.is_object()) parse_fail(where, "must be an object");
  const json& t = field(s, "type", where);
  if (!t.is_string()) parse_fail(where, "\"type\" must be a string");
  const auto type = t.get<std::string>();
  Shunt sh;
  sh.node = integer(s, "node", where);
  static const json empty = json::object();
  const json& params = s.contains("params") ? s["params"] : empty;
  if (type == "inverter") {
    reject_unknown(s, {"type", "node", "params", "table_path"}, where);
    InverterDevice dev;
    if (s.contains("table_path")) {
      if (s.contains("params")) parse_fail(where, "give either params or table_path, not both");
      if (!s["table_path"].is_string()) parse_fail(where, "\"table_path\" must be a string");
      dev.table_path = s["table_path"].get<std::string>();
      std::filesystem::path p = dev.table_path;
      if (p.is_relative()) p = base_dir / p;
      dev.model = std::make_shared<const AdmittanceTable>(AdmittanceTable::load_csv(p));
    } else {
      dev.model = inverter_from_json(params, where);
    }
    sh.device = std::move(dev);
  } else if (type == "ad") {
    reject_unknown(s, {"type", "node", "params"}, where);
    sh.device = ad_from_json(params, ad_defaults.value_or(ADParams{}), where);
  } else if (type == "grid") {
    reject_unknown(s, {"type", "node", "params"}, where);
    reject_unknown(params, {"r_ohm", "l_h", "c_f", "turns_ratio"}, where);
    GridParams g;
    g.r_ohm = number(params, "r_ohm", where);
    g.l_h = number(params, "l_h", where);
    g.c_f = number_or(params, "c_f", 0.0, where);
    g.turns_ratio = number_or(params, "turns_ratio", 1.0, where);
    sh.device = g;
  } else if (type == "capacitor") {
    reject_unknown(s, {"type", "node", "params"}, where);
    reject_unknown(params, {"c_f"}, where);
    sh.device = CapacitorParams{number(params, "c_f", where)};
  } else {
    parse_fail(where, "unknown shunt type \"" + type + "\"");
  }
  return sh;
}

}  // namespace

ADParams ad_params_from_json(const json& j, const ADParams& defaults) { return ad_from_json(j, defaults, "ad params"); }

NetworkGraph parse_network(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    std::ostringstream msg;
    msg << "network file: syntax error at line " << line << ", column " << col << ": " << e.what();
    throw Error(ErrorCode::Parse, msg.str());
  }
  if (!doc.is_object()) parse_fail("network file", "top level must be an object");
  reject_unknown(doc, {"fundamental_hz", "nodes", "branches", "shunts", "ad_defaults", "assumptions"}, "network file");

  NetworkGraph g;
  const double f0 = number_or(doc, "fundamental_hz", 50.0, "network file");
  if (!(f0 > 0.0)) parse_fail("network file", "fundamental_hz must be > 0");
  g.omega0 = 2.0 * M_PI * f0;

  const json& nodes = field(doc, "nodes", "network file");
  if (!nodes.is_array()) parse_fail("network file", "\"nodes\" must be an array");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!nodes[i].is_number_integer()) parse_fail("nodes[" + std::to_string(i) + "]", "node id must be an integer");
    g.nodes.push_back(nodes[i].get<int>());
  }
  if (doc.contains("ad_defaults")) g.ad_defaults = ad_from_json(doc["ad_defaults"], ADParams{}, "ad_defaults");
  if (doc.contains("assumptions")) {
    for (const auto& a : doc["assumptions"]) {
      if (!a.is_string()) parse_fail("assumptions", "entries must be strings");
      g.assumptions.push_back(a.get<std::string>());
    }
  }
  if (doc.contains("branches")) {
    const json& bs = doc["branches"];
    if (!bs.is_array()) parse_fail("network file", "\"branches\" must be an array");
    for (std::size_t i = 0; i < bs.size(); ++i)
      g.branches.push_back(branch_from_json(bs[i], "branches[" + std::to_string(i) + "]"));
  }
  if (doc.contains("shunts")) {
    const json& ss = doc["shunts"];
    if (!ss.is_array()) parse_fail("network file", "\"shunts\" must be an array");
    for (std::size_t i = 0; i < ss.size(); ++i)
      g.shunts.push_back(shunt_from_json(ss[i], base_dir, g.ad_defaults, "shunts[" + std::to_string(i) + "]"));
  }
  require_valid(g);
  return g;
}

NetworkGraph load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open network file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_network(ss.str(), path.parent_path());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

ordered_json inverter_params_to_json(const InverterParams& p) {
  return {{"v_dc_v", p.v_dc_v}, {"l_h", p.l_h},       {"c_f", p.c_f},         {"i_d_a", p.i_d_a},
          {"i_q_a", p.i_q_a},   {"k_pi", p.k_pi},     {"k_ii", p.k_ii},       {"k_ppll", p.k_ppll},
          {"k_ipll", p.k_ipll}, {"f_s_hz", p.f_s_hz}, {"v_d0_v", p.v_d0_v},   {"k_dec", p.k_dec}};
}

ordered_json ad_params_to_json(const ADParams& p) {
  return {{"v_dc_v", p.v_dc_v},
          {"l_f_h", p.l_f_h},
          {"k_pi", p.k_pi},
          {"k_ii", p.k_ii},
          {"xi", p.xi},
          {"tau_s", p.tau_s},
          {"beta", p.beta},
          {"omega_low_rad_s", p.omega_low},
          {"omega_c_rad_s", p.omega_c},
          {"g_s", p.g_s},
          {"k_v", p.k_v},
          {"f_s_hz", p.f_s_hz},
          {"mode", p.mode == AdMode::Proposed ? "proposed" : "traditional"}};
}

ordered_json network_to_json(const NetworkGraph& g) {
  ordered_json doc;
  doc["fundamental_hz"] = g.omega0 / (2.0 * M_PI);
  if (!g.assumptions.empty()) doc["assumptions"] = g.assumptions;
  doc["nodes"] = g.nodes;
  if (g.ad_defaults) doc["ad_defaults"] = ad_params_to_json(*g.ad_defaults);
  doc["branches"] = ordered_json::array();
  for (const auto& b : g.branches) {
    ordered_json j{{"type", to_string(b.kind)}, {"from", b.from}, {"to", b.to}, {"r_ohm", b.r_ohm}, {"l_h", b.l_h}};
    if (b.kind == BranchKind::PiCable) j["c_f"] = b.c_f;
    if (b.kind != BranchKind::Rl) j["turns_ratio"] = b.turns_ratio;
    doc["branches"].push_back(j);
  }
  doc["shunts"] = ordered_json::array();
  for (const auto& s : g.shunts) {
    ordered_json j{{"type", to_string(s.kind())}, {"node", s.node}};
    switch (s.kind()) {
      case ShuntKind::Inverter: {
        const auto& dev = std::get<InverterDevice>(s.device);
        if (const auto* p = std::get_if<InverterParams>(&dev.model))
          j["params"] = inverter_params_to_json(*p);
        else
          j["table_path"] = dev.table_path;
        break;
      }
      case ShuntKind::ActiveDamper: j["params"] = ad_params_to_json(std::get<ADParams>(s.device)); break;
      case ShuntKind::Grid: {
        const auto& p = std::get<GridParams>(s.device);
        j["params"] = {{"r_ohm", p.r_ohm}, {"l_h", p.l_h}, {"c_f", p.c_f}, {"turns_ratio", p.turns_ratio}};
        break;
      }
      case ShuntKind::Capacitor: j["params"] = {{"c_f", std::get<CapacitorParams>(s.device).c_f}}; break;
    }
    doc["shunts"].push_back(j);
  }
  return doc;
}

void save_network(const NetworkGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << network_to_json(g).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

NetworkGraph case_study_network() {
  NetworkGraph g;
  g.omega0 = kDefaultOmega0;
  g.nodes = {1, 2, 3, 4};
  g.assumptions = {
      "node 1 is the transformer low-voltage terminal; the grid and its cable sit behind it as one shunt",
      "cable impedance and capacitance are referred to the low-voltage side with turns ratio 25",
      "the ideal grid source is a small-signal short, so only the near-end half of the cable capacitance is stamped",
      "transformer impedance is already referred to the low-voltage side",
      "line 1 joins nodes 2 and 3, line 2 joins nodes 3 and 4; one inverter per node 2, 3, 4",
      "inverter PCC voltage v_d0 is the 230 V rms phase peak",
  };
  g.branches = {
      {BranchKind::Transformer, 1, 2, 0.0032, 0.0764e-3, 0.0, 1.0},
      {BranchKind::Rl, 2, 3, 0.04, 1.5e-3, 0.0, 1.0},
      {BranchKind::Rl, 3, 4, 0.06, 2.0e-3, 0.0, 1.0},
  };
  g.shunts.push_back({1, GridParams{0.2, 0.3e-3, 12e-6, 25.0}});
  for (int n : {2, 3, 4}) g.shunts.push_back({n, InverterDevice{InverterParams{}, {}}});
  g.ad_defaults = ADParams{};
  return g;
}

void emit_fixture(const std::filesystem::path& path) { save_network(case_study_network(), path); }

}  // namespace dampplan
