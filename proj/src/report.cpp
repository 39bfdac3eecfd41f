#include "dampplan/report.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include "dampplan/error.hpp"
#include "dampplan/network_io.hpp"

namespace dampplan {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

const char* to_string(Command c) {
  switch (c) {
    case Command::Sweep: return "sweep";
    case Command::Criticals: return "criticals";
    case Command::Rank: return "rank";
    case Command::Plan: return "plan";
    case Command::AdCurve: return "ad-curve";
    case Command::Verify: return "verify";
  }
  return "?";
}

Command parse_command(const std::string& name) {
  for (Command c : {Command::Sweep, Command::Criticals, Command::Rank, Command::Plan, Command::AdCurve,
                    Command::Verify})
    if (name == to_string(c)) return c;
  throw Error(ErrorCode::InvalidArgument, "unknown command \"" + name + "\"");
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void RunConfig::validate() const {
  if (!(fmin_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "fmin must be > 0");
  if (!(fmax_hz > fmin_hz)) throw Error(ErrorCode::InvalidArgument, "fmax must be greater than fmin");
  if (!(df_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "df must be > 0");
  if (!(epsilon_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be > 0");
  if (!(delta_alpha_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "dalpha must be > 0");
  if (k_v && !(*k_v >= 0.0)) throw Error(ErrorCode::InvalidArgument, "kv must be >= 0");
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["network"] = network_path.string();
  j["fmin_hz"] = fmin_hz;
  j["fmax_hz"] = fmax_hz;
  j["df_hz"] = df_hz;
  j["epsilon_s"] = epsilon_s;
  j["delta_alpha_s"] = delta_alpha_s;
  j["node"] = node ? ordered_json(*node) : ordered_json(nullptr);
  j["design_node"] = design_node ? ordered_json(*design_node) : ordered_json(nullptr);
  j["ad_mode"] = ad_mode ? ordered_json(*ad_mode == AdMode::Proposed ? "proposed" : "traditional")
                         : ordered_json(nullptr);
  j["k_v"] = k_v ? ordered_json(*k_v) : ordered_json(nullptr);
  return j;
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::string& header) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out_ << header << '\n';
  }
  ~CsvWriter() = default;

  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }
  void close() {
    out_.close();
    if (!out_) throw Error(ErrorCode::Io, "write failed for " + path_.string());
  }

 private:
  static std::string cell(double v) { return format_number(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }

  fs::path path_;
  std::ofstream out_;
};

const char* verdict(const CrossoverEvent& e) { return e.critical ? "critical" : "stable-crossing"; }

ordered_json events_json(const StabilityReport& r) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : r.events)
    arr.push_back({{"trace_id", e.trace_id},
                   {"f_cr_hz", e.f_cr_hz},
                   {"re_lambda_s", e.lambda.real()},
                   {"im_lambda_s", e.lambda.imag()},
                   {"direction", e.direction == CrossingDirection::PositiveToNegative ? "+to-" : "-to+"},
                   {"verdict", verdict(e)}});
  return arr;
}

ordered_json kc_json(const std::vector<CompensationCoefficient>& kc) {
  ordered_json arr = ordered_json::array();
  for (const auto& c : kc)
    arr.push_back({{"trace_id", c.trace_id},
                   {"f_cr_hz", c.f_cr_hz},
                   {"node", c.node},
                   {"re_kc", c.k_c.real()},
                   {"im_kc", c.k_c.imag()}});
  return arr;
}

ordered_json ranking_json(const std::vector<RankedNode>& ranked) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : ranked)
    arr.push_back({{"node", r.node},
                   {"worst_re_kc", r.worst_re_kc},
                   {"limiting_trace_id", r.limiting_trace},
                   {"alpha_estimate_s", r.alpha_estimate_s},
                   {"rationale", r.rationale}});
  return arr;
}

ordered_json plan_json(const CompensationPlan& p) {
  ordered_json modes = ordered_json::array();
  for (const auto& m : p.modes)
    modes.push_back({{"trace_id", m.trace_id},
                     {"f_cr0_hz", m.f_cr0_hz},
                     {"re_lambda0_s", m.re_lambda0},
                     {"f_cr_hz", m.f_cr_hz},
                     {"alpha_s", m.alpha.real()},
                     {"iterations", m.iterations},
                     {"predicted_re_lambda_s", m.predicted_re},
                     {"actual_re_lambda_s", m.actual_re ? ordered_json(*m.actual_re) : ordered_json(nullptr)},
                     {"crossover_vanished", m.crossover_vanished}});
  return {{"node", p.node},
          {"epsilon_s", p.epsilon},
          {"delta_alpha_s", p.delta_alpha.real()},
          {"required_alpha_s", p.required_alpha_s},
          {"band_lo_hz", p.band_lo_hz},
          {"band_hi_hz", p.band_hi_hz},
          {"modes", modes}};
}

ordered_json calibration_json(const CalibrationResult& c) {
  return {{"k_v", c.params.k_v},         {"requirement_s", c.requirement_s}, {"band_lo_hz", c.band_lo_hz},
          {"band_hi_hz", c.band_hi_hz},  {"min_re_y_ad_s", c.min_re_s},     {"max_im_re_ratio", c.max_ratio}};
}

struct Context {
  const RunConfig& cfg;
  RunResult& result;

  fs::path out(const char* name) {
    fs::path p = cfg.out_dir / name;
    result.files.push_back(p);
    return p;
  }
};

void write_crossovers(Context& ctx, const char* name, const StabilityReport& r) {
  CsvWriter w(ctx.out(name), "trace_id,f_cr_hz,re_lambda,verdict");
  for (const auto& e : r.events) w.row(e.trace_id, e.f_cr_hz, e.lambda.real(), verdict(e));
  w.close();
}

void write_traces(Context& ctx, const StabilityAnalysis& a) {
  CsvWriter w(ctx.out("traces.csv"), "f_hz,trace_id,re_lambda,im_lambda");
  for (const auto& t : a.traces)
    for (const auto& p : t.points) w.row(p.f_hz, t.id, p.lambda.real(), p.lambda.imag());
  w.close();
}

void write_kc(Context& ctx, const std::vector<CompensationCoefficient>& kc, const std::vector<RankedNode>& ranked) {
  CsvWriter w(ctx.out("kc_table.csv"), "trace_id,f_cr_hz,node,re_kc,im_kc");
  for (const auto& c : kc) w.row(c.trace_id, c.f_cr_hz, c.node, c.k_c.real(), c.k_c.imag());
  w.close();
  CsvWriter r(ctx.out("ranking.csv"), "rank,node,worst_re_kc,limiting_trace_id,alpha_estimate_s");
  for (std::size_t i = 0; i < ranked.size(); ++i)
    r.row(i + 1, ranked[i].node, ranked[i].worst_re_kc, ranked[i].limiting_trace, ranked[i].alpha_estimate_s);
  r.close();
}

void write_plan(Context& ctx, const CompensationPlan& p) {
  CsvWriter w(ctx.out("plan.csv"),
              "node,trace_id,f_cr0_hz,re_lambda0,f_cr_hz,alpha_s,iterations,predicted_re_lambda,actual_re_lambda,"
              "crossover_vanished");
  for (const auto& m : p.modes)
    w.row(p.node, m.trace_id, m.f_cr0_hz, m.re_lambda0, m.f_cr_hz, m.alpha.real(), m.iterations, m.predicted_re,
          m.actual_re ? format_number(*m.actual_re) : std::string(), m.crossover_vanished ? "true" : "false");
  w.close();
}

ADParams base_ad_params(const RunConfig& cfg, const NetworkGraph* g) {
  ADParams p = g && g->ad_defaults ? *g->ad_defaults : ADParams{};
  if (cfg.ad_mode) p.mode = *cfg.ad_mode;
  if (cfg.k_v) p.k_v = *cfg.k_v;
  return p;
}

void run_ad_curve(Context& ctx, const NetworkGraph* g, const FrequencyGrid& grid) {
  const ADParams p = base_ad_params(ctx.cfg, g);
  const double w0 = g ? g->omega0 : kDefaultOmega0;
  p.validate();
  const ActiveDamper damper(p, w0);
  double min_re = std::numeric_limits<double>::infinity(), max_ratio = 0.0;
  std::vector<cplx> ys;
  for (double f : grid.hz()) {
    ys.push_back(damper.admittance_hz(f));
    min_re = std::min(min_re, ys.back().real());
    max_ratio = std::max(max_ratio, std::abs(ys.back().imag() / ys.back().real()));
  }
  if (ctx.cfg.write_csv) {
    CsvWriter w(ctx.out("ad_curve.csv"), "f_hz,re_y_s,im_y_s,ratio");
    for (std::size_t i = 0; i < grid.size(); ++i)
      w.row(grid[i], ys[i].real(), ys[i].imag(), std::abs(ys[i].imag() / ys[i].real()));
    w.close();

    struct Cluster {
      const char* file;
      AdSweepParam which;
      std::vector<double> values;
    };
    const Cluster clusters[] = {
        {"ad_curve_lf.csv", AdSweepParam::FilterInductance, {0.4e-3, 0.8e-3, 1.2e-3, 1.6e-3}},
        {"ad_curve_g.csv", AdSweepParam::LowPassGain, {0.03, 0.06, 0.09, 0.12}},
        {"ad_curve_kv.csv", AdSweepParam::CompensationGain, {0.0, 0.5, 1.0, 1.5, 2.0}},
    };
    for (const auto& c : clusters) {
      CsvWriter cw(ctx.out(c.file), "param_value,f_hz,re_y_s,im_y_s,ratio");
      for (const auto& curve : ad_curve_cluster(p, c.which, c.values, grid))
        for (std::size_t i = 0; i < grid.size(); ++i)
          cw.row(curve.value, grid[i], curve.y[i].real(), curve.y[i].imag(),
                 std::abs(curve.y[i].imag() / curve.y[i].real()));
      cw.close();
    }
  }
  ctx.result.report["ad"] = {{"params", ad_params_to_json(p)},
                             {"min_re_y_ad_s", min_re},
                             {"max_im_re_ratio", max_ratio}};
}

}  // namespace

RunResult run_command(const RunConfig& cfg, Command cmd) {
  cfg.validate();
  RunResult result;
  Context ctx{cfg, result};
  const FrequencyGrid grid = FrequencyGrid::linear(cfg.fmin_hz, cfg.fmax_hz, cfg.df_hz);

  std::optional<NetworkGraph> g;
  if (!cfg.network_path.empty()) {
    g = load_network(cfg.network_path);
  } else if (cmd != Command::AdCurve) {
    throw Error(ErrorCode::InvalidArgument, std::string("command ") + to_string(cmd) + " requires --network");
  }
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create output directory " + cfg.out_dir.string() + ": " + ec.message());

  ordered_json& rep = result.report;
  ordered_json cfg_json = cfg.to_json();
  rep["metadata"] = {{"tool", "damp_planner"},
                     {"version", kVersion},
                     {"command", to_string(cmd)},
                     {"config_hash", fnv1a_hex(cfg_json.dump() + "\n" +
                                               (g ? read_file(cfg.network_path) : std::string()))},
                     {"generated_utc", utc_now()}};
  rep["config"] = cfg_json;
  if (g && !g->assumptions.empty()) rep["assumptions"] = g->assumptions;

  if (cmd == Command::AdCurve) {
    run_ad_curve(ctx, g ? &*g : nullptr, grid);
  } else {
    AnalysisOptions aopts;
    aopts.sweep.threads = cfg.threads;
    const StabilityAnalysis base = analyze(*g, grid, aopts);
    result.stable = base.report.stable;
    rep["verdict"] = base.report.stable ? "stable" : "unstable";
    rep["crossovers"] = events_json(base.report);

    if (cfg.write_csv && cmd == Command::Sweep) write_traces(ctx, base);
    if (cfg.write_csv && cmd != Command::Sweep && cmd != Command::Verify)
      write_crossovers(ctx, "crossovers.csv", base.report);

    std::vector<CompensationCoefficient> kc;
    std::vector<RankedNode> ranked;
    if (cmd == Command::Rank || cmd == Command::Plan || cmd == Command::Verify) {
      kc = compensation_table(base.report, g->nodes);
      const auto criticals = base.report.critical_events();
      ranked = rank_locations(kc, criticals, cfg.epsilon_s);
      rep["kc_table"] = kc_json(kc);
      rep["ranking"] = ranking_json(ranked);
      if (cfg.write_csv && cmd == Command::Rank) write_kc(ctx, kc, ranked);
    }
    auto top_node = [&]() {
      if (ranked.empty())
        throw Error(ErrorCode::InvalidArgument, "no critical eigenvalues to rank; pass --node explicitly");
      return ranked.front().node;
    };

    PlanOptions popts;
    popts.epsilon = cfg.epsilon_s;
    popts.delta_alpha = cfg.delta_alpha_s;
    popts.analysis = aopts;

    if (cmd == Command::Plan) {
      const int node = cfg.node ? *cfg.node : top_node();
      const CompensationPlan p = plan(*g, node, grid, base, popts);
      rep["plan"] = plan_json(p);
      if (cfg.write_csv) write_plan(ctx, p);
    }

    if (cmd == Command::Verify) {
      const int design = cfg.design_node ? *cfg.design_node : (cfg.node && ranked.empty() ? *cfg.node : top_node());
      const int node = cfg.node ? *cfg.node : design;
      ADParams ad = base_ad_params(cfg, &*g);
      if (!cfg.k_v) {
        const CompensationPlan p = plan(*g, design, grid, base, popts);
        rep["plan"] = plan_json(p);
        ADParams design_params = ad;
        design_params.mode = AdMode::Proposed;
        const CalibrationResult cal = calibrate_ad(p, design_params, g->omega0);
        rep["calibration"] = calibration_json(cal);
        ad.k_v = cal.params.k_v;
      }
      const StabilityAnalysis after = verify_with_ad(*g, node, ad, grid, aopts);
      result.stable = after.report.stable;
      rep["verdict_before"] = rep["verdict"];
      rep["verdict"] = after.report.stable ? "stable" : "unstable";
      rep["verify"] = {{"node", node},
                       {"design_node", design},
                       {"ad_params", ad_params_to_json(ad)},
                       {"crossovers_after", events_json(after.report)}};
      if (cfg.write_csv) {
        CsvWriter w(ctx.out("verify.csv"), "stage,trace_id,f_cr_hz,re_lambda,verdict");
        for (const auto& e : base.report.events) w.row("before", e.trace_id, e.f_cr_hz, e.lambda.real(), verdict(e));
        for (const auto& e : after.report.events) w.row("after", e.trace_id, e.f_cr_hz, e.lambda.real(), verdict(e));
        w.close();
      }
    }
  }

  if (cfg.write_json) {
    const fs::path p = ctx.out("report.json");
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
    out << rep.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::Io, "write failed for " + p.string());
  }
  return result;
}

}  // namespace dampplan
