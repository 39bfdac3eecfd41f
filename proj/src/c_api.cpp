#include "dampplan/dampplan.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "dampplan/error.hpp"
#include "dampplan/network_io.hpp"
#include "dampplan/report.hpp"

struct dp_network {
  dampplan::NetworkGraph graph;
};

struct dp_analysis {
  dampplan::StabilityAnalysis analysis;
};

namespace {

thread_local std::string g_last_error;

dp_status fail(dp_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename F>
dp_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return DP_OK;
  } catch (const dampplan::Error& e) {
    return fail(static_cast<dp_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(DP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DP_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DP_ERR_INTERNAL, "unknown error");
  }
}

dampplan::ADParams to_cpp(const dp_ad_params& p) {
  dampplan::ADParams q;
  q.v_dc_v = p.v_dc_v;
  q.l_f_h = p.l_f_h;
  q.k_pi = p.k_pi;
  q.k_ii = p.k_ii;
  q.xi = p.xi;
  q.tau_s = p.tau_s;
  q.beta = p.beta;
  q.omega_low = p.omega_low_rad_s;
  q.omega_c = p.omega_c_rad_s;
  q.g_s = p.g_s;
  q.k_v = p.k_v;
  q.f_s_hz = p.f_s_hz;
  q.mode = p.mode == DP_AD_TRADITIONAL ? dampplan::AdMode::Traditional : dampplan::AdMode::Proposed;
  return q;
}

}  // namespace

extern "C" {

const char* dp_version(void) { return dampplan::kVersion; }

const char* dp_last_error(void) { return g_last_error.c_str(); }

const char* dp_status_name(dp_status s) {
  if (s == DP_OK) return "ok";
  if (s == DP_ERR_INTERNAL) return "internal";
  if (s >= DP_ERR_INVALID_ARGUMENT && s <= DP_ERR_IO) return dampplan::to_string(static_cast<dampplan::ErrorCode>(s));
  return "unknown";
}

dp_status dp_network_load(const char* path, dp_network** out) {
  if (!path || !out) return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new dp_network{dampplan::load_network(path)}; });
}

dp_status dp_network_parse(const char* json_text, dp_network** out) {
  if (!json_text || !out) return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new dp_network{dampplan::parse_network(json_text)}; });
}

dp_status dp_network_case_study(dp_network** out) {
  if (!out) return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new dp_network{dampplan::case_study_network()}; });
}

dp_status dp_emit_fixture(const char* path) {
  if (!path) return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { dampplan::emit_fixture(path); });
}

void dp_network_free(dp_network* n) { delete n; }

size_t dp_network_node_count(const dp_network* n) { return n ? n->graph.size() : 0; }

dp_status dp_network_node_id(const dp_network* n, size_t index, int* out) {
  if (!n || !out) return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  if (index >= n->graph.size()) return fail(DP_ERR_OUT_OF_RANGE, "node index out of range");
  *out = n->graph.nodes[index];
  return DP_OK;
}

dp_status dp_network_assemble(const dp_network* n, double f_hz, double* out, size_t capacity) {
  if (!n || !out) return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  const size_t dim = 2 * n->graph.size();
  if (capacity < 2 * dim * dim) return fail(DP_ERR_INVALID_ARGUMENT, "output buffer too small");
  return guarded([&] {
    const auto a = dampplan::assemble(n->graph, f_hz);
    for (size_t r = 0; r < dim; ++r)
      for (size_t c = 0; c < dim; ++c) {
        const auto v = a.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        out[2 * (r * dim + c)] = v.real();
        out[2 * (r * dim + c) + 1] = v.imag();
      }
  });
}

dp_status dp_analyze(const dp_network* n, double fmin_hz, double fmax_hz, double df_hz, dp_analysis** out) {
  if (!n || !out) return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    const auto grid = dampplan::FrequencyGrid::linear(fmin_hz, fmax_hz, df_hz, n->graph.omega0);
    *out = new dp_analysis{dampplan::analyze(n->graph, grid)};
  });
}

void dp_analysis_free(dp_analysis* a) { delete a; }

int dp_analysis_stable(const dp_analysis* a) { return a && a->analysis.report.stable ? 1 : 0; }

size_t dp_analysis_crossover_count(const dp_analysis* a) { return a ? a->analysis.report.events.size() : 0; }

dp_status dp_analysis_crossover(const dp_analysis* a, size_t index, dp_crossover* out) {
  if (!a || !out) return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  const auto& ev = a->analysis.report.events;
  if (index >= ev.size()) return fail(DP_ERR_OUT_OF_RANGE, "crossover index out of range");
  const auto& e = ev[index];
  out->trace_id = e.trace_id;
  out->f_cr_hz = e.f_cr_hz;
  out->re_lambda = e.lambda.real();
  out->im_lambda = e.lambda.imag();
  out->critical = e.critical ? 1 : 0;
  out->positive_to_negative = e.direction == dampplan::CrossingDirection::PositiveToNegative ? 1 : 0;
  return DP_OK;
}

dp_status dp_analysis_compensation_coefficient(const dp_analysis* a, size_t crossover, size_t node_index, double* re,
                                               double* im) {
  if (!a || !re || !im) return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  const auto& ev = a->analysis.report.events;
  if (crossover >= ev.size()) return fail(DP_ERR_OUT_OF_RANGE, "crossover index out of range");
  const auto& e = ev[crossover];
  if (!e.sample) return fail(DP_ERR_INVALID_ARGUMENT, "crossover has no refined decomposition");
  if (2 * node_index + 1 >= e.sample->size()) return fail(DP_ERR_OUT_OF_RANGE, "node index out of range");
  return guarded([&] {
    const auto kc = dampplan::compensation_coefficient(*e.sample, e.mode, node_index);
    *re = kc.k_c.real();
    *im = kc.k_c.imag();
  });
}

void dp_ad_params_default(dp_ad_params* p) {
  if (!p) return;
  const dampplan::ADParams d;
  *p = dp_ad_params{d.v_dc_v, d.l_f_h, d.k_pi,  d.k_ii, d.xi,     d.tau_s,        d.beta,
                    d.omega_low, d.omega_c, d.g_s, d.k_v, d.f_s_hz, DP_AD_PROPOSED};
}

dp_status dp_ad_admittance(const dp_ad_params* p, double f_hz, double* re, double* im) {
  if (!p || !re || !im) return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto q = to_cpp(*p);
    q.validate();
    const auto y = dampplan::ActiveDamper(q, dampplan::kDefaultOmega0).admittance_hz(f_hz);
    *re = y.real();
    *im = y.imag();
  });
}

dp_status dp_calibrate_ad(const dp_ad_params* base, double requirement_s, double band_lo_hz, double band_hi_hz,
                          double* k_v) {
  if (!base || !k_v) return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    auto q = to_cpp(*base);
    q.validate();
    *k_v = dampplan::calibrate_ad(requirement_s, band_lo_hz, band_hi_hz, q).params.k_v;
  });
}

void dp_run_config_default(dp_run_config* c) {
  if (!c) return;
  const dampplan::RunConfig d;
  *c = dp_run_config{nullptr, d.fmin_hz, d.fmax_hz, d.df_hz, d.epsilon_s, d.delta_alpha_s, 0, 0, 0, 0, -1, 0, 0.0,
                     nullptr, 0};
}

dp_status dp_run_command(const dp_run_config* c, const char* command, int* exit_code, char** report_json) {
  if (!c || !command) return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  if (report_json) *report_json = nullptr;
  return guarded([&] {
    dampplan::RunConfig cfg;
    if (c->network_path) cfg.network_path = c->network_path;
    cfg.fmin_hz = c->fmin_hz;
    cfg.fmax_hz = c->fmax_hz;
    cfg.df_hz = c->df_hz;
    cfg.epsilon_s = c->epsilon_s;
    cfg.delta_alpha_s = c->delta_alpha_s;
    if (c->has_node) cfg.node = c->node;
    if (c->has_design_node) cfg.design_node = c->design_node;
    if (c->ad_mode == DP_AD_PROPOSED) cfg.ad_mode = dampplan::AdMode::Proposed;
    else if (c->ad_mode == DP_AD_TRADITIONAL) cfg.ad_mode = dampplan::AdMode::Traditional;
    else if (c->ad_mode != -1) throw dampplan::Error(dampplan::ErrorCode::InvalidArgument, "invalid ad_mode");
    if (c->has_k_v) cfg.k_v = c->k_v;
    if (c->out_dir) cfg.out_dir = c->out_dir;
    cfg.threads = c->threads;
    const auto result = dampplan::run_command(cfg, dampplan::parse_command(command));
    if (exit_code) *exit_code = result.exit_code();
    if (report_json) {
      const std::string s = result.report.dump(2);
      char* buf = static_cast<char*>(std::malloc(s.size() + 1));
      if (!buf) throw std::bad_alloc();
      std::memcpy(buf, s.c_str(), s.size() + 1);
      *report_json = buf;
    }
  });
}

void dp_string_free(char* s) { std::free(s); }

}  // extern "C"
