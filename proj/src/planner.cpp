#include "dampplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "dampplan/error.hpp"

namespace dampplan {

cplx entry_sensitivity(const EigenSample& s, std::size_t mode, std::size_t row) {
  const auto k = static_cast<Eigen::Index>(mode);
  const auto j = static_cast<Eigen::Index>(row);
  return s.left(k, j) * s.right(j, k);
}

bool is_degenerate(const EigenSample& s, std::size_t mode) {
  const cplx lk = s.lambda(static_cast<Eigen::Index>(mode));
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < s.lambda.size(); ++j)
    if (static_cast<std::size_t>(j) != mode) gap = std::min(gap, std::abs(lk - s.lambda(j)));
  return gap < 1e-8 * s.matrix_norm;
}

SensitivityEntry sensitivity(const EigenSample& s, std::size_t mode, std::size_t node_index, int node_id,
                             int trace_id) {
  if (2 * node_index + 1 >= s.size()) throw Error(ErrorCode::InvalidArgument, "sensitivity: node out of range");
  SensitivityEntry e;
  e.trace_id = trace_id;
  e.f_hz = s.f_hz;
  e.node = node_id;
  e.d_lambda = entry_sensitivity(s, mode, 2 * node_index) + entry_sensitivity(s, mode, 2 * node_index + 1);
  e.s_re = e.d_lambda.real();
  e.s_im = e.d_lambda.imag();
  e.degenerate = is_degenerate(s, mode);
  return e;
}

CompensationCoefficient compensation_coefficient(const EigenSample& s, std::size_t mode, std::size_t node_index,
                                                 int node_id, int trace_id) {
  const SensitivityEntry e = sensitivity(s, mode, node_index, node_id, trace_id);
  return {trace_id, node_id, s.f_hz, e.d_lambda};
}

std::vector<CompensationCoefficient> compensation_table(const StabilityReport& report,
                                                        const std::vector<int>& node_ids) {
  std::vector<CompensationCoefficient> out;
  for (const auto& e : report.events) {
    if (!e.critical) continue;
    if (!e.sample)
      throw Error(ErrorCode::InvalidArgument, "compensation_table needs crossovers refined on a matrix source");
    for (std::size_t i = 0; i < node_ids.size(); ++i) {
      auto c = compensation_coefficient(*e.sample, e.mode, i, node_ids[i], e.trace_id);
      c.f_cr_hz = e.f_cr_hz;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<RankedNode> rank_locations(std::span<const CompensationCoefficient> coeffs,
                                       std::span<const CrossoverEvent> criticals, double epsilon) {
  std::map<int, RankedNode> by_node;
  for (const auto& c : coeffs) {
    auto [it, inserted] = by_node.try_emplace(c.node);
    RankedNode& r = it->second;
    if (inserted || c.k_c.real() < r.worst_re_kc) {
      r.node = c.node;
      r.worst_re_kc = c.k_c.real();
      r.limiting_trace = c.trace_id;
    }
  }
  for (auto& [node, r] : by_node) {
    double alpha = 0.0;
    for (const auto& ev : criticals) {
      for (const auto& c : coeffs) {
        if (c.node != node || c.trace_id != ev.trace_id || c.f_cr_hz != ev.f_cr_hz) continue;
        const double need = epsilon - ev.re_lambda();
        alpha = std::max(alpha, c.k_c.real() > 0.0 ? need / c.k_c.real() : std::numeric_limits<double>::infinity());
      }
    }
    r.alpha_estimate_s = alpha;
    char buf[200];
    std::snprintf(buf, sizeof buf, "worst-case Re[K_C] = %.4f (trace %d); first-order alpha for all criticals = %.4g S",
                  r.worst_re_kc, r.limiting_trace, alpha);
    r.rationale = buf;
  }
  std::vector<RankedNode> out;
  for (auto& [node, r] : by_node) out.push_back(std::move(r));
  std::stable_sort(out.begin(), out.end(), [](const RankedNode& a, const RankedNode& b) {
    if (a.worst_re_kc != b.worst_re_kc) return a.worst_re_kc > b.worst_re_kc;
    return a.node < b.node;
  });
  return out;
}

LoopResult compensation_loop(double epsilon, cplx delta_alpha, int max_iterations, const ModeProbe& probe) {
  LoopResult r;
  for (;;) {
    const auto p = probe(r.alpha);
    if (!p) {
      r.crossover_vanished = true;
      break;
    }
    r.last_f_cr_hz = p->f_cr_hz;
    if (r.iterations == 0) r.predicted_re = p->lambda.real();
    if (p->lambda.real() >= epsilon) {
      r.predicted_re = p->lambda.real();
      break;
    }
    if (r.iterations >= max_iterations) {
      std::ostringstream msg;
      msg << "damping requirement not met after " << max_iterations << " iterations; alpha = " << r.alpha.real()
          << " S, Re[lambda] = " << p->lambda.real() << " S, shortfall = " << epsilon - p->lambda.real() << " S";
      throw InfeasibleError(msg.str(), epsilon - p->lambda.real());
    }
    const cplx step = delta_alpha * p->k_c;
    if (!(step.real() > 0.0)) {
      std::ostringstream msg;
      msg << "damping requirement not met: added conductance no longer raises Re[lambda] at alpha = "
          << r.alpha.real() << " S (Re[K_C] = " << p->k_c.real() << "); Re[lambda] = " << p->lambda.real()
          << " S, shortfall = " << epsilon - p->lambda.real() << " S";
      throw InfeasibleError(msg.str(), epsilon - p->lambda.real());
    }
    r.accumulated += step;
    r.alpha += delta_alpha;
    ++r.iterations;
    r.predicted_re = p->lambda.real() + step.real();
    if (r.predicted_re >= epsilon) break;
  }
  return r;
}

MatrixSource with_node_shunt(MatrixSource base, std::size_t node_index, cplx alpha) {
  return [base = std::move(base), node_index, alpha](double f_hz) {
    Eigen::MatrixXcd m = base(f_hz);
    const auto i = static_cast<Eigen::Index>(2 * node_index);
    m(i, i) += alpha;
    m(i + 1, i + 1) += alpha;
    return m;
  };
}

namespace {

int im_sign(cplx z) { return z.imag() > 0.0 ? 1 : (z.imag() < 0.0 ? -1 : 0); }

CrossoverEvent at_sample(EigenSample&& s, std::size_t k, const CrossoverOptions& opts) {
  CrossoverEvent e;
  e.f_cr_hz = s.f_hz;
  e.lambda = s.lambda(static_cast<Eigen::Index>(k));
  e.mode = k;
  e.critical = !(e.lambda.real() > opts.margin);
  e.sample = std::move(s);
  return e;
}

}  // namespace

std::optional<CrossoverEvent> locate_crossover(const MatrixSource& source, double f_guess,
                                               const Eigen::RowVectorXcd& u_ref, double window_hz, double step_hz,
                                               double fmin, double fmax, const CrossoverOptions& opts) {
  if (!(step_hz > 0.0) || !(window_hz > 0.0))
    throw Error(ErrorCode::InvalidArgument, "locate_crossover needs positive window and step");
  f_guess = std::clamp(f_guess, fmin, fmax);
  EigenSample s0 = eig_lr(source(f_guess), f_guess);
  const std::size_t k0 = match_mode(s0, u_ref);
  const cplx l0 = s0.lambda(static_cast<Eigen::Index>(k0));
  if (std::abs(l0.imag()) <= opts.im_rel_tol * std::max(1.0, std::abs(l0.real())))
    return at_sample(std::move(s0), k0, opts);

  struct Walker {
    double f;
    Eigen::RowVectorXcd u;
    int sign;
    double dir;
    bool open = true;
  };
  Walker walkers[2] = {{f_guess, s0.u(k0), im_sign(l0), -1.0}, {f_guess, s0.u(k0), im_sign(l0), 1.0}};

  for (double window = window_hz;; window *= 2.0) {
    const double lo = std::max(fmin, f_guess - window);
    const double hi = std::min(fmax, f_guess + window);
    bool advanced = true;
    while (advanced) {
      advanced = false;
      for (Walker& w : walkers) {
        if (!w.open) continue;
        const double f = w.f + w.dir * step_hz;
        if (f < lo - 1e-9 || f > hi + 1e-9) continue;
        advanced = true;
        EigenSample s = eig_lr(source(f), f);
        const std::size_t k = match_mode(s, w.u);
        const cplx l = s.lambda(static_cast<Eigen::Index>(k));
        const int sg = im_sign(l);
        if (sg == 0 || sg != w.sign) {
          CrossoverEvent e = sg == 0 ? at_sample(std::move(s), k, opts)
                                     : refine_crossover(source, w.f, f, w.u, opts);
          const int lower_sign = w.dir > 0 ? w.sign : sg;
          e.direction = lower_sign > 0 ? CrossingDirection::PositiveToNegative
                                       : CrossingDirection::NegativeToPositive;
          return e;
        }
        w.f = f;
        w.u = s.u(k);
      }
    }
    if (lo <= fmin && hi >= fmax) return std::nullopt;
  }
}

CompensationPlan plan(const NetworkGraph& g, int node_id, const FrequencyGrid& grid, const PlanOptions& opts) {
  return plan(g, node_id, grid, analyze(g, grid, opts.analysis), opts);
}

CompensationPlan plan(const NetworkGraph& g, int node_id, const FrequencyGrid& grid, const StabilityAnalysis& base,
                      const PlanOptions& opts) {
  if (!(opts.epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "plan: epsilon must be > 0");
  if (!(std::abs(opts.delta_alpha) > 0.0)) throw Error(ErrorCode::InvalidArgument, "plan: delta alpha must be nonzero");
  const int idx = g.index_of(node_id);
  if (idx < 0) throw Error(ErrorCode::InvalidArgument, "plan: unknown node " + std::to_string(node_id));

  const MatrixSource base_source = matrix_source(g);
  CompensationPlan out;
  out.node = node_id;
  out.epsilon = opts.epsilon;
  out.delta_alpha = opts.delta_alpha;

  // every crossover that misses the margin needs compensation, not only those below zero
  for (const CrossoverEvent& ev : base.report.events) {
    if (ev.re_lambda() >= opts.epsilon) continue;
    if (!ev.sample) throw Error(ErrorCode::InvalidArgument, "plan: base analysis lacks refined crossovers");

    double f_prev = ev.f_cr_hz;
    Eigen::RowVectorXcd u_ref = ev.sample->u(ev.mode);
    auto probe = [&](cplx alpha) -> std::optional<ProbeResult> {
      const MatrixSource src = with_node_shunt(base_source, static_cast<std::size_t>(idx), alpha);
      auto located = locate_crossover(src, f_prev, u_ref, opts.window_hz, opts.window_step_hz, grid.front(),
                                      grid.back(), opts.analysis.crossover);
      if (!located) return std::nullopt;
      f_prev = located->f_cr_hz;
      u_ref = located->sample->u(located->mode);
      const auto kc = compensation_coefficient(*located->sample, located->mode, static_cast<std::size_t>(idx));
      return ProbeResult{located->f_cr_hz, located->lambda, kc.k_c};
    };

    ModeRequirement m;
    m.trace_id = ev.trace_id;
    m.f_cr0_hz = ev.f_cr_hz;
    m.re_lambda0 = ev.re_lambda();
    const LoopResult r = compensation_loop(opts.epsilon, opts.delta_alpha, opts.max_iterations, probe);
    m.alpha = r.alpha;
    m.iterations = r.iterations;
    m.predicted_re = r.predicted_re;
    m.crossover_vanished = r.crossover_vanished;
    m.f_cr_hz = r.iterations > 0 ? r.last_f_cr_hz : ev.f_cr_hz;
    if (!r.crossover_vanished) {
      if (auto after = probe(r.alpha)) {
        m.actual_re = after->lambda.real();
        m.f_cr_hz = after->f_cr_hz;
      }
    }
    out.modes.push_back(m);
  }

  if (!out.modes.empty()) {
    double fmin = std::numeric_limits<double>::infinity(), fmax = 0.0;
    for (const auto& m : out.modes) {
      out.required_alpha_s = std::max(out.required_alpha_s, m.alpha.real());
      fmin = std::min(fmin, m.f_cr0_hz);
      fmax = std::max(fmax, m.f_cr0_hz);
    }
    out.band_lo_hz = std::floor(fmin / 100.0) * 100.0;
    if (out.band_lo_hz <= 0.0) out.band_lo_hz = fmin;
    out.band_hi_hz = std::ceil(fmax / 100.0) * 100.0;
  }
  return out;
}

CalibrationResult calibrate_ad(double requirement_s, double band_lo_hz, double band_hi_hz, const ADParams& base,
                               double omega0, const CalibrationOptions& opts) {
  if (!(band_lo_hz > 0.0) || !(band_hi_hz >= band_lo_hz))
    throw Error(ErrorCode::InvalidArgument, "calibrate_ad: invalid band");
  ADParams p = base;
  p.k_v = 0.0;
  const ActiveDamper damper(p, omega0);
  const FrequencyGrid band = FrequencyGrid::linear(band_lo_hz, band_hi_hz, opts.band_step_hz, omega0);
  std::vector<ActiveDamper::Affine> affine;
  affine.reserve(band.size());
  for (double f : band.hz()) affine.push_back(damper.affine_in_kv(f));

  auto min_re = [&](double kv) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& a : affine) m = std::min(m, (a.base + kv * a.per_kv).real());
    return m;
  };
  auto max_ratio = [&](double kv) {
    double m = 0.0;
    for (const auto& a : affine) {
      const cplx y = a.base + kv * a.per_kv;
      m = std::max(m, y.real() > 0.0 ? std::abs(y.imag() / y.real()) : std::numeric_limits<double>::infinity());
    }
    return m;
  };

  const double res = opts.kv_resolution;
  const auto max_steps = static_cast<long>(std::floor(opts.kv_max / res + 1e-9));
  auto kv_at = [res](long n) { return static_cast<double>(n) * res; };

  long n = 0;
  if (min_re(0.0) < requirement_s) {
    if (min_re(kv_at(max_steps)) < requirement_s) {
      char buf[200];
      std::snprintf(buf, sizeof buf,
                    "AD calibration infeasible: conductance requirement %.4g S binds (min Re[Y_ad] = %.4g S at K_v = %g)",
                    requirement_s, min_re(kv_at(max_steps)), kv_at(max_steps));
      throw InfeasibleError(buf, requirement_s - min_re(kv_at(max_steps)));
    }
    long lo = 0, hi = max_steps;  // min_re(lo) < req <= min_re(hi)
    while (hi - lo > 1) {
      const long mid = lo + (hi - lo) / 2;
      (min_re(kv_at(mid)) >= requirement_s ? hi : lo) = mid;
    }
    n = hi;
  }
  for (; n <= max_steps; ++n) {
    const double kv = kv_at(n);
    if (max_ratio(kv) <= opts.ratio_limit && min_re(kv) >= requirement_s) {
      p.k_v = kv;
      return {p, requirement_s, band_lo_hz, band_hi_hz, min_re(kv), max_ratio(kv)};
    }
  }
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "AD calibration infeasible: quasi-resistive bound |Im/Re| <= %g binds for every K_v meeting "
                "Re[Y_ad] >= %.4g S up to K_v = %g",
                opts.ratio_limit, requirement_s, opts.kv_max);
  throw InfeasibleError(buf, 0.0);
}

CalibrationResult calibrate_ad(const CompensationPlan& plan, const ADParams& base, double omega0,
                               const CalibrationOptions& opts) {
  if (plan.modes.empty())
    throw Error(ErrorCode::InvalidArgument, "calibrate_ad: plan has no critical modes to cover");
  return calibrate_ad(plan.required_alpha_s, plan.band_lo_hz, plan.band_hi_hz, base, omega0, opts);
}

NetworkGraph with_active_damper(const NetworkGraph& g, int node_id, const ADParams& p) {
  NetworkGraph out = g;
  out.shunts.push_back({node_id, p});
  require_valid(out);
  return out;
}

StabilityAnalysis verify_with_ad(const NetworkGraph& g, int node_id, const ADParams& p, const FrequencyGrid& grid,
                                 const AnalysisOptions& opts) {
  return analyze(with_active_damper(g, node_id, p), grid, opts);
}

}  // namespace dampplan
