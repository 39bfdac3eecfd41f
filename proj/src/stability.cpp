#include "dampplan/stability.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>

#include "dampplan/error.hpp"

namespace dampplan {

MatrixSource matrix_source(const NetworkGraph& g) {
  auto assembler = std::make_shared<const Assembler>(g);
  return [assembler](double f_hz) { return (*assembler)(f_hz).matrix; };
}

EigenSample eig_lr(const Eigen::MatrixXcd& m, double f_hz) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw Error(ErrorCode::InvalidArgument, "eig_lr needs a non-empty square matrix");
  if (!m.allFinite()) throw Error(ErrorCode::InvalidArgument, "eig_lr: matrix has non-finite entries");

  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(m, true);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::NonConvergence, "eigen-decomposition did not converge");

  const Eigen::Index n = m.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  const auto& ev = solver.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double ma = std::abs(ev(a)), mb = std::abs(ev(b));
    if (ma != mb) return ma > mb;
    if (ev(a).real() != ev(b).real()) return ev(a).real() > ev(b).real();
    return ev(a).imag() > ev(b).imag();
  });

  EigenSample s;
  s.f_hz = f_hz;
  s.lambda.resize(n);
  s.right.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    s.lambda(k) = ev(src);
    s.right.col(k) = solver.eigenvectors().col(src).normalized();
  }
  s.left = s.right.partialPivLu().inverse();
  s.matrix_norm = m.norm();

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(s.right);
  const auto& sv = svd.singularValues();
  const double smin = sv(n - 1);
  s.condition = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
  s.defective = !(s.condition <= kDefectiveCondition);
  return s;
}

unsigned default_thread_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DAMP_PLANNER_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min(n, static_cast<unsigned>(cap));
  }
  return n;
}

std::vector<EigenSample> sweep(const MatrixSource& source, const FrequencyGrid& grid, SweepOptions opts) {
  const std::size_t count = grid.size();
  std::vector<EigenSample> out(count);
  const unsigned threads =
      std::max(1u, std::min<unsigned>(opts.threads ? opts.threads : default_thread_count(),
                                      static_cast<unsigned>(count)));

  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        out[i] = eig_lr(source(grid[i]), grid[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  // report the lowest failing frequency so errors do not depend on scheduling
  for (std::size_t i = 0; i < count; ++i) {
    if (!errors[i]) continue;
    std::ostringstream where;
    where << " (at f = " << grid[i] << " Hz)";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.code(), e.what() + where.str());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::InvalidArgument, e.what() + where.str());
    }
  }
  return out;
}

std::vector<EigenSample> sweep(const NetworkGraph& g, const FrequencyGrid& grid, SweepOptions opts) {
  return sweep(matrix_source(g), grid, opts);
}

std::vector<EigenTrace> track(std::span<const EigenSample> samples, double threshold) {
  if (samples.size() < 2) throw Error(ErrorCode::InvalidArgument, "track needs at least two samples");
  const std::size_t n = samples.front().size();
  for (const auto& s : samples)
    if (s.size() != n) throw Error(ErrorCode::InvalidArgument, "track: samples differ in dimension");

  std::vector<EigenTrace> traces(n);
  for (std::size_t k = 0; k < n; ++k) {
    traces[k].id = static_cast<int>(k);
    traces[k].points.reserve(samples.size());
    const auto& s0 = samples.front();
    traces[k].points.push_back({s0.f_hz, s0.lambda(static_cast<Eigen::Index>(k)), s0.u(k), s0.w(k), k, 1.0});
  }

  struct Pair {
    double overlap;
    double distance;
    std::size_t trace;
    std::size_t mode;
  };
  std::vector<Pair> pairs;
  pairs.reserve(n * n);
  std::vector<char> taken(n);
  std::vector<std::size_t> assigned(n);

  for (std::size_t step = 1; step < samples.size(); ++step) {
    const EigenSample& next = samples[step];
    pairs.clear();
    for (std::size_t k = 0; k < n; ++k) {
      const TracePoint& last = traces[k].points.back();
      const Eigen::RowVectorXcd proj = last.u * next.right;
      for (std::size_t j = 0; j < n; ++j)
        pairs.push_back({std::abs(proj(static_cast<Eigen::Index>(j))),
                         std::abs(last.lambda - next.lambda(static_cast<Eigen::Index>(j))), k, j});
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      const double scale = std::max({1.0, a.overlap, b.overlap});
      if (std::abs(a.overlap - b.overlap) > 1e-12 * scale) return a.overlap > b.overlap;
      if (a.distance != b.distance) return a.distance < b.distance;
      if (a.trace != b.trace) return a.trace < b.trace;
      return a.mode < b.mode;
    });
    std::fill(taken.begin(), taken.end(), 0);
    std::vector<char> done(n, 0);
    std::vector<double> score(n, 0.0);
    std::size_t matched = 0;
    for (const Pair& p : pairs) {
      if (done[p.trace] || taken[p.mode]) continue;
      done[p.trace] = 1;
      taken[p.mode] = 1;
      assigned[p.trace] = p.mode;
      score[p.trace] = p.overlap;
      if (++matched == n) break;
    }
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t j = assigned[k];
      EigenTrace& t = traces[k];
      t.points.push_back({next.f_hz, next.lambda(static_cast<Eigen::Index>(j)), next.u(j), next.w(j), j, score[k]});
      if (score[k] < threshold) t.discontinuities.push_back(t.points.size() - 1);
    }
  }
  return traces;
}

std::size_t match_mode(const EigenSample& s, const Eigen::RowVectorXcd& u_ref) {
  const Eigen::RowVectorXcd proj = u_ref * s.right;
  Eigen::Index best = 0;
  proj.cwiseAbs().maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

namespace {

int im_sign(cplx z) { return z.imag() > 0.0 ? 1 : (z.imag() < 0.0 ? -1 : 0); }

bool im_converged(cplx z, const CrossoverOptions& opts) {
  return std::abs(z.imag()) <= opts.im_rel_tol * std::max(1.0, std::abs(z.real()));
}

CrossoverEvent classify(CrossoverEvent e, int sign_before, const CrossoverOptions& opts) {
  e.direction = sign_before > 0 ? CrossingDirection::PositiveToNegative : CrossingDirection::NegativeToPositive;
  e.critical = !(e.lambda.real() > opts.margin);
  return e;
}

}  // namespace

CrossoverEvent refine_crossover(const MatrixSource& source, double fa, double fb,
                                const Eigen::RowVectorXcd& u_ref, const CrossoverOptions& opts) {
  EigenSample sa = eig_lr(source(fa), fa);
  std::size_t ka = match_mode(sa, u_ref);
  EigenSample sb = eig_lr(source(fb), fb);
  std::size_t kb = match_mode(sb, sa.u(ka));
  const int sign_a = im_sign(sa.lambda(static_cast<Eigen::Index>(ka)));
  const int sign_b = im_sign(sb.lambda(static_cast<Eigen::Index>(kb)));

  auto finish = [&](EigenSample&& s, std::size_t k, int steps) {
    CrossoverEvent e;
    e.f_cr_hz = s.f_hz;
    e.lambda = s.lambda(static_cast<Eigen::Index>(k));
    e.bisection_steps = steps;
    e.mode = k;
    e.sample = std::move(s);
    return classify(std::move(e), sign_a != 0 ? sign_a : -sign_b, opts);
  };

  if (im_converged(sa.lambda(static_cast<Eigen::Index>(ka)), opts)) return finish(std::move(sa), ka, 0);
  if (im_converged(sb.lambda(static_cast<Eigen::Index>(kb)), opts)) return finish(std::move(sb), kb, 0);
  if (sign_a * sign_b >= 0) {
    std::ostringstream msg;
    msg << "no Im sign change to refine in [" << fa << ", " << fb << "] Hz";
    throw Error(ErrorCode::NonConvergence, msg.str());
  }

  double lo = fa, hi = fb;
  Eigen::RowVectorXcd u_lo = sa.u(ka);
  for (int step = 1; step <= opts.max_bisection_steps; ++step) {
    const double mid = 0.5 * (lo + hi);
    EigenSample sm = eig_lr(source(mid), mid);
    const std::size_t km = match_mode(sm, u_lo);
    const cplx lm = sm.lambda(static_cast<Eigen::Index>(km));
    if (im_converged(lm, opts)) return finish(std::move(sm), km, step);
    if (im_sign(lm) == sign_a) {
      lo = mid;
      u_lo = sm.u(km);
    } else {
      hi = mid;
    }
  }
  std::ostringstream msg;
  msg << "crossover bisection did not converge in " << opts.max_bisection_steps << " steps near " << 0.5 * (lo + hi)
      << " Hz";
  throw Error(ErrorCode::NonConvergence, msg.str());
}

std::vector<CrossoverEvent> find_crossovers(const EigenTrace& t, const MatrixSource* source,
                                            const CrossoverOptions& opts) {
  std::vector<CrossoverEvent> events;
  const auto& pts = t.points;
  std::size_t prev = pts.size();  // last sample with non-zero Im
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const int si = im_sign(pts[i].lambda);
    if (si == 0) continue;
    if (prev < pts.size() && im_sign(pts[prev].lambda) == -si) {
      const int sign_before = im_sign(pts[prev].lambda);
      CrossoverEvent e;
      if (i - prev > 1) {
        // exact zero on a sample
        const TracePoint& z = pts[prev + 1];
        e.f_cr_hz = z.f_hz;
        e.lambda = z.lambda;
        e = classify(std::move(e), sign_before, opts);
      } else if (source) {
        e = refine_crossover(*source, pts[prev].f_hz, pts[i].f_hz, pts[prev].u, opts);
        e = classify(std::move(e), sign_before, opts);
      } else {
        const cplx a = pts[prev].lambda, b = pts[i].lambda;
        const double w = a.imag() / (a.imag() - b.imag());
        e.f_cr_hz = pts[prev].f_hz + w * (pts[i].f_hz - pts[prev].f_hz);
        e.lambda = {a.real() + w * (b.real() - a.real()), 0.0};
        e = classify(std::move(e), sign_before, opts);
      }
      e.trace_id = t.id;
      events.push_back(std::move(e));
    }
    prev = i;
  }
  return events;
}

std::vector<CrossoverEvent> StabilityReport::critical_events() const {
  std::vector<CrossoverEvent> out;
  for (const auto& e : events)
    if (e.critical) out.push_back(e);
  return out;
}

StabilityReport assess(std::span<const CrossoverEvent> events, double margin) {
  StabilityReport r;
  r.margin = margin;
  r.events.assign(events.begin(), events.end());
  std::stable_sort(r.events.begin(), r.events.end(), [](const CrossoverEvent& a, const CrossoverEvent& b) {
    return a.trace_id != b.trace_id ? a.trace_id < b.trace_id : a.f_cr_hz < b.f_cr_hz;
  });
  for (auto& e : r.events) {
    e.critical = !(e.lambda.real() > margin);
    if (!e.critical) continue;
    r.stable = false;
    if (std::find(r.critical_traces.begin(), r.critical_traces.end(), e.trace_id) == r.critical_traces.end())
      r.critical_traces.push_back(e.trace_id);
  }
  return r;
}

StabilityAnalysis analyze(const MatrixSource& source, const FrequencyGrid& grid, const AnalysisOptions& opts) {
  StabilityAnalysis a;
  a.samples = sweep(source, grid, opts.sweep);
  a.traces = track(a.samples, opts.track_threshold);
  std::vector<CrossoverEvent> events;
  for (const auto& t : a.traces) {
    auto ev = find_crossovers(t, &source, opts.crossover);
    events.insert(events.end(), std::make_move_iterator(ev.begin()), std::make_move_iterator(ev.end()));
  }
  a.report = assess(events, opts.crossover.margin);
  return a;
}

StabilityAnalysis analyze(const NetworkGraph& g, const FrequencyGrid& grid, const AnalysisOptions& opts) {
  return analyze(matrix_source(g), grid, opts);
}

std::optional<int> winding_number(std::span<const cplx> curve, double origin_tol) {
  if (curve.size() < 3) return std::nullopt;
  double total = 0.0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const cplx a = curve[i];
    const cplx b = curve[(i + 1) % curve.size()];
    if (std::abs(a) <= origin_tol) return std::nullopt;
    total += std::arg(b / a);
  }
  return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
}

std::optional<int> nyquist_encirclement(const EigenTrace& t, double origin_tol) {
  std::vector<cplx> closed;
  closed.reserve(2 * t.points.size());
  for (auto it = t.points.rbegin(); it != t.points.rend(); ++it) closed.push_back(std::conj(it->lambda));
  for (const auto& p : t.points) closed.push_back(p.lambda);
  return winding_number(closed, origin_tol);
}

}  // namespace dampplan
