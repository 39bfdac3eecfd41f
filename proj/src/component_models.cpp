#include "dampplan/component_models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "dampplan/error.hpp"

namespace dampplan {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }
bool finite_pos(double v) { return std::isfinite(v) && v > 0.0; }

constexpr DqBlock kRotation{0.0, -1.0, 1.0, 0.0};  // J

}  // namespace

void RlBranchParams::validate() const {
  require(finite_nonneg(r_ohm) && finite_nonneg(l_h), "RL branch: R and L must be >= 0");
  require(r_ohm > 0.0 || l_h > 0.0, "RL branch: R and L cannot both be zero");
}

void PiCableParams::validate() const {
  require(finite_nonneg(r_ohm) && finite_nonneg(l_h), "pi cable: R and L must be >= 0");
  require(finite_pos(c_f), "pi cable: C must be > 0");
}

void InverterParams::validate() const {
  require(finite_pos(f_s_hz), "inverter: f_s must be > 0");
  require(finite_pos(l_h), "inverter: L must be > 0");
  require(finite_pos(v_d0_v), "inverter: v_d0 must be > 0");
  require(finite_nonneg(c_f), "inverter: C must be >= 0");
  require(finite_nonneg(k_pi) && finite_nonneg(k_ii) && finite_nonneg(k_ppll) && finite_nonneg(k_ipll),
          "inverter: controller gains must be >= 0");
  require(std::isfinite(i_d_a) && std::isfinite(i_q_a) && std::isfinite(k_dec),
          "inverter: operating point must be finite");
}

void ADParams::validate() const {
  require(finite_pos(l_f_h) && finite_pos(k_pi) && finite_pos(k_ii) && finite_pos(xi) &&
              finite_pos(tau_s) && finite_pos(beta) && finite_pos(omega_low) && finite_pos(omega_c) &&
              finite_pos(g_s) && finite_pos(f_s_hz) && finite_pos(v_dc_v),
          "AD: all parameters except K_v must be > 0");
  require(finite_nonneg(k_v), "AD: K_v must be >= 0");
}

DqBlock rl_series_dq(const RlBranchParams& p, double f_hz, double omega0) {
  const cplx z = p.r_ohm + jomega(f_hz) * p.l_h;
  const double x0 = omega0 * p.l_h;
  return {z, -x0, x0, z};
}

DqBlock capacitor_dq(double c_f, double f_hz, double omega0) {
  const cplx y = jomega(f_hz) * c_f;
  const double b0 = omega0 * c_f;
  return {y, -b0, b0, y};
}

PiCableStamps pi_cable_stamps(const PiCableParams& p, double f_hz, double omega0) {
  return {rl_series_dq({p.r_ohm, p.l_h}, f_hz, omega0), capacitor_dq(0.5 * p.c_f, f_hz, omega0)};
}

DqBlock inverter_admittance(const InverterParams& p, double f_hz, double omega0) {
  p.validate();
  if (!(f_hz > 0.0) || !(f_hz < 0.5 * p.f_s_hz))
    throw Error(ErrorCode::OutOfRange, "inverter admittance needs 0 < f < f_s/2");

  const cplx s = jomega(f_hz);
  const TransferElement current_pi({p.k_pi, p.k_ii}, {1.0, 0.0});
  // closed-loop PLL angle response to the q-axis PCC voltage
  const TransferElement pll({p.k_ppll, p.k_ipll},
                            {1.0, p.v_d0_v * p.k_ppll, p.v_d0_v * p.k_ipll});
  const TransferElement delay = TransferElement::delay(1.5 / p.f_s_hz);

  const cplx gci = current_pi.evaluate(s);
  const cplx h = pll.evaluate(s);
  const cplx gd = delay.evaluate(s);

  const double x0 = omega0 * p.l_h;
  const DqBlock filter{s * p.l_h, -x0, x0, s * p.l_h};
  const DqBlock control = (p.k_dec * x0) * kRotation - DqBlock::scalar(gci);

  // steady-state modulation voltage
  const double vm_d = p.v_d0_v - x0 * p.i_q_a;
  const double vm_q = x0 * p.i_d_a;
  const DqBlock pll_current{0.0, p.i_q_a * h, 0.0, -p.i_d_a * h};
  const DqBlock pll_voltage{0.0, -vm_q * h, 0.0, vm_d * h};

  const DqBlock lhs = filter - gd * control;
  const DqBlock rhs = DqBlock::identity() - gd * (control * pll_current + pll_voltage);
  return block_inverse(lhs) * rhs + capacitor_dq(p.c_f, f_hz, omega0);
}

AdmittanceTable::AdmittanceTable(std::vector<AdmittanceRow> rows) : rows_(std::move(rows)) {
  if (rows_.size() < 2) throw Error(ErrorCode::InvalidArgument, "admittance table needs >= 2 rows");
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (!(rows_[i].f_hz > 0.0))
      throw Error(ErrorCode::InvalidArgument, "admittance table frequencies must be > 0");
    if (i > 0 && !(rows_[i].f_hz > rows_[i - 1].f_hz))
      throw Error(ErrorCode::InvalidArgument, "admittance table frequencies must be strictly increasing");
  }
}

AdmittanceTable AdmittanceTable::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open admittance table " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<AdmittanceRow> rows;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line != "f_hz,re_dd,im_dd,re_dq,im_dq,re_qd,im_qd,re_qq,im_qq")
        throw Error(ErrorCode::Parse, path.string() + ":1: unexpected admittance table header");
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    double v[9];
    int n = 0;
    while (std::getline(ss, cell, ',')) {
      if (n == 9) break;
      try {
        std::size_t used = 0;
        v[n] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(line_no) + ": bad number '" +
                                          cell + "' in column " + std::to_string(n + 1));
      }
      ++n;
    }
    if (n != 9 || ss.rdbuf()->in_avail() > 0)
      throw Error(ErrorCode::Parse,
                  path.string() + ":" + std::to_string(line_no) + ": expected 9 columns");
    rows.push_back({v[0], {{v[1], v[2]}, {v[3], v[4]}, {v[5], v[6]}, {v[7], v[8]}}});
  }
  try {
    return AdmittanceTable(std::move(rows));
  } catch (const Error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

void AdmittanceTable::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write admittance table " + path.string());
  out << "f_hz,re_dd,im_dd,re_dq,im_dq,re_qd,im_qd,re_qq,im_qq\n" << std::setprecision(17);
  for (const auto& r : rows_) {
    out << r.f_hz;
    for (cplx c : {r.y.dd, r.y.dq, r.y.qd, r.y.qq}) out << ',' << c.real() << ',' << c.imag();
    out << '\n';
  }
}

DqBlock tabulated_admittance(const AdmittanceTable& t, double f_hz) {
  const auto& rows = t.rows();
  if (!(f_hz >= t.fmin() && f_hz <= t.fmax())) {
    std::ostringstream msg;
    msg << "frequency " << f_hz << " Hz outside table range [" << t.fmin() << ", " << t.fmax() << "]";
    throw Error(ErrorCode::OutOfRange, msg.str());
  }
  auto hi = std::lower_bound(rows.begin(), rows.end(), f_hz,
                             [](const AdmittanceRow& r, double f) { return r.f_hz < f; });
  if (hi->f_hz == f_hz) return hi->y;
  auto lo = hi - 1;
  const double w = (std::log10(f_hz) - std::log10(lo->f_hz)) / (std::log10(hi->f_hz) - std::log10(lo->f_hz));
  auto lerp = [w](cplx a, cplx b) {
    return cplx{a.real() + w * (b.real() - a.real()), a.imag() + w * (b.imag() - a.imag())};
  };
  return {lerp(lo->y.dd, hi->y.dd), lerp(lo->y.dq, hi->y.dq), lerp(lo->y.qd, hi->y.qd),
          lerp(lo->y.qq, hi->y.qq)};
}

FeedforwardCoefficients feedforward_coefficients(const ADParams& p) {
  return {1.0 / (p.g_s * p.omega_c) - p.l_f_h, 1.0 / p.g_s};
}

ActiveDamper::ActiveDamper(const ADParams& p, double omega0)
    : params_((p.validate(), p)),
      notch_({1.0, 0.0, omega0 * omega0}, {1.0, 2.0 * p.xi * omega0, omega0 * omega0}),
      lag_({p.tau_s, 1.0}, {p.beta * p.tau_s, 1.0}),
      low_pass_({p.omega_low}, {1.0, p.omega_low}),
      shifted_voltage_path_(freq_shift(notch_ * lag_ * low_pass_, omega0)),
      feedforward_(p.mode == AdMode::Traditional
                       ? TransferElement::constant(0.0)
                       : TransferElement({feedforward_coefficients(p).slope, feedforward_coefficients(p).constant},
                                         {1.0})),
      current_controller_({p.k_pi, p.k_ii}, {1.0, 0.0}),
      computation_delay_(TransferElement::delay(1.5 / p.f_s_hz)) {}

ActiveDamper::Affine ActiveDamper::affine_in_kv(double f_hz) const {
  const cplx s = jomega(f_hz);
  const cplx gd = computation_delay_.evaluate(s);
  const cplx den = s * params_.l_f_h + feedforward_.evaluate(s) * low_pass_.evaluate(s) * gd +
                   current_controller_.evaluate(s) * gd;
  if (std::abs(den) < 1e-300) throw Error(ErrorCode::PoleHit, "AD admittance denominator vanishes");
  return {1.0 / den, shifted_voltage_path_.evaluate(s) * gd / den};
}

cplx ActiveDamper::admittance(cplx s) const {
  const cplx gd = computation_delay_.evaluate(s);
  const cplx num = 1.0 + params_.k_v * shifted_voltage_path_.evaluate(s) * gd;
  const cplx den = s * params_.l_f_h + feedforward_.evaluate(s) * low_pass_.evaluate(s) * gd +
                   current_controller_.evaluate(s) * gd;
  if (std::abs(den) < 1e-300) throw Error(ErrorCode::PoleHit, "AD admittance denominator vanishes");
  return num / den;
}

DqBlock ad_admittance(const ADParams& p, double f_hz, double omega0) {
  if (!(f_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "AD admittance needs f > 0");
  return ActiveDamper(p, omega0).block(f_hz);
}

std::vector<AdCurve> ad_curve_cluster(const ADParams& p, AdSweepParam which,
                                      std::span<const double> values, const FrequencyGrid& grid) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "AD curve cluster needs at least one value");
  std::vector<AdCurve> out;
  out.reserve(values.size());
  for (double v : values) {
    ADParams q = p;
    switch (which) {
      case AdSweepParam::FilterInductance: q.l_f_h = v; break;
      case AdSweepParam::LowPassGain: q.g_s = v; break;
      case AdSweepParam::CompensationGain: q.k_v = v; break;
    }
    const ActiveDamper ad(q, grid.omega0());
    AdCurve curve{v, {}};
    curve.y.reserve(grid.size());
    for (double f : grid.hz()) curve.y.push_back(ad.admittance_hz(f));
    out.push_back(std::move(curve));
  }
  return out;
}

}  // namespace dampplan
