#pragma once

// dq-frame admittance and impedance models of the physical elements: passive
// branches, the grid-following inverter, tabulated (measured) admittances and
// the active damper (AD) with output-current feedforward.

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "dampplan/dq_core.hpp"

namespace dampplan {

struct RlBranchParams {
  double r_ohm = 0.0;
  double l_h = 0.0;

  /// Throws Error(InvalidArgument) on negative values or R = L = 0.
  void validate() const;
};

struct PiCableParams {
  double r_ohm = 0.0;
  double l_h = 0.0;
  double c_f = 0.0;  ///< total shunt capacitance, half at each end

  void validate() const;
};

struct PiCableStamps {
  DqBlock series;     ///< impedance
  DqBlock shunt_end;  ///< admittance placed at each terminal
};

/// Grid-following VSC, L filter with shunt C, PI current loop, SRF-PLL.
/// Defaults are the three identical case-study inverters.
struct InverterParams {
  double v_dc_v = 750.0;
  double l_h = 2.5e-3;
  double c_f = 15e-6;
  double i_d_a = 50.0;
  double i_q_a = 0.0;
  double k_pi = 10.0;
  double k_ii = 300.0;
  double k_ppll = 6.0;
  double k_ipll = 100.0;
  double f_s_hz = 10e3;
  double v_d0_v = 325.2691193458119;  ///< 230 V rms phase, peak
  double k_dec = 1.0;                 ///< 1 = full w0*L cross decoupling, 0 = none

  void validate() const;
};

enum class AdMode { Proposed, Traditional };

/// Active damper parameters. K_v has no nominal value; it is calibrated.
struct ADParams {
  double v_dc_v = 750.0;
  double l_f_h = 0.8e-3;
  double k_pi = 5.0;
  double k_ii = 100.0;
  double xi = 0.707;
  double tau_s = 0.0014;
  double beta = 2.0;
  double omega_low = 12566.36;
  double omega_c = 21991.13;
  double g_s = 0.06;
  double k_v = 0.0;
  double f_s_hz = 40e3;
  AdMode mode = AdMode::Proposed;

  void validate() const;
};

struct AdmittanceRow {
  double f_hz = 0.0;
  DqBlock y;
};

class AdmittanceTable {
 public:
  explicit AdmittanceTable(std::vector<AdmittanceRow> rows);

  /// CSV with header f_hz,re_dd,im_dd,re_dq,im_dq,re_qd,im_qd,re_qq,im_qq.
  static AdmittanceTable load_csv(const std::filesystem::path& path);
  void save_csv(const std::filesystem::path& path) const;

  const std::vector<AdmittanceRow>& rows() const { return rows_; }
  double fmin() const { return rows_.front().f_hz; }
  double fmax() const { return rows_.back().f_hz; }

 private:
  std::vector<AdmittanceRow> rows_;
};

// ---------------------------------------------------------------------------
// passive stamps

/// [R+jwL, -w0 L; w0 L, R+jwL]
DqBlock rl_series_dq(const RlBranchParams& p, double f_hz, double omega0);
/// [jwC, -w0 C; w0 C, jwC]
DqBlock capacitor_dq(double c_f, double f_hz, double omega0);
PiCableStamps pi_cable_stamps(const PiCableParams& p, double f_hz, double omega0);

// ---------------------------------------------------------------------------
// inverter

/// Output admittance seen from the PCC (current drawn into the device).
/// Requires 0 < f < f_s/2.
DqBlock inverter_admittance(const InverterParams& p, double f_hz, double omega0);

/// Log-frequency linear interpolation of each real and imaginary part.
/// Throws Error(OutOfRange) outside [fmin, fmax].
DqBlock tabulated_admittance(const AdmittanceTable& t, double f_hz);

// ---------------------------------------------------------------------------
// active damper

/// H_i(s) = slope*s + constant, the exact solution of 1/(sL_f + H_i) = G w_c/(s+w_c).
struct FeedforwardCoefficients {
  double slope = 0.0;
  double constant = 0.0;
};
FeedforwardCoefficients feedforward_coefficients(const ADParams& p);

/// Prebuilt transfer elements for one parameter set; evaluation is pure.
class ActiveDamper {
 public:
  ActiveDamper(const ADParams& p, double omega0);

  const ADParams& params() const { return params_; }

  /// Scalar Y_ad(s) = (1 + K_v G_v G_d) / (sL_f + H_i G_low G_d + G_i G_d).
  cplx admittance(cplx s) const;
  cplx admittance_hz(double f_hz) const { return admittance(jomega(f_hz)); }
  /// diag(Y_ad, Y_ad); the d and q channels are decoupled.
  DqBlock block(double f_hz) const { return DqBlock::scalar(admittance_hz(f_hz)); }

  /// Y_ad = base + K_v * per_kv; exposed for calibration.
  struct Affine {
    cplx base;
    cplx per_kv;
  };
  Affine affine_in_kv(double f_hz) const;

  const TransferElement& notch() const { return notch_; }
  const TransferElement& lag() const { return lag_; }
  const TransferElement& low_pass() const { return low_pass_; }
  const TransferElement& shifted_voltage_path() const { return shifted_voltage_path_; }
  const TransferElement& feedforward() const { return feedforward_; }
  const TransferElement& current_controller() const { return current_controller_; }
  const TransferElement& computation_delay() const { return computation_delay_; }

 private:
  ADParams params_;
  TransferElement notch_, lag_, low_pass_;
  TransferElement shifted_voltage_path_;
  TransferElement feedforward_;
  TransferElement current_controller_;
  TransferElement computation_delay_;
};

DqBlock ad_admittance(const ADParams& p, double f_hz, double omega0);

enum class AdSweepParam { FilterInductance, LowPassGain, CompensationGain };

struct AdCurve {
  double value = 0.0;
  std::vector<cplx> y;  ///< scalar Y_ad per grid point
};

/// One Y_ad curve per parameter value, all other parameters held at p.
std::vector<AdCurve> ad_curve_cluster(const ADParams& p, AdSweepParam which,
                                      std::span<const double> values, const FrequencyGrid& grid);

}  // namespace dampplan
