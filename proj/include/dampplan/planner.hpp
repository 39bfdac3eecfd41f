#pragma once

// Eigenvalue sensitivity to nodal shunt admittance, the AD compensation
// coefficient K_C, damper placement ranking, the iterative damping
// requirement calculation, AD gain calibration and post-install verification.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dampplan/stability.hpp"

namespace dampplan {

struct SensitivityEntry {
  int trace_id = 0;
  double f_hz = 0.0;
  int node = 0;        ///< node id
  cplx d_lambda;       ///< dlambda/dalpha = dlambda/dG
  double s_re = 0.0;
  double s_im = 0.0;
  bool degenerate = false;  ///< eigenvalue gap < 1e-8 ||Y||, value unreliable

  cplx d_lambda_d_conductance() const { return d_lambda; }
  cplx d_lambda_d_susceptance() const { return cplx{0.0, 1.0} * d_lambda; }
};

/// u_kj w_jk: perturbation of the single diagonal entry (j, j).
cplx entry_sensitivity(const EigenSample& s, std::size_t mode, std::size_t row);

/// Perturbation alpha added to both diagonal entries of node `node_index`.
SensitivityEntry sensitivity(const EigenSample& s, std::size_t mode, std::size_t node_index, int node_id = 0,
                             int trace_id = 0);

/// Smallest |lambda_mode - lambda_j|, j != mode, relative to ||Y||.
bool is_degenerate(const EigenSample& s, std::size_t mode);

struct CompensationCoefficient {
  int trace_id = 0;
  int node = 0;
  double f_cr_hz = 0.0;
  cplx k_c;
};

CompensationCoefficient compensation_coefficient(const EigenSample& s, std::size_t mode, std::size_t node_index,
                                                 int node_id = 0, int trace_id = 0);

/// K_C at every node for every critical event of a report (events must have
/// been refined on a matrix source).
std::vector<CompensationCoefficient> compensation_table(const StabilityReport& report,
                                                        const std::vector<int>& node_ids);

struct RankedNode {
  int node = 0;
  double worst_re_kc = 0.0;  ///< min over critical eigenvalues of Re[K_C]
  int limiting_trace = 0;
  double alpha_estimate_s = 0.0;  ///< first-order alpha for all criticals, 0 if unknown
  std::string rationale;
};

/// Descending worst-case Re[K_C]; ties by node id. `criticals` (optional)
/// only feeds the alpha estimate in the rationale.
std::vector<RankedNode> rank_locations(std::span<const CompensationCoefficient> coeffs,
                                       std::span<const CrossoverEvent> criticals = {}, double epsilon = 0.005);

// ---------------------------------------------------------------------------
// damping requirement

/// Sensitivity of the tracked critical eigenvalue at its crossover for the
/// current alpha; nullopt when the crossover no longer exists.
struct ProbeResult {
  double f_cr_hz = 0.0;
  cplx lambda;
  cplx k_c;
};
using ModeProbe = std::function<std::optional<ProbeResult>(cplx alpha)>;

struct LoopResult {
  cplx alpha;
  cplx accumulated;  ///< sum of delta_alpha * K_C over the iterations
  int iterations = 0;
  double predicted_re = 0.0;  ///< Re[lambda(alpha_last)] + Re[delta_alpha * K_C(alpha_last)]
  bool crossover_vanished = false;
  double last_f_cr_hz = 0.0;
};

/// Add delta_alpha until the re-identified eigenvalue plus the first-order
/// step, Re[lambda(alpha)] + Re[delta_alpha * K_C(alpha)], reaches epsilon.
/// Throws InfeasibleError past max_iterations.
LoopResult compensation_loop(double epsilon, cplx delta_alpha, int max_iterations, const ModeProbe& probe);

struct PlanOptions {
  double epsilon = 0.005;
  cplx delta_alpha = 1e-3;  ///< real conductance step by default
  int max_iterations = 10000;
  double window_hz = 50.0;       ///< crossover re-location window around the previous f_cr
  double window_step_hz = 1.0;
  AnalysisOptions analysis;
};

struct ModeRequirement {
  int trace_id = 0;
  double f_cr0_hz = 0.0;
  double re_lambda0 = 0.0;
  double f_cr_hz = 0.0;  ///< crossover at the final alpha
  cplx alpha;
  int iterations = 0;
  double predicted_re = 0.0;
  std::optional<double> actual_re;  ///< Re[lambda] re-evaluated at the final alpha
  bool crossover_vanished = false;
};

struct CompensationPlan {
  int node = 0;
  double epsilon = 0.0;
  cplx delta_alpha;
  std::vector<ModeRequirement> modes;
  double required_alpha_s = 0.0;  ///< max over modes of Re[alpha]
  double band_lo_hz = 0.0;
  double band_hi_hz = 0.0;
};

/// Track a crossover of the eigenvalue identified by u_ref near f_guess on
/// `source`, widening the window up to [fmin, fmax].
std::optional<CrossoverEvent> locate_crossover(const MatrixSource& source, double f_guess,
                                               const Eigen::RowVectorXcd& u_ref, double window_hz, double step_hz,
                                               double fmin, double fmax, const CrossoverOptions& opts = {});

/// Source with alpha added to both diagonal entries of node_index.
MatrixSource with_node_shunt(MatrixSource base, std::size_t node_index, cplx alpha);

CompensationPlan plan(const NetworkGraph& g, int node_id, const FrequencyGrid& grid, const PlanOptions& opts = {});
/// Same, reusing an existing base analysis of g.
CompensationPlan plan(const NetworkGraph& g, int node_id, const FrequencyGrid& grid, const StabilityAnalysis& base,
                      const PlanOptions& opts = {});

// ---------------------------------------------------------------------------
// damper calibration and verification

inline constexpr double kQuasiResistiveRatio = 0.1;

struct CalibrationOptions {
  double kv_resolution = 1e-3;
  double kv_max = 50.0;
  double ratio_limit = kQuasiResistiveRatio;
  double band_step_hz = 1.0;
};

struct CalibrationResult {
  ADParams params;
  double requirement_s = 0.0;
  double band_lo_hz = 0.0;
  double band_hi_hz = 0.0;
  double min_re_s = 0.0;
  double max_ratio = 0.0;
};

/// Smallest K_v on the resolution grid with min Re[Y_ad] >= requirement and
/// max |Im/Re| <= ratio limit over [band_lo, band_hi]. Throws InfeasibleError
/// naming the binding constraint.
CalibrationResult calibrate_ad(double requirement_s, double band_lo_hz, double band_hi_hz, const ADParams& base,
                               double omega0 = kDefaultOmega0, const CalibrationOptions& opts = {});
CalibrationResult calibrate_ad(const CompensationPlan& plan, const ADParams& base, double omega0 = kDefaultOmega0,
                               const CalibrationOptions& opts = {});

/// Graph copy with the AD installed at node_id.
NetworkGraph with_active_damper(const NetworkGraph& g, int node_id, const ADParams& p);

StabilityAnalysis verify_with_ad(const NetworkGraph& g, int node_id, const ADParams& p, const FrequencyGrid& grid,
                                 const AnalysisOptions& opts = {});

}  // namespace dampplan
