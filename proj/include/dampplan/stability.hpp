#pragma once

// Frequency sweep of Y_nod with left/right eigenvectors, eigenvalue tracking,
// crossover detection and the positive-net-damping verdict.

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dampplan/network.hpp"

namespace dampplan {

/// Any frequency-dependent square complex matrix (Y_nod, Y_nod + shunt, ...).
using MatrixSource = std::function<Eigen::MatrixXcd(double f_hz)>;

MatrixSource matrix_source(const NetworkGraph& g);

/// Full eigen-decomposition. Columns of `right` are unit-norm right
/// eigenvectors; rows of `left` are left eigenvectors with left * right = I.
/// Eigenvalues sorted by descending magnitude.
struct EigenSample {
  double f_hz = 0.0;
  Eigen::VectorXcd lambda;
  Eigen::MatrixXcd right;
  Eigen::MatrixXcd left;
  double matrix_norm = 0.0;  ///< Frobenius norm of the decomposed matrix
  double condition = 1.0;    ///< 2-norm condition number of `right`
  bool defective = false;    ///< condition > 1e10

  std::size_t size() const { return static_cast<std::size_t>(lambda.size()); }
  Eigen::RowVectorXcd u(std::size_t k) const { return left.row(static_cast<Eigen::Index>(k)); }
  Eigen::VectorXcd w(std::size_t k) const { return right.col(static_cast<Eigen::Index>(k)); }
};

inline constexpr double kDefectiveCondition = 1e10;

/// Throws Error(NonConvergence) if the QR iteration fails, Error(InvalidArgument)
/// on non-finite input.
EigenSample eig_lr(const Eigen::MatrixXcd& m, double f_hz = 0.0);

/// Worker count for sweeps: hardware concurrency capped by DAMP_PLANNER_THREADS.
unsigned default_thread_count();

struct SweepOptions {
  unsigned threads = 0;  ///< 0 = default_thread_count()
};

/// One sample per grid frequency, in grid order. Independent of thread count.
std::vector<EigenSample> sweep(const MatrixSource& source, const FrequencyGrid& grid, SweepOptions opts = {});
std::vector<EigenSample> sweep(const NetworkGraph& g, const FrequencyGrid& grid, SweepOptions opts = {});

struct TracePoint {
  double f_hz = 0.0;
  cplx lambda;
  Eigen::RowVectorXcd u;
  Eigen::VectorXcd w;
  std::size_t mode = 0;  ///< column in the sample it came from
  double overlap = 1.0;  ///< |u(prev) . w(this)|, 1 for the first point
};

struct EigenTrace {
  int id = 0;
  std::vector<TracePoint> points;
  std::vector<std::size_t> discontinuities;  ///< point indices with overlap below threshold
};

inline constexpr double kTrackOverlapThreshold = 0.5;

/// Greedy matching of consecutive samples by eigenvector overlap, ties broken
/// by eigenvalue distance. Trace ids follow the first sample's ordering.
std::vector<EigenTrace> track(std::span<const EigenSample> samples,
                              double threshold = kTrackOverlapThreshold);

enum class CrossingDirection { PositiveToNegative, NegativeToPositive };

struct CrossoverEvent {
  int trace_id = 0;
  double f_cr_hz = 0.0;
  cplx lambda;  ///< eigenvalue at f_cr (imaginary part within tolerance of 0)
  CrossingDirection direction = CrossingDirection::PositiveToNegative;
  bool critical = false;
  int bisection_steps = 0;
  /// Decomposition at f_cr and the column holding this eigenvalue. Present
  /// only when the crossover was refined on a matrix source.
  std::optional<EigenSample> sample;
  std::size_t mode = 0;

  double re_lambda() const { return lambda.real(); }
};

struct CrossoverOptions {
  double margin = 0.0;         ///< critical iff Re[lambda](f_cr) <= margin
  int max_bisection_steps = 60;
  double im_rel_tol = 1e-6;    ///< |Im| <= tol * max(1, |Re|)
};

/// Sign changes of Im[lambda] along a trace. With a source, each bracket is
/// refined by bisection on re-decomposed matrices, following the eigenvalue
/// by eigenvector overlap; without one, by linear interpolation.
std::vector<CrossoverEvent> find_crossovers(const EigenTrace& t, const MatrixSource* source = nullptr,
                                            const CrossoverOptions& opts = {});

/// Bisection on [fa, fb] for the eigenvalue identified by left eigenvector
/// u_ref at fa. Throws Error(NonConvergence) after max steps.
CrossoverEvent refine_crossover(const MatrixSource& source, double fa, double fb,
                                const Eigen::RowVectorXcd& u_ref, const CrossoverOptions& opts = {});

/// Index of the eigenvector in s best matching u_ref (max |u_ref . w_j|).
std::size_t match_mode(const EigenSample& s, const Eigen::RowVectorXcd& u_ref);

struct StabilityReport {
  std::vector<CrossoverEvent> events;  ///< ordered by trace id, then frequency
  bool stable = true;
  std::vector<int> critical_traces;
  double margin = 0.0;

  std::vector<CrossoverEvent> critical_events() const;
};

StabilityReport assess(std::span<const CrossoverEvent> events, double margin = 0.0);

struct AnalysisOptions {
  SweepOptions sweep;
  CrossoverOptions crossover;
  double track_threshold = kTrackOverlapThreshold;
};

struct StabilityAnalysis {
  std::vector<EigenSample> samples;
  std::vector<EigenTrace> traces;
  StabilityReport report;
};

StabilityAnalysis analyze(const MatrixSource& source, const FrequencyGrid& grid, const AnalysisOptions& opts = {});
StabilityAnalysis analyze(const NetworkGraph& g, const FrequencyGrid& grid, const AnalysisOptions& opts = {});

/// Discrete winding number of a closed curve about the origin. nullopt when
/// the curve passes within origin_tol of the origin.
std::optional<int> winding_number(std::span<const cplx> curve, double origin_tol = 1e-9);

/// Winding of one trace over the closed contour formed with its
/// conjugate-mirrored negative-frequency half. Test aid only.
std::optional<int> nyquist_encirclement(const EigenTrace& t, double origin_tol = 1e-9);

}  // namespace dampplan
