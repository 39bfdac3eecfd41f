#pragma once

// Frequency-response primitives shared by every model: rational transfer
// elements with an exact transport delay, the dq frequency shift, frequency
// grids and 2x2 complex block algebra.

#include <complex>
#include <numbers>
#include <vector>

namespace dampplan {

using cplx = std::complex<double>;

inline constexpr double kDefaultFundamentalHz = 50.0;
inline constexpr double kDefaultOmega0 = 2.0 * std::numbers::pi * kDefaultFundamentalHz;

inline cplx jomega(double f_hz) { return {0.0, 2.0 * std::numbers::pi * f_hz}; }

/// Polynomial coefficients in descending powers of s.
using Poly = std::vector<cplx>;

cplx poly_eval(const Poly& p, cplx s);
Poly poly_mul(const Poly& a, const Poly& b);

/// num(s)/den(s) * exp(-s*delay). Immutable once built.
class TransferElement {
 public:
  TransferElement();  // constant 1
  TransferElement(Poly num, Poly den, double delay_s = 0.0);

  static TransferElement constant(cplx k);
  static TransferElement delay(double delay_s);

  const Poly& numerator() const { return num_; }
  const Poly& denominator() const { return den_; }
  double delay() const { return delay_; }

  /// Throws Error(PoleHit) when |den(s)| < 1e-300.
  cplx evaluate(cplx s) const;
  cplx at_hz(double f_hz) const { return evaluate(jomega(f_hz)); }

  TransferElement operator*(const TransferElement& other) const;

 private:
  Poly num_;
  Poly den_;
  double delay_ = 0.0;
};

cplx evaluate(const TransferElement& tf, cplx s);

/// Returns the element G'(s) = G(s + j*omega0), built by binomial
/// recomposition of both polynomials. Only delay-free elements can be shifted;
/// a delay would need a separate exp(-j*omega0*T) scalar.
TransferElement freq_shift(const TransferElement& tf, double omega0);

/// Substitutes s -> s + shift into a polynomial.
Poly poly_shift(const Poly& p, cplx shift);

/// 2x2 complex block coupling the d- and q-axis. Siemens or ohms by role.
struct DqBlock {
  cplx dd{}, dq{}, qd{}, qq{};

  static DqBlock identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static DqBlock zero() { return {}; }
  static DqBlock diag(cplx d, cplx q) { return {d, 0.0, 0.0, q}; }
  static DqBlock scalar(cplx v) { return {v, 0.0, 0.0, v}; }

  cplx det() const { return dd * qq - dq * qd; }
  double max_abs() const;

  DqBlock& operator+=(const DqBlock& o);
  DqBlock& operator-=(const DqBlock& o);
  friend DqBlock operator+(DqBlock a, const DqBlock& b) { return a += b; }
  friend DqBlock operator-(DqBlock a, const DqBlock& b) { return a -= b; }
  friend DqBlock operator-(const DqBlock& a) { return {-a.dd, -a.dq, -a.qd, -a.qq}; }
  friend DqBlock operator*(const DqBlock& a, const DqBlock& b);
  friend DqBlock operator*(cplx k, const DqBlock& a) { return {k * a.dd, k * a.dq, k * a.qd, k * a.qq}; }
  friend bool operator==(const DqBlock&, const DqBlock&) = default;
};

/// Closed-form 2x2 inverse. Throws Error(SingularBlock) when |det| <= 1e-300.
DqBlock block_inverse(const DqBlock& b);

/// Ordered, strictly increasing, positive sweep frequencies in Hz.
class FrequencyGrid {
 public:
  explicit FrequencyGrid(std::vector<double> hz, double omega0 = kDefaultOmega0);

  /// fmin, fmin+df, ... up to fmax inclusive (within df*1e-9).
  static FrequencyGrid linear(double fmin, double fmax, double df, double omega0 = kDefaultOmega0);
  static FrequencyGrid logarithmic(double fmin, double fmax, std::size_t points,
                                   double omega0 = kDefaultOmega0);

  const std::vector<double>& hz() const { return hz_; }
  double omega0() const { return omega0_; }
  std::size_t size() const { return hz_.size(); }
  double operator[](std::size_t i) const { return hz_[i]; }
  double front() const { return hz_.front(); }
  double back() const { return hz_.back(); }

 private:
  std::vector<double> hz_;
  double omega0_;
};

}  // namespace dampplan
