#include "dampplan/dq_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dampplan/error.hpp"

namespace dampplan {

namespace {

constexpr double kPoleThreshold = 1e-300;

void trim_leading_zeros(Poly& p) {
  auto first = std::find_if(p.begin(), p.end(), [](cplx c) { return c != cplx{}; });
  if (first == p.end()) {
    p.assign(1, cplx{});
    return;
  }
  p.erase(p.begin(), first);
}

}  // namespace

cplx poly_eval(const Poly& p, cplx s) {
  cplx acc{};
  for (const cplx& c : p) acc = acc * s + c;
  return acc;
}

Poly poly_mul(const Poly& a, const Poly& b) {
  if (a.empty() || b.empty()) return {cplx{}};
  Poly out(a.size() + b.size() - 1, cplx{});
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k) out[i + k] += a[i] * b[k];
  return out;
}

Poly poly_shift(const Poly& p, cplx shift) {
  // p(s) = sum_k c_k s^k, with (s+a)^k = sum_m C(k,m) a^(k-m) s^m.
  const std::size_t n = p.size();
  if (n == 0) return {};
  const std::size_t degree = n - 1;
  std::vector<cplx> ascending(n, cplx{});
  for (std::size_t k = 0; k <= degree; ++k) {
    const cplx ck = p[degree - k];
    if (ck == cplx{}) continue;
    double binom = 1.0;  // C(k, m) built incrementally from m = k downward
    cplx apow = 1.0;     // a^(k-m)
    for (std::size_t m = k + 1; m-- > 0;) {
      ascending[m] += ck * binom * apow;
      binom = binom * static_cast<double>(m) / static_cast<double>(k - m + 1);
      apow *= shift;
    }
  }
  return Poly(ascending.rbegin(), ascending.rend());
}

TransferElement::TransferElement() : num_{1.0}, den_{1.0} {}

TransferElement::TransferElement(Poly num, Poly den, double delay_s)
    : num_(std::move(num)), den_(std::move(den)), delay_(delay_s) {
  if (num_.empty()) num_.assign(1, cplx{});
  if (std::none_of(den_.begin(), den_.end(), [](cplx c) { return c != cplx{}; }))
    throw Error(ErrorCode::InvalidArgument, "transfer element denominator is identically zero");
  if (!(delay_ >= 0.0) || !std::isfinite(delay_))
    throw Error(ErrorCode::InvalidArgument, "transfer element delay must be finite and >= 0");
  trim_leading_zeros(num_);
  trim_leading_zeros(den_);
}

TransferElement TransferElement::constant(cplx k) { return TransferElement(Poly{k}, Poly{1.0}); }

TransferElement TransferElement::delay(double delay_s) {
  return TransferElement(Poly{1.0}, Poly{1.0}, delay_s);
}

cplx TransferElement::evaluate(cplx s) const {
  const cplx d = poly_eval(den_, s);
  if (std::abs(d) < kPoleThreshold) {
    std::ostringstream msg;
    msg << "transfer element evaluated at a pole, s = " << s;
    throw Error(ErrorCode::PoleHit, msg.str());
  }
  cplx value = poly_eval(num_, s) / d;
  if (delay_ != 0.0) value *= std::exp(-s * delay_);
  return value;
}

TransferElement TransferElement::operator*(const TransferElement& other) const {
  return TransferElement(poly_mul(num_, other.num_), poly_mul(den_, other.den_), delay_ + other.delay_);
}

cplx evaluate(const TransferElement& tf, cplx s) { return tf.evaluate(s); }

TransferElement freq_shift(const TransferElement& tf, double omega0) {
  if (tf.delay() != 0.0)
    throw Error(ErrorCode::InvalidArgument, "freq_shift requires a delay-free transfer element");
  const cplx shift{0.0, omega0};
  return TransferElement(poly_shift(tf.numerator(), shift), poly_shift(tf.denominator(), shift));
}

double DqBlock::max_abs() const {
  return std::max({std::abs(dd), std::abs(dq), std::abs(qd), std::abs(qq)});
}

DqBlock& DqBlock::operator+=(const DqBlock& o) {
  dd += o.dd;
  dq += o.dq;
  qd += o.qd;
  qq += o.qq;
  return *this;
}

DqBlock& DqBlock::operator-=(const DqBlock& o) {
  dd -= o.dd;
  dq -= o.dq;
  qd -= o.qd;
  qq -= o.qq;
  return *this;
}

DqBlock operator*(const DqBlock& a, const DqBlock& b) {
  return {a.dd * b.dd + a.dq * b.qd, a.dd * b.dq + a.dq * b.qq,
          a.qd * b.dd + a.qq * b.qd, a.qd * b.dq + a.qq * b.qq};
}

DqBlock block_inverse(const DqBlock& b) {
  const cplx det = b.det();
  if (!(std::abs(det) > kPoleThreshold))
    throw Error(ErrorCode::SingularBlock, "dq block is singular");
  const cplx inv = 1.0 / det;
  return {b.qq * inv, -b.dq * inv, -b.qd * inv, b.dd * inv};
}

FrequencyGrid::FrequencyGrid(std::vector<double> hz, double omega0)
    : hz_(std::move(hz)), omega0_(omega0) {
  if (hz_.empty()) throw Error(ErrorCode::InvalidArgument, "frequency grid is empty");
  for (std::size_t i = 0; i < hz_.size(); ++i) {
    if (!(hz_[i] > 0.0) || !std::isfinite(hz_[i]))
      throw Error(ErrorCode::InvalidArgument, "frequency grid entries must be finite and > 0");
    if (i > 0 && !(hz_[i] > hz_[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "frequency grid must be strictly increasing");
  }
  if (!(omega0_ >= 0.0) || !std::isfinite(omega0_))
    throw Error(ErrorCode::InvalidArgument, "fundamental frequency must be finite and >= 0");
}

FrequencyGrid FrequencyGrid::linear(double fmin, double fmax, double df, double omega0) {
  if (!(fmin > 0.0) || !(fmax >= fmin) || !(df > 0.0))
    throw Error(ErrorCode::InvalidArgument, "linear grid needs 0 < fmin <= fmax and df > 0");
  const auto steps = static_cast<std::size_t>(std::floor((fmax - fmin) / df + 1e-9));
  std::vector<double> hz;
  hz.reserve(steps + 1);
  // fmin + i*df, never accumulated, so grids are reproducible bit for bit
  for (std::size_t i = 0; i <= steps; ++i) hz.push_back(fmin + static_cast<double>(i) * df);
  return FrequencyGrid(std::move(hz), omega0);
}

FrequencyGrid FrequencyGrid::logarithmic(double fmin, double fmax, std::size_t points, double omega0) {
  if (!(fmin > 0.0) || !(fmax > fmin) || points < 2)
    throw Error(ErrorCode::InvalidArgument, "log grid needs 0 < fmin < fmax and >= 2 points");
  std::vector<double> hz(points);
  const double a = std::log10(fmin), b = std::log10(fmax);
  for (std::size_t i = 0; i < points; ++i)
    hz[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
  return FrequencyGrid(std::move(hz), omega0);
}

}  // namespace dampplan
