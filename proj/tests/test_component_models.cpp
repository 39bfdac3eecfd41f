#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "dampplan/component_models.hpp"
#include "dampplan/error.hpp"
#include "test_support.hpp"

using namespace dampplan;
using testsupport::rel_err;

namespace {

constexpr double w0 = 2.0 * std::numbers::pi * 50.0;

double ratio(cplx y) { return std::abs(y.imag() / y.real()); }

// Independent composition of the damper admittance from its textbook pieces.
cplx ad_reference(const ADParams& p, double f) {
  const cplx s = jomega(f);
  const cplx sp = s + cplx{0.0, w0};
  const cplx gh = (sp * sp + w0 * w0) / (sp * sp + 2.0 * p.xi * w0 * sp + w0 * w0);
  const cplx glag = (p.tau_s * sp + 1.0) / (p.beta * p.tau_s * sp + 1.0);
  const cplx glow_shift = p.omega_low / (sp + p.omega_low);
  const cplx glow = p.omega_low / (s + p.omega_low);
  const cplx gd = std::exp(-s * 1.5 / p.f_s_hz);
  const cplx gi = p.k_pi + p.k_ii / s;
  const cplx hi = p.mode == AdMode::Traditional
                      ? cplx{0.0}
                      : (1.0 / (p.g_s * p.omega_c) - p.l_f_h) * s + 1.0 / p.g_s;
  return (1.0 + p.k_v * gh * glag * glow_shift * gd) / (s * p.l_f_h + hi * glow * gd + gi * gd);
}

}  // namespace

TEST_CASE("RL series stamp") {
  const DqBlock z = rl_series_dq({0.04, 1.5e-3}, 203.0, w0);
  CHECK(z.dd.real() == doctest::Approx(0.04));
  CHECK(z.dd.imag() == doctest::Approx(1.9133).epsilon(1e-4));
  CHECK(z.dq.real() == doctest::Approx(-0.4712).epsilon(1e-4));
  CHECK(z.qd.real() == doctest::Approx(0.4712).epsilon(1e-4));
  CHECK(z.qq == z.dd);
  CHECK(z.dq == -z.qd);

  const DqBlock dc = rl_series_dq({0.04, 1.5e-3}, 0.0, 0.0);
  CHECK(dc == DqBlock::diag(0.04, 0.04));

  CHECK_THROWS_AS(RlBranchParams{}.validate(), Error);
  CHECK_THROWS_AS((RlBranchParams{-1.0, 1e-3}).validate(), Error);
  CHECK_NOTHROW((RlBranchParams{0.0, 1e-3}).validate());
}

TEST_CASE("pi cable stamps") {
  const auto st = pi_cable_stamps({0.2, 0.3e-3, 12e-6}, 1000.0, w0);
  CHECK(st.series == rl_series_dq({0.2, 0.3e-3}, 1000.0, w0));
  CHECK(std::abs(st.shunt_end.dd - cplx{0.0, 2.0 * std::numbers::pi * 1000.0 * 6e-6}) < 1e-15);
  CHECK(std::abs(st.shunt_end.dd.imag() - 0.0377) < 1e-4);
  CHECK(st.shunt_end.dq.real() == doctest::Approx(-w0 * 6e-6));
  CHECK(st.shunt_end.dq.real() == doctest::Approx(-1.885e-3).epsilon(1e-3));
  CHECK(st.shunt_end.dq == -st.shunt_end.qd);
  CHECK(pi_cable_stamps({0.2, 0.3e-3, 12e-6}, 37.0, w0).shunt_end.dq == st.shunt_end.dq);

  const DqBlock c = capacitor_dq(15e-6, 400.0, w0);
  CHECK(c.dq == -c.qd);
  CHECK_THROWS_AS((PiCableParams{0.2, 0.3e-3, 0.0}).validate(), Error);
}

TEST_CASE("inverter admittance") {
  InverterParams p;

  SUBCASE("passive limit with zero gains and no rotation") {
    InverterParams q = p;
    q.k_pi = q.k_ii = q.k_ppll = q.k_ipll = 0.0;
    q.k_dec = 0.0;
    for (double f : {5.0, 120.0, 1500.0, 4000.0}) {
      const cplx s = jomega(f);
      const DqBlock y = inverter_admittance(q, f, 0.0);
      const cplx ref = s * q.c_f + 1.0 / (s * q.l_h);
      CHECK(rel_err(y.dd, ref) < 1e-10);
      CHECK(std::abs(y.dq) < 1e-12);
    }
    // with rotation: inverse of the rotating inductor plus the rotating capacitor
    for (double f : {5.0, 120.0, 1500.0}) {
      const cplx s = jomega(f);
      const DqBlock y = inverter_admittance(q, f, w0);
      const cplx d = s * s * q.l_h * q.l_h + w0 * w0 * q.l_h * q.l_h;
      CHECK(rel_err(y.dd, s * q.l_h / d + s * q.c_f) < 1e-10);
      CHECK(rel_err(y.dq, w0 * q.l_h / d - w0 * q.c_f) < 1e-10);
      CHECK(rel_err(y.qd, -w0 * q.l_h / d + w0 * q.c_f) < 1e-10);
    }
  }

  SUBCASE("PLL gives negative q-axis conductance at low frequency") {
    CHECK(inverter_admittance(p, 10.0, w0).qq.real() < 0.0);
  }

  SUBCASE("range") {
    CHECK_THROWS_AS(inverter_admittance(p, 0.0, w0), Error);
    CHECK_THROWS_AS(inverter_admittance(p, 5000.0, w0), Error);
    InverterParams bad = p;
    bad.l_h = 0.0;
    CHECK_THROWS_AS(inverter_admittance(bad, 100.0, w0), Error);
  }
}

TEST_CASE("tabulated admittance") {
  const AdmittanceTable t({{100.0, DqBlock::scalar(1.0)}, {1000.0, DqBlock::scalar(3.0)}});
  CHECK(tabulated_admittance(t, 100.0) == DqBlock::scalar(1.0));
  CHECK(tabulated_admittance(t, 1000.0) == DqBlock::scalar(3.0));
  CHECK(std::abs(tabulated_admittance(t, std::sqrt(100.0 * 1000.0)).dd - 2.0) < 1e-12);
  CHECK(std::abs(tabulated_admittance(t, 316.23).dd - 2.0) < 1e-4);
  try {
    tabulated_admittance(t, 2000.0);
    FAIL("out of range accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfRange);
  }
  CHECK_THROWS_AS(AdmittanceTable({{100.0, DqBlock::identity()}}), Error);
  CHECK_THROWS_AS(AdmittanceTable({{100.0, DqBlock::identity()}, {50.0, DqBlock::identity()}}), Error);

  SUBCASE("dense tabulation of the analytic inverter re-queried off grid") {
    InverterParams p;
    std::vector<AdmittanceRow> rows;
    for (double f = 10.0; f <= 2500.0; f *= 1.01) rows.push_back({f, inverter_admittance(p, f, w0)});
    const AdmittanceTable dense(rows);
    double worst = 0.0;
    for (double f = 11.3; f < dense.fmax(); f *= 1.0537) {
      const DqBlock a = tabulated_admittance(dense, f), b = inverter_admittance(p, f, w0);
      worst = std::max(worst, (a - b).max_abs() / b.max_abs());
    }
    CHECK(worst <= 0.01);
  }

  SUBCASE("csv round trip and header check") {
    const auto dir = std::filesystem::temp_directory_path() / "dampplan_table_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "y.csv";
    const AdmittanceTable src({{10.0, DqBlock{{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}, {7.0, 8.0}}},
                               {20.0, DqBlock::scalar({0.125, -0.5})}});
    src.save_csv(path);
    const AdmittanceTable back = AdmittanceTable::load_csv(path);
    REQUIRE(back.rows().size() == 2);
    CHECK(back.rows()[0].y == src.rows()[0].y);
    CHECK(back.rows()[1].y == src.rows()[1].y);

    std::ofstream(dir / "bad.csv") << "f,a\n1,2\n";
    CHECK_THROWS_AS(AdmittanceTable::load_csv(dir / "bad.csv"), Error);
    std::ofstream(dir / "badnum.csv") << "f_hz,re_dd,im_dd,re_dq,im_dq,re_qd,im_qd,re_qq,im_qq\n"
                                      << "10,1,0,0,0,0,0,1,0\n20,x,0,0,0,0,0,1,0\n";
    try {
      AdmittanceTable::load_csv(dir / "badnum.csv");
      FAIL("bad number accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Parse);
      CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
    CHECK_THROWS_AS(AdmittanceTable::load_csv(dir / "missing.csv"), Error);
  }
}

TEST_CASE("damper feedforward design") {
  const ADParams p;
  const auto ff = feedforward_coefficients(p);
  CHECK(ff.slope == doctest::Approx(-4.212e-5).epsilon(1e-3));
  CHECK(ff.constant == doctest::Approx(16.667).epsilon(1e-4));

  std::mt19937_64 rng(5);
  const ActiveDamper ad(p, w0);
  for (int i = 0; i < 100; ++i) {
    const cplx s = testsupport::random_s(rng);
    const cplx lhs = 1.0 / (s * p.l_f_h + ad.feedforward().evaluate(s));
    const cplx rhs = p.g_s * p.omega_c / (s + p.omega_c);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(rhs));
  }
}

TEST_CASE("damper admittance") {
  ADParams p;
  p.k_v = 1.5;
  for (double f : {30.0, 200.0, 1000.0, 2000.0, 5000.0}) {
    CHECK(rel_err(ActiveDamper(p, w0).admittance_hz(f), ad_reference(p, f)) < 1e-10);
    const DqBlock b = ad_admittance(p, f, w0);
    CHECK(b.dq == cplx{0.0});
    CHECK(b.qd == cplx{0.0});
    CHECK(b.dd == b.qq);
  }
  ADParams t = p;
  t.mode = AdMode::Traditional;
  for (double f : {100.0, 1500.0}) {
    CHECK(rel_err(ActiveDamper(t, w0).admittance_hz(f), ad_reference(t, f)) < 1e-10);
    CHECK(ad_admittance(t, f, w0).dq == cplx{0.0});
  }

  SUBCASE("affine in the feedforward gain") {
    const ActiveDamper ad(p, w0);
    for (double f : {150.0, 900.0}) {
      const auto a = ad.affine_in_kv(f);
      CHECK(rel_err(a.base + p.k_v * a.per_kv, ad.admittance_hz(f)) < 1e-13);
    }
  }

  SUBCASE("traditional damper loses quasi-resistivity") {
    bool exceeds = false;
    for (double f = 100.0; f <= 2000.0; f += 1.0) exceeds = exceeds || ratio(ActiveDamper(t, w0).admittance_hz(f)) > 1.0;
    CHECK(exceeds);
  }

  SUBCASE("quasi-resistive over an admissible gain range") {
    for (double kv : {1.45, 1.6, 1.8, 2.0}) {
      ADParams q = p;
      q.k_v = kv;
      const ActiveDamper ad(q, w0);
      double worst = 0.0;
      for (double f = 100.0; f <= 2000.0; f += 1.0) worst = std::max(worst, ratio(ad.admittance_hz(f)));
      CHECK(worst <= 0.1);
    }
  }

  CHECK_THROWS_AS(ad_admittance(p, 0.0, w0), Error);
  ADParams bad = p;
  bad.g_s = 0.0;
  CHECK_THROWS_AS(ad_admittance(bad, 100.0, w0), Error);
  bad = p;
  bad.k_v = -1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("damper curve clusters") {
  const ADParams p;
  const auto grid = FrequencyGrid::linear(100.0, 2000.0, 50.0);
  const double one[] = {0.8e-3};
  const auto single = ad_curve_cluster(p, AdSweepParam::FilterInductance, one, grid);
  REQUIRE(single.size() == 1);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(single[0].y[i] == ad_admittance(p, grid[i], w0).dd);

  const auto g500 = FrequencyGrid({500.0});
  const double kvs[] = {0.0, 0.5, 1.0, 1.5, 2.0};
  const auto kv_curves = ad_curve_cluster(p, AdSweepParam::CompensationGain, kvs, g500);
  for (std::size_t i = 1; i < kv_curves.size(); ++i) CHECK(kv_curves[i].y[0].real() > kv_curves[i - 1].y[0].real());

  const double gs[] = {0.03, 0.06, 0.09};
  const auto g_curves = ad_curve_cluster(p, AdSweepParam::LowPassGain, gs, g500);
  for (std::size_t i = 1; i < g_curves.size(); ++i) CHECK(g_curves[i].y[0].real() > g_curves[i - 1].y[0].real());

  CHECK_THROWS_AS(ad_curve_cluster(p, AdSweepParam::LowPassGain, std::span<const double>{}, grid), Error);
}
