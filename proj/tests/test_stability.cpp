#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dampplan/error.hpp"
#include "dampplan/network_io.hpp"
#include "dampplan/stability.hpp"
#include "random_systems.hpp"
#include "test_support.hpp"

using namespace dampplan;

namespace {

const StabilityAnalysis& fixture_analysis() {
  static const StabilityAnalysis a =
      analyze(case_study_network(), FrequencyGrid::linear(10.0, 2500.0, 1.0));
  return a;
}

void check_decomposition(const Eigen::MatrixXcd& m, const EigenSample& s) {
  const double norm = m.norm();
  for (std::size_t k = 0; k < s.size(); ++k) {
    const auto lk = s.lambda(static_cast<Eigen::Index>(k));
    CHECK((m * s.w(k) - lk * s.w(k)).norm() <= 1e-9 * norm);
    CHECK((s.u(k) * m - lk * s.u(k)).norm() <= 1e-9 * norm);
  }
  const auto n = static_cast<Eigen::Index>(s.size());
  CHECK((s.left * s.right - Eigen::MatrixXcd::Identity(n, n)).norm() <= 1e-9);
}

CrossoverEvent event(int trace, double f, double re) {
  CrossoverEvent e;
  e.trace_id = trace;
  e.f_cr_hz = f;
  e.lambda = {re, 0.0};
  e.critical = !(re > 0.0);
  return e;
}

}  // namespace

TEST_CASE("left/right decomposition") {
  SUBCASE("identity") {
    const auto s = eig_lr(Eigen::MatrixXcd::Identity(4, 4));
    for (Eigen::Index k = 0; k < 4; ++k) CHECK(std::abs(s.lambda(k) - 1.0) < 1e-15);
    check_decomposition(Eigen::MatrixXcd::Identity(4, 4), s);
  }
  SUBCASE("diagonal") {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2, 2);
    m(0, 0) = 3.0;
    m(1, 1) = cplx{1.0, 1.0};
    const auto s = eig_lr(m);
    CHECK(std::abs(s.lambda(0) - 3.0) < 1e-15);
    CHECK(std::abs(s.lambda(1) - cplx{1.0, 1.0}) < 1e-15);
    CHECK(std::abs(std::abs(s.right(0, 0)) - 1.0) < 1e-15);
    CHECK(std::abs(s.right(1, 0)) < 1e-15);
  }
  SUBCASE("companion matrix") {
    Eigen::MatrixXcd m(2, 2);
    m << 0.0, 1.0, -2.0, -3.0;
    const auto s = eig_lr(m);
    CHECK(std::abs(s.lambda(0) + 2.0) < 1e-12);
    CHECK(std::abs(s.lambda(1) + 1.0) < 1e-12);
    check_decomposition(m, s);
  }
  SUBCASE("random matrices") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 20; ++i) {
      const auto m = testsupport::random_matrix(rng, 8);
      check_decomposition(m, eig_lr(m));
    }
  }
  SUBCASE("non-finite input") {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(2, 2);
    m(0, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(eig_lr(m), Error);
  }
}

TEST_CASE("sweep") {
  SUBCASE("one-node RC shunt without rotation follows the scalar admittance") {
    NetworkGraph g;
    g.omega0 = 0.0;
    g.nodes = {1};
    g.shunts = {{1, GridParams{0.5, 0.0}}, {1, CapacitorParams{10e-6}}};
    const auto grid = FrequencyGrid::linear(10.0, 1000.0, 10.0);
    const auto samples = sweep(g, grid);
    REQUIRE(samples.size() == grid.size());
    for (const auto& s : samples) {
      const cplx y = 1.0 / 0.5 + jomega(s.f_hz) * 10e-6;
      CHECK(std::abs(s.lambda(0) - y) < 1e-12);
      CHECK(std::abs(s.lambda(1) - y) < 1e-12);
    }
  }
  SUBCASE("fixture dimension and per-point accuracy") {
    const auto& a = fixture_analysis();
    CHECK(a.samples.size() == 2491);
    CHECK(a.traces.size() == 8);
    const Assembler asmb(case_study_network());
    for (std::size_t i = 0; i < a.samples.size(); i += 1) check_decomposition(asmb(a.samples[i].f_hz).matrix, a.samples[i]);
  }
  SUBCASE("independent of grid composition and thread count") {
    const auto g = case_study_network();
    std::vector<double> hz{1000.0, 50.5, 733.0, 203.0};
    std::sort(hz.begin(), hz.end());
    const auto a = sweep(g, FrequencyGrid(hz), {1});
    const auto b = sweep(g, FrequencyGrid({203.0, 733.0}), {3});
    CHECK(a[1].lambda == b[0].lambda);
    CHECK(a[2].lambda == b[1].lambda);
    const auto grid = FrequencyGrid::linear(100.0, 200.0, 1.0);
    const auto one = sweep(g, grid, {1}), four = sweep(g, grid, {4});
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(one[i].lambda == four[i].lambda);
  }
  SUBCASE("errors name the frequency") {
    NetworkGraph g;
    g.nodes = {1};
    g.shunts = {{1, InverterDevice{InverterParams{}, {}}}};
    try {
      sweep(g, FrequencyGrid::linear(4000.0, 6000.0, 500.0));
      FAIL("out of range sweep accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::OutOfRange);
      CHECK(std::string(e.what()).find("5000") != std::string::npos);
    }
  }
}

TEST_CASE("thread cap from the environment") {
  setenv("DAMP_PLANNER_THREADS", "1", 1);
  CHECK(default_thread_count() == 1);
  unsetenv("DAMP_PLANNER_THREADS");
  CHECK(default_thread_count() >= 1);
}

TEST_CASE("tracking") {
  SUBCASE("constant matrix") {
    std::mt19937_64 rng(2);
    const Eigen::MatrixXcd m = testsupport::random_matrix(rng, 4);
    const auto samples = sweep([&](double) { return m; }, FrequencyGrid::linear(1.0, 10.0, 1.0));
    const auto traces = track(samples);
    REQUIRE(traces.size() == 4);
    for (const auto& t : traces) {
      CHECK(t.discontinuities.empty());
      for (const auto& p : t.points) CHECK(p.overlap == doctest::Approx(1.0));
      for (const auto& p : t.points) CHECK(p.lambda == t.points.front().lambda);
    }
  }
  SUBCASE("crossing eigenvalues keep identity by eigenvector") {
    const double c = std::cos(0.4), s = std::sin(0.4);
    Eigen::Matrix2cd rot;
    rot << c, -s, s, c;
    // a(f) rises through b(f); fixed eigenvectors
    const MatrixSource src = [&](double f) {
      Eigen::Matrix2cd d = Eigen::Matrix2cd::Zero();
      d(0, 0) = f;
      d(1, 1) = 2.0 - f;
      return Eigen::MatrixXcd(rot * d * rot.transpose());
    };
    const auto traces = track(sweep(src, FrequencyGrid::linear(0.05, 1.95, 0.1)));
    REQUIRE(traces.size() == 2);
    for (const auto& t : traces) {
      const bool rising = t.points.back().lambda.real() > t.points.front().lambda.real();
      for (std::size_t i = 1; i < t.points.size(); ++i)
        CHECK((t.points[i].lambda.real() > t.points[i - 1].lambda.real()) == rising);
    }
  }
  SUBCASE("fixture traces are continuous") {
    for (const auto& t : fixture_analysis().traces) CHECK(t.discontinuities.empty());
  }
}

TEST_CASE("crossover detection") {
  const MatrixSource line = [](double f) {
    Eigen::MatrixXcd m(1, 1);
    m(0, 0) = cplx{-0.01, (f - 1000.0) / 1000.0};
    return m;
  };
  SUBCASE("refined on the source") {
    const auto a = analyze(line, FrequencyGrid::linear(903.0, 1100.0, 7.0));
    REQUIRE(a.report.events.size() == 1);
    const auto& e = a.report.events[0];
    CHECK(e.f_cr_hz == doctest::Approx(1000.0).epsilon(1e-6));
    CHECK(e.lambda.real() == doctest::Approx(-0.01));
    CHECK(e.critical);
    CHECK(e.direction == CrossingDirection::NegativeToPositive);
    CHECK(e.bisection_steps <= 60);
    REQUIRE(e.sample);
    CHECK(!a.report.stable);
  }
  SUBCASE("interpolated without a source") {
    const auto traces = track(sweep(line, FrequencyGrid::linear(903.0, 1100.0, 7.0)));
    const auto ev = find_crossovers(traces[0]);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].f_cr_hz == doctest::Approx(1000.0).epsilon(1e-9));
    CHECK(!ev[0].sample);
  }
  SUBCASE("no sign change") {
    const MatrixSource up = [](double f) {
      Eigen::MatrixXcd m(1, 1);
      m(0, 0) = cplx{-0.01, f};
      return m;
    };
    CHECK(analyze(up, FrequencyGrid::linear(10.0, 100.0, 1.0)).report.events.empty());
  }
  SUBCASE("exact zero on a sample") {
    const auto a = analyze(line, FrequencyGrid::linear(900.0, 1100.0, 50.0));
    REQUIRE(a.report.events.size() == 1);
    CHECK(a.report.events[0].f_cr_hz == 1000.0);
  }
  SUBCASE("fixture critical bands") {
    const auto& r = fixture_analysis().report;
    CHECK(!r.stable);
    int low = 0, high = 0;
    for (const auto& e : r.critical_events()) {
      CHECK(e.bisection_steps <= 60);
      CHECK(std::abs(e.lambda.imag()) <= 1e-6 * std::max(1.0, std::abs(e.lambda.real())));
      if (e.f_cr_hz >= 100.0 && e.f_cr_hz <= 400.0) ++low;
      if (e.f_cr_hz >= 1500.0 && e.f_cr_hz <= 2200.0) ++high;
    }
    CHECK(low >= 1);
    CHECK(high >= 2);
  }
}

TEST_CASE("verdict") {
  CHECK(assess({}).stable);
  const CrossoverEvent one[] = {event(5, 1821.0, -0.0049)};
  const auto r = assess(one);
  CHECK(!r.stable);
  CHECK(r.critical_traces == std::vector<int>{5});
  const CrossoverEvent ok[] = {event(1, 300.0, 0.02), event(2, 900.0, 0.01)};
  const auto m = assess(ok, 0.005);
  CHECK(m.stable);
  CHECK(m.margin == 0.005);
  CHECK(!assess(ok, 0.015).stable);
  const CrossoverEvent zero[] = {event(3, 10.0, 0.0)};
  CHECK(!assess(zero).stable);
}

TEST_CASE("winding number") {
  std::vector<cplx> circle, offset;
  for (int i = 0; i < 64; ++i) {
    const cplx z = std::polar(1.0, 2.0 * std::numbers::pi * i / 64.0);
    circle.push_back(z);
    offset.push_back(z + 3.0);
  }
  CHECK(winding_number(circle) == 1);
  CHECK(winding_number(offset) == 0);
  std::vector<cplx> through = circle;
  through[5] = 0.0;
  CHECK(!winding_number(through).has_value());
}

TEST_CASE("shift property on assembled matrices") {
  const Assembler asmb(case_study_network());
  for (double f : {37.0, 203.0, 1821.0}) {
    const Eigen::MatrixXcd m = asmb(f).matrix;
    const cplx c{0.05, -0.02};
    const auto a = eig_lr(m);
    const auto b = eig_lr(m + c * Eigen::MatrixXcd::Identity(8, 8));
    for (std::size_t k = 0; k < 8; ++k) {
      const std::size_t j = match_mode(b, a.u(k));
      CHECK(std::abs(b.lambda(static_cast<Eigen::Index>(j)) - (a.lambda(static_cast<Eigen::Index>(k)) + c)) < 1e-9);
    }
  }
}

TEST_CASE("crossover verdict agrees with the winding count on random small systems") {
  std::mt19937_64 rng(2024);
  int compared = 0, unstable = 0;
  for (int i = 0; i < 12; ++i) {
    const auto sys = testsupport::random_system(rng, 1 + i % 3);
    const auto w = testsupport::det_winding(sys);
    if (!w) continue;
    const auto a = analyze(sys.source(), FrequencyGrid::linear(1.0, 20000.0, 2.0));
    CHECK(a.report.stable == (*w == 0));
    ++compared;
    unstable += *w != 0;
  }
  CHECK(compared >= 10);
  CHECK(unstable >= 1);
}
