#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dampplan/error.hpp"
#include "dampplan/network.hpp"
#include "dampplan/network_io.hpp"
#include "dampplan/stability.hpp"

using namespace dampplan;

namespace {

constexpr double w0 = 2.0 * std::numbers::pi * 50.0;

bool has_diag(const std::vector<std::string>& d, const std::string& needle) {
  for (const auto& s : d)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

NetworkGraph two_node() {
  NetworkGraph g;
  g.nodes = {1, 2};
  g.branches = {{BranchKind::Rl, 1, 2, 0.1, 1e-3}};
  g.shunts = {{1, CapacitorParams{20e-6}}, {2, GridParams{0.05, 0.5e-3}}};
  return g;
}

// 2x2 inverse written out entrywise
void inv2(cplx a, cplx b, cplx c, cplx d, cplx out[4]) {
  const cplx det = a * d - b * c;
  out[0] = d / det;
  out[1] = -b / det;
  out[2] = -c / det;
  out[3] = a / det;
}

}  // namespace

TEST_CASE("validation") {
  NetworkGraph single;
  single.nodes = {1};
  single.shunts = {{1, InverterDevice{InverterParams{}, {}}}};
  CHECK(validate(single).empty());

  NetworkGraph empty;
  CHECK(has_diag(validate(empty), "no nodes"));

  NetworkGraph g = case_study_network();
  CHECK(validate(g).empty());
  g.branches.push_back({BranchKind::Rl, 4, 9, 0.1, 1e-3});
  CHECK(has_diag(validate(g), "branch 4 (rl 4-9) references unknown node 9"));

  NetworkGraph split;
  split.nodes = {1, 2, 3, 4};
  split.branches = {{BranchKind::Rl, 1, 2, 0.1, 1e-3}, {BranchKind::Rl, 3, 4, 0.1, 1e-3}};
  CHECK(has_diag(validate(split), "not connected"));

  NetworkGraph dup = single;
  dup.nodes = {1, 1};
  CHECK(has_diag(validate(dup), "duplicate node id 1"));

  NetworkGraph loop = two_node();
  loop.branches.push_back({BranchKind::Rl, 2, 2, 0.1, 0.0});
  CHECK(has_diag(validate(loop), "itself"));

  NetworkGraph zero = two_node();
  zero.branches[0].r_ohm = zero.branches[0].l_h = 0.0;
  CHECK(has_diag(validate(zero), "R = L = 0"));

  NetworkGraph cable = two_node();
  cable.branches[0].kind = BranchKind::PiCable;
  CHECK(has_diag(validate(cable), "needs C > 0"));

  NetworkGraph two_ad = two_node();
  two_ad.shunts.push_back({2, ADParams{}});
  CHECK(validate(two_ad).empty());
  two_ad.shunts.push_back({2, ADParams{}});
  CHECK(has_diag(validate(two_ad), "more than one AD"));
  try {
    require_valid(two_ad);
    FAIL("invalid graph accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Validation);
  }
}

TEST_CASE("stamping patterns") {
  SUBCASE("single node equals its shunt") {
    NetworkGraph g;
    g.nodes = {7};
    g.shunts = {{7, CapacitorParams{10e-6}}};
    const auto a = assemble(g, 300.0);
    CHECK(a.block(0, 0) == capacitor_dq(10e-6, 300.0, w0));
  }
  SUBCASE("two nodes joined by a branch") {
    NetworkGraph g;
    g.nodes = {1, 2};
    g.branches = {{BranchKind::Rl, 1, 2, 0.1, 1e-3}};
    g.shunts = {{1, CapacitorParams{20e-6}}};
    const double f = 450.0;
    const auto a = assemble(g, f);
    const DqBlock yb = block_inverse(rl_series_dq({0.1, 1e-3}, f, w0));
    const DqBlock ys = capacitor_dq(20e-6, f, w0);
    CHECK(((a.block(0, 0) - (ys + yb)).max_abs()) < 1e-12);
    CHECK(((a.block(0, 1) + yb).max_abs()) < 1e-12);
    CHECK(((a.block(1, 0) + yb).max_abs()) < 1e-12);
    CHECK(((a.block(1, 1) - yb).max_abs()) < 1e-12);
  }
  SUBCASE("transformer and cable referral") {
    NetworkGraph g;
    g.nodes = {1, 2};
    g.branches = {{BranchKind::PiCable, 1, 2, 0.2, 0.3e-3, 12e-6, 25.0}};
    const double f = 800.0;
    const auto a = assemble(g, f);
    const DqBlock yb = block_inverse(rl_series_dq({0.2 / 625.0, 0.3e-3 / 625.0}, f, w0));
    const DqBlock ye = capacitor_dq(6e-6 * 625.0, f, w0);
    CHECK(((a.block(0, 0) - (yb + ye)).max_abs()) < 1e-9 * yb.max_abs());
  }
}

TEST_CASE("fixture entry against hand stamping") {
  const NetworkGraph g = case_study_network();
  const double f = 203.0;
  const auto a = assemble(g, f);
  REQUIRE(a.matrix.rows() == 8);

  const double w = 2.0 * std::numbers::pi * f;
  cplx zinv[4];
  // grid cable referred by 25^2
  const double rg = 0.2 / 625.0, lg = 0.3e-3 / 625.0, cg = 0.5 * 12e-6 * 625.0;
  inv2({rg, w * lg}, -w0 * lg, w0 * lg, {rg, w * lg}, zinv);
  cplx y11 = zinv[0] + cplx{0.0, w * cg};
  inv2({0.0032, w * 0.0764e-3}, -w0 * 0.0764e-3, w0 * 0.0764e-3, {0.0032, w * 0.0764e-3}, zinv);
  y11 += zinv[0];
  CHECK(std::abs(a.matrix(0, 0) - y11) <= 1e-12 * std::abs(y11));
}

TEST_CASE("shunt addition") {
  const NetworkGraph g = case_study_network();
  const auto a = assemble(g, 500.0);
  CHECK(with_shunt(a, 3, DqBlock::zero()).matrix == a.matrix);

  const DqBlock yad = ad_admittance(ADParams{}, 500.0, w0);
  const auto b = with_shunt(a, 4, yad);
  const Eigen::MatrixXcd diff = b.matrix - a.matrix;
  for (Eigen::Index r = 0; r < 8; ++r)
    for (Eigen::Index c = 0; c < 8; ++c) {
      const bool touched = (r == 6 && c == 6) || (r == 7 && c == 7);
      if (!touched) CHECK(diff(r, c) == cplx{0.0});
    }
  CHECK(std::abs(diff(6, 6) - yad.dd) < 1e-14);
  CHECK(std::abs(diff(7, 7) - yad.qq) < 1e-14);
  CHECK_THROWS_AS(with_shunt(a, 42, yad), Error);

  NetworkGraph one;
  one.nodes = {1};
  one.shunts = {{1, CapacitorParams{15e-6}}};
  const auto m = assemble(one, 120.0);
  const auto shifted = with_shunt(m, 1, DqBlock::scalar(0.25));
  const auto e0 = eig_lr(m.matrix), e1 = eig_lr(shifted.matrix);
  for (Eigen::Index k = 0; k < 2; ++k) {
    double best = 1e300;
    for (Eigen::Index j = 0; j < 2; ++j) best = std::min(best, std::abs(e1.lambda(j) - (e0.lambda(k) + 0.25)));
    CHECK(best < 1e-12);
  }
}

TEST_CASE("stamping linearity and decomposition") {
  NetworkGraph g = two_node();
  NetworkGraph g2 = g;
  g2.shunts.push_back({1, CapacitorParams{5e-6}});
  for (double f : {50.0, 700.0}) {
    const auto single = assemble(g, f);
    const auto both = assemble(g2, f);
    const auto added = with_shunt(single, 1, capacitor_dq(5e-6, f, w0));
    CHECK((both.matrix - added.matrix).norm() < 1e-12 * both.matrix.norm());
  }

  const Assembler asmb(case_study_network());
  for (double f : {20.0, 203.0, 1900.0}) {
    const auto parts = asmb.parts(f);
    CHECK((parts.network + parts.devices - asmb(f).matrix).norm() == 0.0);
  }
}

TEST_CASE("passive block symmetry at every frequency") {
  const Assembler asmb(case_study_network());
  for (double f = 10.0; f <= 2500.0; f += 7.0) {
    const Eigen::MatrixXcd y = asmb.parts(f).network;
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index j = 0; j < 4; ++j)
        for (int r = 0; r < 2; ++r)
          for (int c = 0; c < 2; ++c) CHECK(y(2 * i + r, 2 * j + c) == y(2 * j + r, 2 * i + c));
  }
}

TEST_CASE("DC short guard on inductive branches") {
  const Branch b{BranchKind::Rl, 1, 2, 0.0, 1e-3};
  try {
    branch_series_admittance(b, 0.0, 0.0);
    FAIL("DC short accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularBranch);
  }
  CHECK_THROWS_AS(assemble(two_node(), 0.0), Error);
}

TEST_CASE("tabulated inverter device") {
  InverterParams p;
  std::vector<AdmittanceRow> rows;
  for (double f = 5.0; f <= 3000.0; f *= 1.002) rows.push_back({f, inverter_admittance(p, f, w0)});
  NetworkGraph g = case_study_network();
  NetworkGraph gt = g;
  for (auto& s : gt.shunts)
    if (s.kind() == ShuntKind::Inverter)
      s.device = InverterDevice{std::make_shared<const AdmittanceTable>(rows), "inline"};
  const auto a = assemble(g, 400.0), b = assemble(gt, 400.0);
  CHECK((a.matrix - b.matrix).norm() < 1e-3 * a.matrix.norm());
  CHECK_THROWS_AS(assemble(gt, 4000.0), Error);
}
