#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "drmpc/polytope.hpp"
#include "oracles.hpp"

using namespace drmpc;
using namespace drmpc::poly;

namespace {

HPolytope box(int n, double r) {
  HPolytope P;
  P.C = Mat(2 * n, n);
  P.C << Mat::Identity(n, n), -Mat::Identity(n, n);
  P.d = Vec::Constant(2 * n, r);
  return P;
}

/* closed-loop matrices printed for the double-integrator example */
Mat phi_51() {
  Mat Phi(2, 2);
  Phi << 0.6696, 0.3370, -0.6609, -0.3261;
  return Phi;
}

Mat k_51() {
  Mat K(1, 2);
  K << -0.6609, -1.3261;
  return K;
}

}  // namespace

TEST_CASE("text format round trips") {
  HPolytope P = box(2, 0.6);
  std::string text = format_polytope(P);
  HPolytope Q = parse_polytope(text);
  CHECK((P.C - Q.C).cwiseAbs().maxCoeff() == 0.0);
  CHECK((P.d - Q.d).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("parser reports line numbers") {
  CHECK_THROWS_WITH_AS(parse_polytope("1 0 <= 1\n0 1 1\n"),
                       doctest::Contains("line 2"), std::runtime_error);
  CHECK_THROWS_AS(parse_polytope("1 zz <= 1\n"), std::runtime_error);
  CHECK_THROWS_AS(parse_polytope("# only a comment\n"), std::runtime_error);
}

TEST_CASE("box support equals scaled one-norm") {
  HPolytope W = box(2, 0.6);
  Vec a(2);
  a << 3, -4;
  CHECK(support(W, a) == doctest::Approx(0.6 * 7.0).epsilon(1e-7));
  CHECK(support(W, Vec::Zero(2)) == doctest::Approx(0.0));
}

TEST_CASE("support matches vertex enumeration on random polytopes") {
  oracle::SplitMix64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Mat C(6, 2);
    Vec d(6);
    for (int i = 0; i < 6; ++i) {
      double th = 2.0 * M_PI * (i + rng.uniform(0.0, 0.5)) / 6.0;
      C(i, 0) = std::cos(th);
      C(i, 1) = std::sin(th);
      d(i) = rng.uniform(0.5, 2.0);
    }
    HPolytope P{C, d};
    Vec a(2);
    a << rng.uniform(-1, 1), rng.uniform(-1, 1);
    double ref = oracle::support(C, d, a);
    CHECK(support(P, a) == doctest::Approx(ref).epsilon(1e-7));
  }
}

TEST_CASE("support signals unbounded and empty") {
  Mat C(1, 2);
  C << 1, 0;
  Vec d(1);
  d << 1;
  HPolytope halfspace{C, d};
  Vec a(2);
  a << 0, 1;
  CHECK(std::isinf(support(halfspace, a)));

  Mat C2(2, 1);
  C2 << 1, -1;
  Vec d2(2);
  d2 << -2, 1;
  HPolytope empty{C2, d2};
  CHECK(support(empty, Vec::Ones(1)) == -std::numeric_limits<double>::infinity());
  CHECK(is_empty(empty));
  CHECK_FALSE(is_empty(halfspace));
}

TEST_CASE("contains respects the tolerance") {
  HPolytope W = box(2, 1.0);
  Vec x(2);
  x << 1.0 + 5e-10, 0.0;
  CHECK(contains(W, x));
  x(0) = 1.0 + 1e-8;
  CHECK_FALSE(contains(W, x));
  CHECK(contains(W, x, 1e-7));
}

TEST_CASE("boundedness and origin interiority") {
  CHECK(is_bounded(box(2, 1.0)));
  Mat C(1, 2);
  C << 1, 0;
  Vec d(1);
  d << 1;
  CHECK_FALSE(is_bounded({C, d}));
  CHECK(origin_interior(box(2, 0.1)));
  HPolytope shifted = box(1, 1.0);
  shifted.d(0) = -0.5;
  CHECK_FALSE(origin_interior(shifted));
}

TEST_CASE("tighten_rows subtracts offsets rowwise") {
  HPolytope W = box(2, 1.0);
  Vec off(4);
  off << 0.1, 0.2, 0.3, 0.4;
  HPolytope T = tighten_rows(W, off);
  CHECK(T.d(0) == doctest::Approx(0.9));
  CHECK(T.d(3) == doctest::Approx(0.6));
  CHECK_THROWS_AS(tighten_rows(W, Vec::Ones(3)), std::invalid_argument);
}

TEST_CASE("redundant rows are removed") {
  HPolytope P = box(2, 1.0);
  Mat C(5, 2);
  C << P.C, Mat::Ones(1, 2);  // x0 + x1 <= 5 is implied
  Vec d(5);
  d << P.d, 5.0;
  HPolytope R = remove_redundancy({C, d});
  CHECK(R.rows() == 4);
  // sampled equivalence
  oracle::SplitMix64 rng(3);
  for (int i = 0; i < 200; ++i) {
    Vec x(2);
    x << rng.uniform(-2, 2), rng.uniform(-2, 2);
    CHECK(contains({C, d}, x) == contains(R, x));
  }
}

TEST_CASE("error tube offsets: printed closed-loop values") {
  HPolytope W = box(2, 0.6);
  Mat H(1, 2);
  H << 0, 1;
  Mat zeta = error_tube_offsets(phi_51(), W, H, 9);
  REQUIRE(zeta.rows() == 10);
  CHECK(zeta(0, 0) == 0.0);
  CHECK(zeta(1, 0) == 0.0);
  CHECK(zeta(2, 0) == doctest::Approx(0.6 * (0.6609 + 0.3261)).epsilon(1e-6));
  // monotone accumulation
  for (int l = 1; l < 9; ++l) CHECK(zeta(l + 1, 0) >= zeta(l, 0) - 1e-12);
}

TEST_CASE("error tube offsets dominate sampled error trajectories") {
  HPolytope W = box(2, 0.6);
  Mat H(1, 2);
  H << 0, 1;
  Mat Phi = phi_51();
  const int N = 6;
  Mat zeta = error_tube_offsets(Phi, W, H, N);
  oracle::SplitMix64 rng(17);
  for (int run = 0; run < 300; ++run) {
    Vec e = Vec::Zero(2);
    for (int l = 1; l <= N; ++l) {
      Vec w(2);
      w << rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6);
      e = Phi * e + w;
      // x_{l} = z_l + e_l with e_l = Phi e_{l-1} + w; the row offset for the
      // l-step constraint covers Phi * e_{l-1}, the one-step disturbance is
      // handled by the risk term, so check H(e_l - w) <= zeta_l.
      CHECK((H * (e - w))(0) <= zeta(l, 0) + 1e-9);
    }
  }
}

TEST_CASE("error tube offsets prefix-stable in the horizon") {
  HPolytope W = box(2, 0.6);
  Mat H(2, 2);
  H << 0, 1, 1, 0;
  Mat z9 = error_tube_offsets(phi_51(), W, H, 9);
  Mat z5 = error_tube_offsets(phi_51(), W, H, 5);
  CHECK((z9.topRows(6) - z5).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("input tube offsets: printed gain values") {
  HPolytope W = box(2, 0.6);
  Mat G(2, 1);
  G << 1, -1;
  Mat delta = input_tube_offsets(phi_51(), k_51(), W, G, 10);
  REQUIRE(delta.rows() == 10);
  CHECK(delta(0, 0) == 0.0);
  CHECK(delta(1, 0) == doctest::Approx(0.6 * (0.6609 + 1.3261)).epsilon(1e-7));
  CHECK(delta(1, 1) == doctest::Approx(0.6 * (0.6609 + 1.3261)).epsilon(1e-7));
  for (int l = 0; l + 1 < 10; ++l) CHECK(delta(l + 1, 0) >= delta(l, 0) - 1e-12);
}

TEST_CASE("mrpi: contractive scalar example stops immediately") {
  Mat Phi(1, 1), D(1, 1);
  Phi << 0.5;
  D << 0.1;
  HPolytope W = box(1, 1.0);
  HPolytope base = box(1, 1.0);
  auto res = mrpi(Phi, D, W, base);
  REQUIRE(res.status == MrpiStatus::Ok);
  CHECK(res.set.rows() == 2);
  CHECK(support(res.set, Vec::Ones(1)) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("mrpi: zero dynamics returns the base without redundant rows") {
  Mat Z = Mat::Zero(2, 2);
  HPolytope W = box(2, 1.0);
  Mat C(5, 2);
  C << Mat::Identity(2, 2), -Mat::Identity(2, 2), Mat::Ones(1, 2);
  Vec d(5);
  d << 1, 1, 1, 1, 10;
  auto res = mrpi(Z, Z, W, {C, d});
  REQUIRE(res.status == MrpiStatus::Ok);
  CHECK(res.set.rows() == 4);
}

TEST_CASE("mrpi: empty base reported") {
  Mat Phi(1, 1), D(1, 1);
  Phi << 0.5;
  D << 0.1;
  Mat C(2, 1);
  C << 1, -1;
  Vec d(2);
  d << -2, 1;
  auto res = mrpi(Phi, D, box(1, 1.0), {C, d});
  CHECK(res.status == MrpiStatus::Empty);
}

TEST_CASE("mrpi terminal set is robustly invariant (sampled)") {
  Mat Phi = phi_51();
  Mat PhiN = Phi;
  for (int i = 1; i < 9; ++i) PhiN = PhiN * Phi;
  HPolytope W = box(2, 0.6);
  // base: one state row plus input rows through the gain
  Mat K = k_51();
  Mat C(3, 2);
  C.row(0) << 0, 1;
  C.row(1) = K.row(0);
  C.row(2) = -K.row(0);
  Vec d(3);
  d << 1.0, 5.0, 5.0;
  auto res = mrpi(Phi, PhiN, W, {C, d});
  REQUIRE(res.status == MrpiStatus::Ok);
  REQUIRE_FALSE(is_empty(res.set));
  // sample inside a bounding box, keep members, push forward
  Vec hi(2), lo(2);
  for (int j = 0; j < 2; ++j) {
    Vec a = Vec::Zero(2);
    a(j) = 1;
    hi(j) = support(res.set, a);
    a(j) = -1;
    lo(j) = -support(res.set, a);
  }
  oracle::SplitMix64 rng(29);
  int checked = 0;
  for (int it = 0; it < 4000 && checked < 500; ++it) {
    Vec z(2);
    z << rng.uniform(lo(0), hi(0)), rng.uniform(lo(1), hi(1));
    if (!contains(res.set, z)) continue;
    ++checked;
    for (int corner = 0; corner < 4; ++corner) {
      Vec w(2);
      w << (corner & 1 ? 0.6 : -0.6), (corner & 2 ? 0.6 : -0.6);
      CHECK(contains(res.set, Phi * z + PhiN * w, 1e-9));
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("minimal rpi support: scalar geometric series") {
  Mat Phi(1, 1);
  Phi << 0.5;
  HPolytope W = box(1, 1.0);
  double h = minimal_rpi_support(Phi, W, Vec::Ones(1), 0.05);
  // s = 5 since 0.5^5 <= 0.05; sum = 1.9375, divided by 0.95
  CHECK(h == doctest::Approx(1.9375 / 0.95).epsilon(1e-7));
  // sandwich: true support is 2
  CHECK(h >= 2.0 - 1e-9);
  CHECK(h <= 2.0 / 0.95 + 1e-9);
}

TEST_CASE("minimal rpi support: zero dynamics reduces to one term") {
  Mat Phi = Mat::Zero(2, 2);
  HPolytope W = box(2, 0.6);
  Vec a(2);
  a << 1, 1;
  double h = minimal_rpi_support(Phi, W, a, 0.05);
  CHECK(h == doctest::Approx(1.2 / 0.95).epsilon(1e-7));
}

TEST_CASE("minimal rpi support dominates sampled accumulated disturbances") {
  Mat Phi = phi_51();
  HPolytope W = box(2, 0.6);
  oracle::SplitMix64 rng(31);
  for (int dir = 0; dir < 8; ++dir) {
    double th = 2.0 * M_PI * dir / 8.0;
    Vec a(2);
    a << std::cos(th), std::sin(th);
    double bound = minimal_rpi_support(Phi, W, a);
    double worst = 0.0;
    for (int run = 0; run < 200; ++run) {
      Vec e = Vec::Zero(2);
      for (int l = 0; l < 60; ++l) {
        Vec w(2);
        w << rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6);
        e = Phi * e + w;
      }
      worst = std::max(worst, a.dot(e));
    }
    CHECK(worst <= bound + 1e-9);
  }
}
