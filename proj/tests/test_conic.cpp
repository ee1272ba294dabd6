#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "drmpc/conic.hpp"
#include "oracles.hpp"

using namespace drmpc;
using namespace drmpc::conic;

namespace {

/* 6 rows around a box: bounded for small perturbations */
ConeProgram random_bounded_lp(oracle::SplitMix64& rng) {
  const int n = 3;
  Mat C(6, n);
  Vec d(6);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < n; ++j) {
      double noise = rng.uniform(-0.3, 0.3);
      C(i, j) = (i == j ? 1.0 : 0.0) + noise;
      C(i + 3, j) = (i == j ? -1.0 : 0.0) + rng.uniform(-0.3, 0.3);
    }
    d(i) = rng.uniform(0.5, 2.0);
    d(i + 3) = rng.uniform(0.5, 2.0);
  }
  ConeProgram prog;
  prog.q = Vec(n);
  for (int j = 0; j < n; ++j) prog.q(j) = rng.uniform(-1.0, 1.0);
  prog.A = C;
  prog.b = d;
  prog.cones = {{ConeType::NonNeg, 6}};
  return prog;
}

}  // namespace

TEST_CASE("svec round trip preserves inner products") {
  Mat A(3, 3), B(3, 3);
  A << 2, 1, 0, 1, 3, -1, 0, -1, 4;
  B << 1, 0.5, 0.25, 0.5, 2, 0, 0.25, 0, 1.5;
  Vec va = svec(A), vb = svec(B);
  CHECK(va.size() == 6);
  CHECK(va.dot(vb) == doctest::Approx((A * B).trace()).epsilon(1e-12));
  CHECK((smat(va) - A).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("1-D LP against closed form") {
  // min x subject to -1 <= x <= 3
  Mat C(2, 1);
  C << 1, -1;
  Vec d(2);
  d << 3, 1;
  Vec q(1);
  q << 1;
  auto res = solve_lp(C, d, q);
  REQUIRE(res.status == LpStatus::Optimal);
  CHECK(res.value == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK(res.x(0) == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("random bounded LPs match vertex enumeration") {
  oracle::SplitMix64 rng(42);
  for (int trial = 0; trial < 40; ++trial) {
    ConeProgram prog = random_bounded_lp(rng);
    double ref = oracle::lp_min(prog.A, prog.b, prog.q);
    REQUIRE(std::isfinite(ref));
    auto sol = solve(prog);
    REQUIRE_MESSAGE(sol.status == SolveStatus::Optimal, "trial ", trial);
    CHECK_MESSAGE(std::abs(sol.primal_objective - ref) < 1e-7, "trial ", trial,
                  " got ", sol.primal_objective, " want ", ref);
  }
}

TEST_CASE("infeasible LP is certified") {
  Mat C(2, 1);
  C << 1, -1;
  Vec d(2);
  d << -2, 1;  // x <= -2 and x >= -1
  Vec q(1);
  q << 0;
  auto res = solve_lp(C, d, q);
  CHECK(res.status == LpStatus::Infeasible);
}

TEST_CASE("unbounded LP is reported distinctly") {
  Mat C(1, 2);
  C << 1, 0;  // x0 <= 1, x1 free, objective pushes x1 down
  Vec d(1);
  d << 1;
  Vec q(2);
  q << 0, 1;
  auto res = solve_lp(C, d, q);
  CHECK(res.status == LpStatus::Unbounded);
}

TEST_CASE("analytic 2x2 semidefinite program") {
  // min t subject to [[t, 1], [1, t]] >= 0 ; optimum t = 1
  ConeProgram prog;
  prog.q = Vec::Ones(1);
  prog.A = Mat(3, 1);
  prog.A.col(0) = -svec(Mat::Identity(2, 2));
  Mat F0(2, 2);
  F0 << 0, 1, 1, 0;
  prog.b = svec(F0);
  prog.cones = {{ConeType::Psd, 2}};
  auto sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(std::abs(sol.x(0) - 1.0) < 1e-7);
}

TEST_CASE("max eigenvalue via SDP") {
  // min t s.t. tI - M >= 0 equals lambda_max(M)
  Mat M(3, 3);
  M << 4, 1, 0, 1, 3, -1, 0, -1, 2;
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  double lmax = es.eigenvalues().maxCoeff();
  ConeProgram prog;
  prog.q = Vec::Ones(1);
  prog.A = Mat(6, 1);
  prog.A.col(0) = -svec(Mat::Identity(3, 3));
  prog.b = svec(Mat(-M));
  prog.cones = {{ConeType::Psd, 3}};
  auto sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(std::abs(sol.x(0) - lmax) < 1e-7);
}

TEST_CASE("equality constrained QP against closed form") {
  // min 1/2 ||x||^2 s.t. x0 + x1 = 2 -> x = (1, 1)
  ConeProgram prog;
  prog.P = Mat::Identity(2, 2);
  prog.q = Vec::Zero(2);
  prog.A = Mat(1, 2);
  prog.A << 1, 1;
  prog.b = Vec(1);
  prog.b << 2;
  prog.cones = {{ConeType::Zero, 1}};
  auto sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK((sol.x - Vec::Ones(2)).lpNorm<Eigen::Infinity>() < 1e-7);
}

TEST_CASE("inequality QP with active constraint") {
  // min 1/2 (x - 2)^2 s.t. x <= 1 -> x = 1
  ConeProgram prog;
  prog.P = Mat::Identity(1, 1);
  prog.q = Vec(1);
  prog.q << -2;
  prog.A = Mat(1, 1);
  prog.A << 1;
  prog.b = Vec(1);
  prog.b << 1;
  prog.cones = {{ConeType::NonNeg, 1}};
  auto sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(std::abs(sol.x(0) - 1.0) < 1e-7);
  CHECK(std::abs(sol.y(0) - 1.0) < 1e-6);  // multiplier = 1
}

TEST_CASE("infeasible QP classified through the probe") {
  ConeProgram prog;
  prog.P = Mat::Identity(1, 1);
  prog.q = Vec::Zero(1);
  prog.A = Mat(2, 1);
  prog.A << 1, -1;
  prog.b = Vec(2);
  prog.b << -2, 1;
  prog.cones = {{ConeType::NonNeg, 2}};
  auto sol = solve(prog);
  CHECK(sol.status == SolveStatus::PrimalInfeasible);
}

TEST_CASE("mixed cones: QP with equality and inequality rows") {
  // min 1/2||x||^2 - x0 s.t. x0 + x1 = 1, x1 >= 0.75  -> x = (0.25, 0.75)
  ConeProgram prog;
  prog.P = Mat::Identity(2, 2);
  prog.q = Vec(2);
  prog.q << -1, 0;
  prog.A = Mat(2, 2);
  prog.A << 1, 1, 0, -1;
  prog.b = Vec(2);
  prog.b << 1, -0.75;
  prog.cones = {{ConeType::Zero, 1}, {ConeType::NonNeg, 1}};
  auto sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(std::abs(sol.x(0) - 0.25) < 1e-7);
  CHECK(std::abs(sol.x(1) - 0.75) < 1e-7);
}

TEST_CASE("optimal solutions satisfy cone membership and duality") {
  oracle::SplitMix64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    ConeProgram prog = random_bounded_lp(rng);
    auto sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.s.minCoeff() > -1e-7);
    CHECK(sol.y.minCoeff() > -1e-7);
    CHECK(sol.primal_residual <= 1e-8);
    CHECK(sol.dual_residual <= 1e-8);
    CHECK(std::abs(sol.primal_objective - sol.dual_objective) <
          1e-6 * std::max(1.0, std::abs(sol.primal_objective)));
  }
}

TEST_CASE("PSD dual block has nonnegative eigenvalues at optimum") {
  Mat M(2, 2);
  M << 2, 0.5, 0.5, 1;
  ConeProgram prog;
  prog.q = Vec::Ones(1);
  prog.A = Mat(3, 1);
  prog.A.col(0) = -svec(Mat::Identity(2, 2));
  prog.b = svec(Mat(-M));
  prog.cones = {{ConeType::Psd, 2}};
  auto sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  Eigen::SelfAdjointEigenSolver<Mat> es(smat(sol.y));
  CHECK(es.eigenvalues().minCoeff() > -1e-7);
  Eigen::SelfAdjointEigenSolver<Mat> es2(smat(sol.s));
  CHECK(es2.eigenvalues().minCoeff() > -1e-7);
}

TEST_CASE("deterministic: identical inputs give bitwise identical output") {
  oracle::SplitMix64 rng(99);
  ConeProgram prog = random_bounded_lp(rng);
  auto a = solve(prog);
  auto b = solve(prog);
  REQUIRE(a.status == b.status);
  REQUIRE(a.x.size() == b.x.size());
  for (int i = 0; i < a.x.size(); ++i) CHECK(a.x(i) == b.x(i));
  CHECK(a.primal_objective == b.primal_objective);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("objective scaling leaves argmin unchanged") {
  oracle::SplitMix64 rng(123);
  ConeProgram prog = random_bounded_lp(rng);
  auto a = solve(prog);
  ConeProgram scaled = prog;
  scaled.q *= 37.0;
  auto b = solve(scaled);
  REQUIRE(a.status == SolveStatus::Optimal);
  REQUIRE(b.status == SolveStatus::Optimal);
  CHECK((a.x - b.x).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("validate rejects malformed programs") {
  ConeProgram prog;
  prog.q = Vec::Ones(2);
  prog.A = Mat::Ones(1, 2);
  prog.b = Vec::Ones(2);  // mismatch
  prog.cones = {{ConeType::NonNeg, 1}};
  CHECK_THROWS_AS(prog.validate(), std::invalid_argument);

  ConeProgram bad_p;
  bad_p.q = Vec::Ones(1);
  bad_p.P = -Mat::Identity(1, 1);
  bad_p.A = Mat::Ones(1, 1);
  bad_p.b = Vec::Ones(1);
  bad_p.cones = {{ConeType::NonNeg, 1}};
  CHECK_THROWS_AS(bad_p.validate(), std::invalid_argument);
}

TEST_CASE("program serialization round-trips exactly") {
  oracle::SplitMix64 rng(5);
  ConeProgram prog = random_bounded_lp(rng);
  prog.P = Mat::Identity(3, 3) * 0.123456789123456789;
  prog.cones.push_back({ConeType::Zero, 0});
  std::string text = serialize_program(prog);
  ConeProgram back = parse_program(text);
  REQUIRE(back.q.size() == prog.q.size());
  CHECK((back.A - prog.A).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.b - prog.b).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.q - prog.q).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.P - prog.P).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.cones.size() == prog.cones.size());
  for (size_t i = 0; i < prog.cones.size(); ++i) {
    CHECK(back.cones[i].type == prog.cones[i].type);
    CHECK(back.cones[i].dim == prog.cones[i].dim);
  }
}

TEST_CASE("QP with PSD block: projection onto the PSD cone") {
  // min 1/2 || X - M ||_F^2 over X >= 0 (svec variables, P = I)
  Mat M(2, 2);
  M << 1, 2, 2, -3;
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  Mat proj = Mat::Zero(2, 2);
  for (int i = 0; i < 2; ++i) {
    double lam = std::max(0.0, es.eigenvalues()(i));
    proj += lam * es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose();
  }
  ConeProgram prog;
  const int sv = svec_len(2);
  prog.P = Mat::Identity(sv, sv);
  prog.q = -svec(M);
  prog.A = -Mat::Identity(sv, sv);
  prog.b = Vec::Zero(sv);
  prog.cones = {{ConeType::Psd, 2}};
  auto sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK((smat(sol.x) - proj).cwiseAbs().maxCoeff() < 1e-6);
}
