#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace drmpc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace conic {

/* Cone types for the rows of A x + s = b.  Zero pins s = 0 (equality rows),
 * NonNeg is the nonnegative orthant, Psd is the cone of symmetric positive
 * semidefinite matrices of a given order, stored in packed form. */
enum class ConeType { Zero, NonNeg, Psd };

struct ConeBlock {
  ConeType type = ConeType::NonNeg;
  int dim = 0;  // vector length for Zero/NonNeg, matrix order for Psd

  /* Number of rows this block occupies in A. */
  int rows() const { return type == ConeType::Psd ? dim * (dim + 1) / 2 : dim; }
};

/* svec packing: column-major lower triangle, off-diagonal entries scaled by
 * sqrt(2) so that svec(A) . svec(B) = trace(A B) for symmetric A, B. */
int svec_len(int order);
Vec svec(const Mat& M);
Mat smat(const Vec& v);

enum class SolveStatus { Optimal, PrimalInfeasible, DualInfeasible, MaxIter, Numerical };

std::string to_string(SolveStatus s);

/* minimize 1/2 x'Px + q'x  subject to  A x + s = b,  s in K,
 * where K is the product of the listed cone blocks in row order. */
struct ConeProgram {
  Mat P;  // n x n PSD (may be 0 x 0 for none)
  Vec q;
  Mat A;
  Vec b;
  std::vector<ConeBlock> cones;

  int n_vars() const { return static_cast<int>(q.size()); }
  int n_rows() const { return static_cast<int>(b.size()); }
  bool has_quadratic() const;
  /* Throws std::invalid_argument on dimension mismatch, non-symmetric or
   * indefinite P, or non-finite entries. */
  void validate() const;
};

struct ConeSolution {
  SolveStatus status = SolveStatus::Numerical;
  Vec x;
  Vec y;  // dual for A x + s = b
  Vec s;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;
};

struct SolverSettings {
  double tol_feas = 1e-8;
  double tol_gap = 1e-8;
  int max_iter = 200;
  double static_reg = 1e-9;
};

ConeSolution solve(const ConeProgram& prog, const SolverSettings& settings = {});

enum class LpStatus { Optimal, Infeasible, Unbounded, Error };

struct LpResult {
  LpStatus status = LpStatus::Error;
  double value = 0.0;
  Vec x;
};

/* minimize q'x subject to C x <= d. */
LpResult solve_lp(const Mat& C, const Vec& d, const Vec& q,
                  const SolverSettings& settings = {});

/* JSON serialization; doubles round-trip exactly. */
std::string serialize_program(const ConeProgram& prog);
ConeProgram parse_program(const std::string& text);

}  // namespace conic
}  // namespace drmpc
