#pragma once

#include <string>

#include "drmpc/conic.hpp"

namespace drmpc::poly {

/* H-representation { x : C x <= d }.  All operations go through support
 * function LPs; no vertex or projection machinery anywhere. */
struct HPolytope {
  Mat C;
  Vec d;

  int dim() const { return static_cast<int>(C.cols()); }
  int rows() const { return static_cast<int>(C.rows()); }
};

/* Text format: one row per line, "c1 c2 ... cn <= d".  Blank lines and lines
 * starting with '#' are skipped.  Throws std::runtime_error with a line
 * number on malformed input. */
HPolytope parse_polytope(const std::string& text);
std::string format_polytope(const HPolytope& P);

/* h_P(a) = max a'x over P.  Returns +inf when unbounded in direction a and
 * -inf when P is empty. */
double support(const HPolytope& P, const Vec& a,
               const conic::SolverSettings& settings = {});

bool contains(const HPolytope& P, const Vec& x, double tol = 1e-9);
bool is_empty(const HPolytope& P, const conic::SolverSettings& settings = {});
bool is_bounded(const HPolytope& P, const conic::SolverSettings& settings = {});
/* strict origin interiority: every d_i > 0 */
bool origin_interior(const HPolytope& P);

/* d - offsets, same rows. Throws on size mismatch. */
HPolytope tighten_rows(const HPolytope& P, const Vec& offsets);

/* Drop rows implied by the others (support LP per row, slack tolerance). */
HPolytope remove_redundancy(const HPolytope& P, double slack = 1e-9,
                            const conic::SolverSettings& settings = {});

/* Row offsets that make state-constraint rows robust to the error tube
 * e_{l+1} = Phi e_l + w.  Row l (l = 0..N) applies to the l-step-ahead
 * nominal state; rows 0 and 1 are zero, row l sums the support of W along
 * (Phi^j)' Hrow' for j = 1..l-1. */
Mat error_tube_offsets(const Mat& Phi, const HPolytope& W, const Mat& H, int N);

/* Row offsets for input rows G(K z) <= g under the same tube: row l sums
 * support of W along (K Phi^j)' Grow' for j = 0..l-1; M rows are returned
 * (l = 0..M-1). */
Mat input_tube_offsets(const Mat& Phi, const Mat& K, const HPolytope& W,
                       const Mat& G, int M);

enum class MrpiStatus { Ok, Empty, MaxIter };

struct MrpiResult {
  MrpiStatus status = MrpiStatus::Empty;
  HPolytope set;
  int iterations = 0;
};

/* Maximal robust positively invariant set for z+ = Phi z + D w, w in W,
 * subject to z in base.  Fixed point of the predecessor-set recursion with
 * per-row redundancy LPs; redundant rows removed before return. */
MrpiResult mrpi(const Mat& Phi, const Mat& D, const HPolytope& W,
                const HPolytope& base, double slack = 1e-9, int max_iter = 200,
                const conic::SolverSettings& settings = {});

/* Upper bound on the support of the minimal robust invariant set of
 * z+ = Phi z + w in direction a:  (1-alpha)^{-1} sum_{i<s} h_W((Phi^i)'a)
 * with s minimal such that Phi^s W is inside alpha W.  The true support is
 * between returned*(1-alpha) and returned. */
double minimal_rpi_support(const Mat& Phi, const HPolytope& W, const Vec& a,
                           double alpha = 0.05,
                           const conic::SolverSettings& settings = {});

}  // namespace drmpc::poly
