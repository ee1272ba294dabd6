#pragma once

#include <drmpc/conic.hpp>
#include <drmpc/dpmm.hpp>
#include <drmpc/polytope.hpp>

#include <stdexcept>
#include <vector>

namespace drmpc::tightening {

// Mixture moment description over a bounded polyhedral support with the
// origin interior; each component mean must lie inside the support.
struct AmbiguitySet {
  poly::HPolytope W;
  dpmm::MixtureEstimate mix;

  int dim() const { return W.dim(); }
  void validate() const;
};

struct RowResult {
  double eta = 0.0;        // clamped at 0
  double raw = 0.0;        // SDP optimum before clamping
  conic::SolveStatus status = conic::SolveStatus::Optimal;
  bool fallback = false;   // true when the support bound was substituted
};

struct TighteningResult {
  Vec eta;
  std::vector<RowResult> rows;
};

struct InfeasibleMoments : std::runtime_error {
  explicit InfeasibleMoments(const std::string& msg) : std::runtime_error(msg) {}
};

// Dual program of the worst-case CVaR constraint for one state-constraint
// row: minimize eta over (eta, beta, {t_j, omega_j, Omega_j, phi1_j, phi2_j})
// subject to the weighted scalar moment row and, per component, the two
// support LMIs and Omega_j >= 0. Risk levels in (0, 1]; level 1 is the
// expectation case. With beta_nonneg the printed beta >= 0 variant is built.
conic::ConeProgram build_sdp(const AmbiguitySet& amb, const Vec& Hrow,
                             double eps, bool beta_nonneg = false);

// Per-row tightening offsets. Rows are independent; on solver failure the
// row falls back to the support bound worst_case_eta and is flagged.
TighteningResult solve_eta(const AmbiguitySet& amb, const Mat& H,
                           const Vec& eps,
                           const conic::SolverSettings& settings = {},
                           bool beta_nonneg = false);

// eta0_i = support(W, [H]_i'): the row offset that makes the constraint
// robust against every distribution supported on W.
Vec worst_case_eta(const poly::HPolytope& W, const Mat& H,
                   const conic::SolverSettings& settings = {});

// Brute-force ground truth (n <= 2): discretizes W into grid atoms, solves
// the per-component worst-case expectation by column generation over the
// atoms, minimizes over beta by golden section on [-eta0-1, eta0+1], and
// bisects for the least eta with sup-CVaR <= 0 to 1e-4. Unclamped.
double wc_cvar_oracle(const AmbiguitySet& amb, const Vec& Hrow, double eps,
                      int grid_density = 241);

}  // namespace drmpc::tightening
