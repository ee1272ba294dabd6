#pragma once

#include <drmpc/conic.hpp>
#include <drmpc/polytope.hpp>
#include <drmpc/regulator.hpp>
#include <drmpc/tightening.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace drmpc::mpc {

// Terminal-set policy: recompute the maximal robust invariant set after each
// accepted ambiguity update, or reuse one conservative set built offline from
// the support-level tightening (valid for every later update, cheaper for
// larger state dimensions).
enum class TerminalMode { OnlineMrpi, OfflineFallback };

TerminalMode default_terminal_mode(int state_dim);

struct MpcConfig {
  regulator::Plant plant;
  regulator::Regulator reg;
  int N = 1;
  poly::HPolytope X;  // risk-tightened state rows H x <= h
  Vec eps;            // risk level per row of X, each in (0, 1)
  poly::HPolytope U;  // hard input constraints G u <= g
  poly::HPolytope W;  // disturbance support E w <= f
  TerminalMode terminal_mode = TerminalMode::OnlineMrpi;
  poly::HPolytope offline_Zf;  // required when terminal_mode is OfflineFallback

  void validate() const;
};

struct TightenedSets {
  Vec eta;                         // committed tightening, one entry per X row
  Mat zeta;                        // (N+1) x p robust tube offsets
  std::vector<poly::HPolytope> Z;  // stage sets Z_1..Z_N
  std::vector<poly::HPolytope> V;  // input sets V_0..V_{N-1}
  poly::HPolytope Zf;
  int epoch = 0;  // time index at which the sets were certified
};

struct MpcSolution {
  conic::SolveStatus status = conic::SolveStatus::Numerical;
  Vec c;  // stacked perturbation sequence c_0..c_{N-1}
  Mat z;  // nominal trajectory, n x (N+1)
  Mat v;  // nominal inputs v_l = K z_l + c_l, m x N
  double J = 0.0;
};

struct Candidate {
  Vec c_tilde;  // previous solution shifted one step, zero-padded
  Mat z_tilde;  // trajectory re-rolled from the new measurement, n x (N+1)
};

struct UpdateDecision {
  int flag = 0;  // 1 when the fresh sets were adopted
  TightenedSets active;
};

struct EmptyTerminalSet : std::runtime_error {
  explicit EmptyTerminalSet(const std::string& msg) : std::runtime_error(msg) {}
};
struct EmptyStageSet : std::runtime_error {
  EmptyStageSet(int stage_, const std::string& msg)
      : std::runtime_error(msg), stage(stage_) {}
  int stage;
};
struct Infeasible : std::runtime_error {
  explicit Infeasible(const std::string& msg) : std::runtime_error(msg) {}
};
struct SolverFailed : std::runtime_error {
  explicit SolverFailed(const std::string& msg) : std::runtime_error(msg) {}
};

// Conservative terminal set: maximal robust invariant set of
// z+ = Phi z + Phi^N w under the support-level tightening eta0. Robust
// invariant (not maximal) for every admissible tightening eta <= eta0, so it
// can be computed once and reused.
poly::HPolytope offline_terminal_set(const MpcConfig& cfg,
                                     const conic::SolverSettings& settings = {});

// Stage, input, and terminal sets for a committed tightening vector.
// Each set is certified nonempty with one feasibility LP.
TightenedSets build_sets(const MpcConfig& cfg, const Vec& eta, int epoch = 0,
                         const conic::SolverSettings& settings = {});

// Finite-horizon problem with states eliminated: minimize sum_l c_l' PsiTilde
// c_l over the stacked c subject to z_l in Z_l, v_l in V_l, z_N in Zf, where
// z_l = Phi^l x + sum_{j<l} Phi^{l-1-j} B c_j.
MpcSolution solve_ocp(const MpcConfig& cfg, const TightenedSets& sets,
                      const Vec& x, const conic::SolverSettings& settings = {});

// Shifted previous solution padded with zero, re-rolled from the measured
// state: z~_l = z*_{l+1} + Phi^l w for the realized disturbance w.
Candidate candidate(const MpcSolution& prev, const Vec& x_new,
                    const MpcConfig& cfg);

// Adopt the fresh sets only when the shifted candidate remains feasible for
// them; otherwise keep the held sets unchanged.
UpdateDecision safe_update(const Candidate& cand, const TightenedSets& fresh,
                           const TightenedSets& held, double tol = 1e-9);

// u = v*_0 = K x + c*_0.
Vec control_input(const MpcSolution& sol);

}  // namespace drmpc::mpc
