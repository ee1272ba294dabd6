#pragma once

#include <drmpc/dpmm.hpp>
#include <drmpc/mpc.hpp>
#include <drmpc/tightening.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace drmpc::sim {

// SplitMix64. One independent stream per run so results do not depend on
// thread scheduling.
struct Rng {
  std::uint64_t state = 0x9E3779B97F4A7C15ull;
  std::uint64_t next();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);
};

// Stream seed for run `run` derived from the scenario seed.
Rng run_stream(std::uint64_t seed, int run);

double norm_cdf(double z);
// Inverse standard normal CDF (rational approximation plus one Halley
// refinement; accurate to ~1e-15 on (0, 1)).
double norm_ppf(double p);

struct MixtureComponent {
  double weight = 1.0;
  Vec mu;
  Vec sigma;                              // per-dimension standard deviations
};

struct DisturbanceSpec {
  std::vector<MixtureComponent> comps;
  void validate(int n) const;
};

struct UnsupportedSupport : std::runtime_error {
  explicit UnsupportedSupport(const std::string& what) : std::runtime_error(what) {}
};
struct TooFewSamples : std::runtime_error {
  explicit TooFewSamples(const std::string& what) : std::runtime_error(what) {}
};
struct InitialInfeasible : std::runtime_error {
  explicit InitialInfeasible(const std::string& what) : std::runtime_error(what) {}
};

// Draws one disturbance from the truncated mixture. Axis-aligned box supports
// use per-dimension inverse-CDF sampling; other polytopes fall back to
// rejection from the bounding box (UnsupportedSupport after 1e5 rejects).
// The returned point satisfies W.C * w <= W.d exactly.
Vec sample_disturbance(const DisturbanceSpec& spec, const poly::HPolytope& W, Rng& rng);

// Single-component moment fit: sample mean projected into W, sample
// covariance with eigenvalues floored at 1e-8. Throws TooFewSamples for
// fewer than two samples.
dpmm::MixtureEstimate global_moment_baseline(const std::vector<Vec>& samples,
                                             const poly::HPolytope& W);

enum class ControllerMode { OnlineLearning, GlobalMoment, NoLearning };

std::string to_string(ControllerMode mode);
ControllerMode controller_mode_from_string(const std::string& s);

struct Scenario {
  std::string name = "scenario";
  mpc::MpcConfig cfg;
  Vec x0;
  DisturbanceSpec historical;             // priming-phase generator
  DisturbanceSpec online;                 // closed-loop generator
  int historical_samples = 0;
  int T_s = 1;                            // closed-loop steps per run
  int runs = 1;
  std::uint64_t seed = 1;
  ControllerMode mode = ControllerMode::OnlineLearning;
  dpmm::NwPrior prior;                    // empty theta0 -> defaults(n)

  void validate() const;
};

struct StepRecord {
  int k = 0;
  Vec x;
  Vec u;
  Vec w;                                  // zero on the final record
  Vec eta;                                // tightening active when solving at k
  int flag = 0;                           // update decision taken at the end of step k
  double J = 0;                           // optimal cost of the step-k program
  conic::SolveStatus status = conic::SolveStatus::Optimal;
  double t_solve = 0, t_learn = 0, t_tighten = 0, t_sets = 0, t_update = 0;
};

struct RunLog {
  int run = 0;
  std::vector<StepRecord> steps;          // k = 0..T_s inclusive
  Mat violations;                         // (T_s+1) x p indicators of H x_k > h
  double J_cost = 0;                      // sum_{k=1..T_s} x_k'Q x_k + u_k'R u_k
  double cost_slack_max = 0;              // max_k J_{k+1} - J_k + c_0'Psi c_0
  int infeasible_steps = 0;               // failures after a feasible step 0
};

struct Summary {
  int runs = 0;
  int T_s = 0;
  int first_window = 0;                   // min(N, T_s)
  double J_mean = 0;
  double J_std = 0;
  double violation_rate = 0;              // (run, 1<=k<=first_window) pairs, any row
  double violation_rate_full = 0;         // same over 1<=k<=T_s
  Mat eta_mean;                           // (T_s+1) x p, averaged over runs
  double flag_rate = 0;                   // mean flag over runs x k in [0, T_s)
  double t_solve = 0, t_learn = 0, t_tighten = 0, t_sets = 0, t_update = 0;
};

// Worst-case tightening and the sets it induces; shared across runs and used
// when a per-step set rebuild fails (the learned tightening never exceeds the
// worst case, so these sets certify feasibility of every update).
struct Baseline {
  Vec eta0;
  mpc::TightenedSets worst_sets;
};

Baseline prepare(const Scenario& scn, const conic::SolverSettings& settings = {});

RunLog run_closed_loop(const Scenario& scn, int run, const Baseline* base = nullptr,
                       const conic::SolverSettings& settings = {});

// All runs, parallel across a pool capped by DRMPC_THREADS. Deterministic:
// logs depend only on (scenario, seed, run index).
std::vector<RunLog> run_all(const Scenario& scn, const conic::SolverSettings& settings = {});

Summary metrics(const Scenario& scn, const std::vector<RunLog>& logs);

std::string run_csv(const RunLog& log);
std::string summary_json(const Scenario& scn, const Summary& sum);

// Writes <name>_<run>.csv per run plus <name>_summary.json under dir
// (created if missing).
void write_outputs(const Scenario& scn, const std::vector<RunLog>& logs,
                   const Summary& sum, const std::string& dir);

}  // namespace drmpc::sim
