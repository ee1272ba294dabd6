#include <drmpc/mpc.hpp>

#include <cmath>
#include <sstream>

namespace drmpc::mpc {

namespace {

std::vector<Mat> phi_powers(const Mat& Phi, int N) {
  std::vector<Mat> P(N + 1);
  P[0] = Mat::Identity(Phi.rows(), Phi.cols());
  for (int l = 1; l <= N; ++l) P[l] = Phi * P[l - 1];
  return P;
}

// S_l maps the stacked c to z_l - Phi^l x:  S_0 = 0, S_{l+1} = Phi S_l + B E_l.
std::vector<Mat> control_maps(const Mat& Phi, const Mat& B, int N) {
  const int n = static_cast<int>(Phi.rows());
  const int m = static_cast<int>(B.cols());
  std::vector<Mat> S(N + 1, Mat::Zero(n, m * N));
  for (int l = 0; l < N; ++l) {
    S[l + 1] = Phi * S[l];
    S[l + 1].block(0, l * m, n, m) += B;
  }
  return S;
}

poly::HPolytope terminal_base(const MpcConfig& cfg, const poly::HPolytope& ZN,
                              const Vec& deltaN) {
  const Mat GK = cfg.U.C * cfg.reg.K;
  poly::HPolytope base;
  base.C = Mat::Zero(ZN.rows() + GK.rows(), cfg.plant.n());
  base.d = Vec::Zero(ZN.rows() + GK.rows());
  base.C.topRows(ZN.rows()) = ZN.C;
  base.d.head(ZN.rows()) = ZN.d;
  base.C.bottomRows(GK.rows()) = GK;
  base.d.tail(GK.rows()) = cfg.U.d - deltaN;
  return base;
}

poly::HPolytope terminal_mrpi(const MpcConfig& cfg, const poly::HPolytope& base,
                              const Mat& PhiN,
                              const conic::SolverSettings& settings) {
  poly::MrpiResult res =
      poly::mrpi(cfg.reg.Phi, PhiN, cfg.W, base, 1e-9, 200, settings);
  if (res.status == poly::MrpiStatus::Empty)
    throw EmptyTerminalSet("terminal set: invariant set is empty");
  if (res.status == poly::MrpiStatus::MaxIter)
    throw EmptyTerminalSet("terminal set: invariant recursion did not settle");
  return res.set;
}

}  // namespace

TerminalMode default_terminal_mode(int state_dim) {
  return state_dim <= 2 ? TerminalMode::OnlineMrpi : TerminalMode::OfflineFallback;
}

void MpcConfig::validate() const {
  plant.validate();
  if (N < 1) throw std::invalid_argument("mpc config: horizon must be at least 1");
  const int n = plant.n();
  const int m = plant.m();
  if (X.dim() != n || U.dim() != m || W.dim() != n)
    throw std::invalid_argument("mpc config: constraint set dimension mismatch");
  if (eps.size() != X.rows())
    throw std::invalid_argument("mpc config: risk vector length mismatch");
  for (int i = 0; i < eps.size(); ++i)
    if (!(eps(i) > 0.0 && eps(i) < 1.0))
      throw std::invalid_argument("mpc config: risk levels must lie in (0, 1)");
  if (!poly::origin_interior(X))
    throw std::invalid_argument("mpc config: state set must contain the origin strictly");
  if (!poly::origin_interior(U))
    throw std::invalid_argument("mpc config: input set must contain the origin strictly");
  if (!poly::is_bounded(W))
    throw std::invalid_argument("mpc config: disturbance support must be bounded");
  if (!poly::contains(W, Vec::Zero(n), 1e-12))
    throw std::invalid_argument("mpc config: disturbance support must contain the origin");
  if (reg.K.rows() != m || reg.K.cols() != n)
    throw std::invalid_argument("mpc config: regulator gain dimension mismatch");
  if ((reg.Phi - (plant.A + plant.B * reg.K)).lpNorm<Eigen::Infinity>() > 1e-9)
    throw std::invalid_argument("mpc config: regulator does not match the plant");
}

poly::HPolytope offline_terminal_set(const MpcConfig& cfg,
                                     const conic::SolverSettings& settings) {
  cfg.validate();
  const Vec eta0 = tightening::worst_case_eta(cfg.W, cfg.X.C, settings);
  const Mat zeta = poly::error_tube_offsets(cfg.reg.Phi, cfg.W, cfg.X.C, cfg.N);
  const Mat delta =
      poly::input_tube_offsets(cfg.reg.Phi, cfg.reg.K, cfg.W, cfg.U.C, cfg.N + 1);
  poly::HPolytope ZN =
      poly::tighten_rows(cfg.X, eta0 + zeta.row(cfg.N).transpose());
  if (poly::is_empty(ZN, settings))
    throw EmptyTerminalSet("terminal set: support-level stage set is empty");
  const std::vector<Mat> P = phi_powers(cfg.reg.Phi, cfg.N);
  return terminal_mrpi(cfg, terminal_base(cfg, ZN, delta.row(cfg.N).transpose()),
                       P[cfg.N], settings);
}

TightenedSets build_sets(const MpcConfig& cfg, const Vec& eta, int epoch,
                         const conic::SolverSettings& settings) {
  cfg.validate();
  const Vec eta0 = tightening::worst_case_eta(cfg.W, cfg.X.C, settings);
  if (eta.size() != cfg.X.rows())
    throw std::invalid_argument("build_sets: tightening vector length mismatch");
  for (int i = 0; i < eta.size(); ++i)
    if (eta(i) < -1e-12 || eta(i) > eta0(i) + 1e-9)
      throw std::invalid_argument(
          "build_sets: tightening must lie between 0 and the support bound");

  TightenedSets sets;
  sets.eta = eta;
  sets.epoch = epoch;
  sets.zeta = poly::error_tube_offsets(cfg.reg.Phi, cfg.W, cfg.X.C, cfg.N);
  const Mat delta =
      poly::input_tube_offsets(cfg.reg.Phi, cfg.reg.K, cfg.W, cfg.U.C, cfg.N + 1);

  sets.Z.reserve(cfg.N);
  for (int l = 1; l <= cfg.N; ++l) {
    poly::HPolytope Zl =
        poly::tighten_rows(cfg.X, eta + sets.zeta.row(l).transpose());
    if (poly::is_empty(Zl, settings)) {
      std::ostringstream oss;
      oss << "build_sets: stage set " << l << " is empty";
      throw EmptyStageSet(l, oss.str());
    }
    sets.Z.push_back(std::move(Zl));
  }
  sets.V.reserve(cfg.N);
  for (int l = 0; l < cfg.N; ++l) {
    poly::HPolytope Vl = poly::tighten_rows(cfg.U, delta.row(l).transpose());
    if (poly::is_empty(Vl, settings)) {
      std::ostringstream oss;
      oss << "build_sets: input set " << l << " is empty";
      throw EmptyStageSet(l, oss.str());
    }
    sets.V.push_back(std::move(Vl));
  }

  if (cfg.terminal_mode == TerminalMode::OfflineFallback) {
    if (cfg.offline_Zf.rows() == 0)
      throw std::logic_error("build_sets: offline terminal set not initialized");
    sets.Zf = cfg.offline_Zf;
  } else {
    const std::vector<Mat> P = phi_powers(cfg.reg.Phi, cfg.N);
    sets.Zf = terminal_mrpi(
        cfg, terminal_base(cfg, sets.Z.back(), delta.row(cfg.N).transpose()),
        P[cfg.N], settings);
  }
  if (poly::is_empty(sets.Zf, settings))
    throw EmptyTerminalSet("build_sets: terminal set is empty");
  return sets;
}

MpcSolution solve_ocp(const MpcConfig& cfg, const TightenedSets& sets,
                      const Vec& x, const conic::SolverSettings& settings) {
  const int n = cfg.plant.n();
  const int m = cfg.plant.m();
  const int N = cfg.N;
  if (x.size() != n) throw std::invalid_argument("solve_ocp: state dimension mismatch");
  if (static_cast<int>(sets.Z.size()) != N || static_cast<int>(sets.V.size()) != N)
    throw std::invalid_argument("solve_ocp: sets do not match the horizon");

  const std::vector<Mat> P = phi_powers(cfg.reg.Phi, N);
  const std::vector<Mat> S = control_maps(cfg.reg.Phi, cfg.plant.B, N);

  conic::ConeProgram prog;
  prog.P = Mat::Zero(m * N, m * N);
  for (int l = 0; l < N; ++l)
    prog.P.block(l * m, l * m, m, m) = 2.0 * cfg.reg.PsiTilde;
  prog.q = Vec::Zero(m * N);

  int rows = 0;
  for (const auto& Zl : sets.Z) rows += Zl.rows();
  rows += sets.Zf.rows();
  for (const auto& Vl : sets.V) rows += Vl.rows();
  prog.A = Mat::Zero(rows, m * N);
  prog.b = Vec::Zero(rows);

  int at = 0;
  auto add_state_rows = [&](const poly::HPolytope& set, int l) {
    prog.A.block(at, 0, set.rows(), m * N) = set.C * S[l];
    prog.b.segment(at, set.rows()) = set.d - set.C * (P[l] * x);
    at += set.rows();
  };
  for (int l = 1; l <= N; ++l) add_state_rows(sets.Z[l - 1], l);
  add_state_rows(sets.Zf, N);
  for (int l = 0; l < N; ++l) {
    const poly::HPolytope& Vl = sets.V[l];
    Mat M = Vl.C * (cfg.reg.K * S[l]);
    M.block(0, l * m, Vl.rows(), m) += Vl.C;
    prog.A.block(at, 0, Vl.rows(), m * N) = M;
    prog.b.segment(at, Vl.rows()) = Vl.d - Vl.C * (cfg.reg.K * (P[l] * x));
    at += Vl.rows();
  }
  prog.cones.push_back({conic::ConeType::NonNeg, rows});

  conic::ConeSolution sol = conic::solve(prog, settings);
  if (sol.status == conic::SolveStatus::PrimalInfeasible) {
    std::ostringstream oss;
    oss << "solve_ocp: infeasible at x = [" << x.transpose() << "]";
    throw Infeasible(oss.str());
  }
  const bool usable =
      sol.status == conic::SolveStatus::Optimal ||
      ((sol.status == conic::SolveStatus::Numerical ||
        sol.status == conic::SolveStatus::MaxIter) &&
       sol.x.size() == prog.q.size() && sol.x.allFinite() &&
       sol.primal_residual <= 1e-6 && sol.dual_residual <= 1e-6 &&
       std::abs(sol.duality_gap) <=
           1e-6 * std::max(1.0, std::abs(sol.primal_objective)));
  if (!usable)
    throw SolverFailed("solve_ocp: " + conic::to_string(sol.status));

  MpcSolution out;
  out.status = sol.status;
  out.c = sol.x;
  out.z = Mat::Zero(n, N + 1);
  out.v = Mat::Zero(m, N);
  out.z.col(0) = x;
  for (int l = 0; l < N; ++l) {
    out.v.col(l) = cfg.reg.K * out.z.col(l) + out.c.segment(l * m, m);
    out.z.col(l + 1) = cfg.plant.A * out.z.col(l) + cfg.plant.B * out.v.col(l);
  }
  out.J = regulator::finite_horizon_cost(cfg.reg, out.c);
  return out;
}

Candidate candidate(const MpcSolution& prev, const Vec& x_new,
                    const MpcConfig& cfg) {
  const int n = cfg.plant.n();
  const int m = cfg.plant.m();
  const int N = cfg.N;
  if (prev.c.size() != m * N) throw std::invalid_argument("candidate: solution size mismatch");
  if (x_new.size() != n) throw std::invalid_argument("candidate: state dimension mismatch");

  Candidate cand;
  cand.c_tilde = Vec::Zero(m * N);
  cand.c_tilde.head(m * (N - 1)) = prev.c.tail(m * (N - 1));
  cand.z_tilde = Mat::Zero(n, N + 1);
  cand.z_tilde.col(0) = x_new;
  for (int l = 0; l < N; ++l)
    cand.z_tilde.col(l + 1) = cfg.reg.Phi * cand.z_tilde.col(l) +
                              cfg.plant.B * cand.c_tilde.segment(l * m, m);
  return cand;
}

UpdateDecision safe_update(const Candidate& cand, const TightenedSets& fresh,
                           const TightenedSets& held, double tol) {
  const int N = static_cast<int>(fresh.Z.size());
  bool ok = true;
  for (int l = 1; l < N && ok; ++l)
    ok = poly::contains(fresh.Z[l - 1], cand.z_tilde.col(l), tol);
  if (ok) ok = poly::contains(fresh.Zf, cand.z_tilde.col(N), tol);

  UpdateDecision dec;
  dec.flag = ok ? 1 : 0;
  dec.active = ok ? fresh : held;
  return dec;
}

Vec control_input(const MpcSolution& sol) { return sol.v.col(0); }

}  // namespace drmpc::mpc
