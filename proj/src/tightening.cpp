#include <drmpc/tightening.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace drmpc::tightening {

namespace {

int svec_len(int n) { return n * (n + 1) / 2; }

// Column entries of one symmetric coefficient matrix, scattered into the
// svec-packed slack rows of a PSD block.
void scatter_psd_column(Mat& A, Vec& b, int row_off, int col, const Mat& M) {
  const Vec sv = conic::svec(M);
  if (col < 0) {
    b.segment(row_off, sv.size()) += sv;
  } else {
    A.block(row_off, col, sv.size(), 1) -= sv;
  }
}

Mat unit_sym(int n, int r, int c) {
  Mat M = Mat::Zero(n, n);
  M(r, c) += 0.5;
  M(c, r) += 0.5;
  if (r == c) M(r, c) = 1.0;
  return M;
}

}  // namespace

void AmbiguitySet::validate() const {
  if (W.dim() <= 0 || W.rows() == 0) throw std::invalid_argument("ambiguity: empty support");
  if (!poly::is_bounded(W)) throw std::invalid_argument("ambiguity: support must be bounded");
  if (!poly::origin_interior(W)) throw std::invalid_argument("ambiguity: origin must be interior");
  const int n = W.dim();
  const int m = static_cast<int>(mix.m);
  if (m <= 0) throw std::invalid_argument("ambiguity: no components");
  if (static_cast<int>(mix.mu.size()) != m || static_cast<int>(mix.Sigma.size()) != m ||
      mix.gamma.size() != m)
    throw std::invalid_argument("ambiguity: component count mismatch");
  double total = 0.0;
  for (int j = 0; j < m; ++j) {
    if (mix.mu[j].size() != n) throw std::invalid_argument("ambiguity: mean dimension mismatch");
    if (mix.Sigma[j].rows() != n || mix.Sigma[j].cols() != n)
      throw std::invalid_argument("ambiguity: covariance dimension mismatch");
    if (!mix.Sigma[j].isApprox(mix.Sigma[j].transpose(), 1e-10))
      throw std::invalid_argument("ambiguity: covariance not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(mix.Sigma[j]);
    if (es.eigenvalues().minCoeff() < -1e-10)
      throw std::invalid_argument("ambiguity: covariance not positive semidefinite");
    if (!(mix.gamma[j] > 0.0)) throw std::invalid_argument("ambiguity: weights must be positive");
    if (!poly::contains(W, mix.mu[j], 1e-9))
      throw std::invalid_argument("ambiguity: component mean outside support");
    total += mix.gamma[j];
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("ambiguity: weights must sum to one");
}

Vec worst_case_eta(const poly::HPolytope& W, const Mat& H,
                   const conic::SolverSettings& settings) {
  if (H.cols() != W.dim()) throw std::invalid_argument("worst_case_eta: dimension mismatch");
  Vec out(H.rows());
  for (int i = 0; i < H.rows(); ++i) out(i) = poly::support(W, H.row(i).transpose(), settings);
  return out;
}

conic::ConeProgram build_sdp(const AmbiguitySet& amb, const Vec& Hrow,
                             double eps, bool beta_nonneg) {
  amb.validate();
  if (!(eps > 0.0) || eps > 1.0) throw std::invalid_argument("build_sdp: risk level outside (0, 1]");
  const int n = amb.dim();
  if (Hrow.size() != n) throw std::invalid_argument("build_sdp: row dimension mismatch");
  const int m = static_cast<int>(amb.mix.m);
  const int nf = amb.W.rows();
  const int sn = svec_len(n);
  const int sn1 = svec_len(n + 1);
  const int per = 1 + n + sn + 2 * nf;  // t, omega, svec(Omega), phi1, phi2

  const int nvar = 2 + m * per;
  const int nrow = 1 + m * (2 * nf + sn + 2 * sn1) + (beta_nonneg ? 1 : 0);

  conic::ConeProgram prog;
  prog.P = Mat::Zero(nvar, nvar);
  prog.q = Vec::Zero(nvar);
  prog.q(0) = 1.0;  // minimize eta
  prog.A = Mat::Zero(nrow, nvar);
  prog.b = Vec::Zero(nrow);

  const int v_eta = 0;
  const int v_beta = 1;
  auto v_t = [&](int j) { return 2 + j * per; };
  auto v_omega = [&](int j) { return 2 + j * per + 1; };
  auto v_Omega = [&](int j) { return 2 + j * per + 1 + n; };
  auto v_phi1 = [&](int j) { return 2 + j * per + 1 + n + sn; };
  auto v_phi2 = [&](int j) { return 2 + j * per + 1 + n + sn + nf; };

  // Scalar risk row: eps*beta + sum_j gamma_j (t_j + mu_j'omega_j + <S_j, Omega_j>) <= 0.
  prog.A(0, v_beta) = eps;
  for (int j = 0; j < m; ++j) {
    const double g = amb.mix.gamma[j];
    const Vec& mu = amb.mix.mu[j];
    const Mat S = amb.mix.Sigma[j] + mu * mu.transpose();
    prog.A(0, v_t(j)) = g;
    prog.A.block(0, v_omega(j), 1, n) = g * mu.transpose();
    prog.A.block(0, v_Omega(j), 1, sn) = g * conic::svec(S).transpose();
  }
  prog.cones.push_back({conic::ConeType::NonNeg, 1});

  int row = 1;
  for (int j = 0; j < m; ++j) {
    // phi1_j >= 0, phi2_j >= 0
    for (int half = 0; half < 2; ++half) {
      const int base = half == 0 ? v_phi1(j) : v_phi2(j);
      for (int r = 0; r < nf; ++r) prog.A(row + r, base + r) = -1.0;
      prog.cones.push_back({conic::ConeType::NonNeg, nf});
      row += nf;
    }
    // Omega_j >= 0
    for (int u = 0; u < sn; ++u) prog.A(row + u, v_Omega(j) + u) = -1.0;
    prog.cones.push_back({conic::ConeType::Psd, n});
    row += sn;

    // Two support LMIs over S^{n+1}; blocks [Omega, col; col', corner].
    for (int which = 0; which < 2; ++which) {
      const int phi = which == 0 ? v_phi1(j) : v_phi2(j);
      // Omega_j in the top-left block.
      for (int u = 0; u < sn; ++u) {
        Mat base = conic::smat(Vec::Unit(sn, u));
        Mat M = Mat::Zero(n + 1, n + 1);
        M.topLeftCorner(n, n) = base;
        scatter_psd_column(prog.A, prog.b, row, v_Omega(j) + u, M);
      }
      // omega_j / 2 on the border.
      for (int r = 0; r < n; ++r) {
        Mat M = Mat::Zero(n + 1, n + 1);
        M(r, n) = 0.5;
        M(n, r) = 0.5;
        scatter_psd_column(prog.A, prog.b, row, v_omega(j) + r, M);
      }
      // Support multipliers: border E'phi/2, corner -f'phi.
      for (int k = 0; k < nf; ++k) {
        Mat M = Mat::Zero(n + 1, n + 1);
        for (int r = 0; r < n; ++r) {
          M(r, n) += 0.5 * amb.W.C(k, r);
          M(n, r) += 0.5 * amb.W.C(k, r);
        }
        M(n, n) = -amb.W.d(k);
        scatter_psd_column(prog.A, prog.b, row, phi + k, M);
      }
      // Corner t_j (+ beta + eta in the second LMI).
      scatter_psd_column(prog.A, prog.b, row, v_t(j), unit_sym(n + 1, n, n));
      if (which == 1) {
        scatter_psd_column(prog.A, prog.b, row, v_beta, unit_sym(n + 1, n, n));
        scatter_psd_column(prog.A, prog.b, row, v_eta, unit_sym(n + 1, n, n));
        // Constant border -Hrow/2.
        Mat M0 = Mat::Zero(n + 1, n + 1);
        for (int r = 0; r < n; ++r) {
          M0(r, n) = -0.5 * Hrow(r);
          M0(n, r) = -0.5 * Hrow(r);
        }
        scatter_psd_column(prog.A, prog.b, row, -1, M0);
      }
      prog.cones.push_back({conic::ConeType::Psd, n + 1});
      row += sn1;
    }
  }
  if (beta_nonneg) {
    prog.A(row, v_beta) = -1.0;
    prog.cones.push_back({conic::ConeType::NonNeg, 1});
    row += 1;
  }
  prog.validate();
  return prog;
}

TighteningResult solve_eta(const AmbiguitySet& amb, const Mat& H, const Vec& eps,
                           const conic::SolverSettings& settings, bool beta_nonneg) {
  amb.validate();
  if (H.cols() != amb.dim()) throw std::invalid_argument("solve_eta: dimension mismatch");
  if (eps.size() != H.rows()) throw std::invalid_argument("solve_eta: risk vector length mismatch");
  const Vec eta0 = worst_case_eta(amb.W, H, settings);

  TighteningResult res;
  res.eta = Vec::Zero(H.rows());
  res.rows.resize(H.rows());
  for (int i = 0; i < H.rows(); ++i) {
    RowResult& rr = res.rows[i];
    const Vec Hrow = H.row(i).transpose();
    if (Hrow.lpNorm<Eigen::Infinity>() < 1e-14) {
      rr = {0.0, 0.0, conic::SolveStatus::Optimal, false};
      res.eta(i) = 0.0;
      continue;
    }
    conic::ConeProgram prog = build_sdp(amb, Hrow, eps(i), beta_nonneg);
    conic::ConeSolution sol;
    try {
      sol = conic::solve(prog, settings);
    } catch (const std::exception&) {
      sol.status = conic::SolveStatus::Numerical;
    }
    // Accept an uncertified best iterate when its residuals are still small;
    // degenerate mixtures (near-singular covariances) often stall just short
    // of the target tolerance. Anything worse falls back to the support bound.
    const bool usable =
        sol.status == conic::SolveStatus::Optimal ||
        ((sol.status == conic::SolveStatus::Numerical ||
          sol.status == conic::SolveStatus::MaxIter) &&
         sol.x.size() == prog.q.size() && std::isfinite(sol.x(0)) &&
         sol.primal_residual <= 1e-5 && sol.dual_residual <= 1e-5 &&
         std::abs(sol.duality_gap) <=
             1e-5 * std::max(1.0, std::abs(sol.primal_objective)));
    if (usable) {
      rr.raw = sol.x(0);
      rr.eta = std::max(0.0, std::min(rr.raw, eta0(i)));
      rr.status = sol.status;
      rr.fallback = false;
    } else {
      rr.raw = eta0(i);
      rr.eta = std::max(0.0, eta0(i));
      rr.status = sol.status;
      rr.fallback = true;
    }
    res.eta(i) = rr.eta;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Ground-truth oracle.

namespace {

struct AtomSet {
  std::vector<Vec> pts;
  std::vector<double> loss;  // Hrow' * pt, cached
};

AtomSet build_atoms(const AmbiguitySet& amb, const Vec& Hrow, int density) {
  const int n = amb.dim();
  if (n > 2) throw std::invalid_argument("wc_cvar_oracle: supports n <= 2 only");
  if (density < 3) throw std::invalid_argument("wc_cvar_oracle: grid density too small");
  AtomSet as;
  Vec lo(n), hi(n);
  for (int r = 0; r < n; ++r) {
    hi(r) = poly::support(amb.W, Vec::Unit(n, r));
    lo(r) = -poly::support(amb.W, -Vec::Unit(n, r));
  }
  if (n == 1) {
    for (int i = 0; i < density; ++i) {
      Vec p(1);
      p(0) = lo(0) + (hi(0) - lo(0)) * i / (density - 1);
      as.pts.push_back(p);
    }
  } else {
    for (int i = 0; i < density; ++i)
      for (int k = 0; k < density; ++k) {
        Vec p(2);
        p(0) = lo(0) + (hi(0) - lo(0)) * i / (density - 1);
        p(1) = lo(1) + (hi(1) - lo(1)) * k / (density - 1);
        if (poly::contains(amb.W, p, 1e-12)) as.pts.push_back(p);
      }
  }
  for (int j = 0; j < static_cast<int>(amb.mix.m); ++j) as.pts.push_back(amb.mix.mu[j]);
  as.loss.reserve(as.pts.size());
  for (const Vec& p : as.pts) as.loss.push_back(Hrow.dot(p));
  return as;
}

// Worst-case E[(Hrow'w - s)+] over mass/mean/second-moment constrained
// distributions on the atom set, by column generation: a small restricted
// master over active atoms, priced against the full grid with the master
// duals. mean_idx is the atom that sits exactly at mu, keeping the master
// feasible from the first round.
double worst_tail_expectation(const AtomSet& as, int mean_idx, const Vec& mu,
                              const Mat& S, double s,
                              std::vector<int>* cache = nullptr) {
  const int n = mu.size();
  const int sn = svec_len(n);
  const int N = static_cast<int>(as.pts.size());

  std::vector<char> in_active(N, 0);
  std::vector<int> active;
  auto add = [&](int i) {
    if (i >= 0 && i < N && !in_active[i]) {
      in_active[i] = 1;
      active.push_back(i);
    }
  };
  add(mean_idx);
  {
    // seed: extremes of the loss and the atom nearest the kink
    int imin = 0, imax = 0, ikink = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < N; ++i) {
      if (as.loss[i] < as.loss[imin]) imin = i;
      if (as.loss[i] > as.loss[imax]) imax = i;
      if (std::abs(as.loss[i] - s) < best) {
        best = std::abs(as.loss[i] - s);
        ikink = i;
      }
    }
    add(imin);
    add(imax);
    add(ikink);
  }
  int stride = std::max(1, N / (n == 1 ? 16 : 48));
  if (cache && !cache->empty()) {
    // the moment rows do not depend on s, so the support of the previous
    // optimum is a feasible (and nearly optimal) restricted master
    for (int i : *cache) add(i);
  } else {
    // coarse subsample so the restricted master has interior points
    for (int i = 0; i < N; i += stride) add(i);
  }

  conic::SolverSettings st;
  st.tol_feas = 1e-9;
  st.tol_gap = 1e-9;
  double value = 0.0;
  for (int round = 0; round < 200; ++round) {
    const int k = static_cast<int>(active.size());
    conic::ConeProgram prog;
    prog.P = Mat::Zero(k, k);
    prog.q = Vec::Zero(k);
    const int mom_rows = n == 1 ? 1 : sn;
    prog.A = Mat::Zero(1 + n + mom_rows + k, k);
    prog.b = Vec::Zero(1 + n + mom_rows + k);
    for (int c = 0; c < k; ++c) {
      const Vec& p = as.pts[active[c]];
      prog.q(c) = -std::max(0.0, as.loss[active[c]] - s);
      prog.A(0, c) = 1.0;
      prog.A.block(1, c, n, 1) = p;
      if (n == 1)
        prog.A(1 + n, c) = p(0) * p(0);
      else
        prog.A.block(1 + n, c, sn, 1) = conic::svec(p * p.transpose());
      prog.A(1 + n + mom_rows + c, c) = -1.0;
    }
    prog.b(0) = 1.0;
    prog.b.segment(1, n) = mu;
    if (n == 1)
      prog.b(1 + n) = S(0, 0);
    else
      prog.b.segment(1 + n, sn) = conic::svec(S);
    prog.cones.push_back({conic::ConeType::Zero, 1 + n});
    prog.cones.push_back({n == 1 ? conic::ConeType::NonNeg : conic::ConeType::Psd,
                          n == 1 ? 1 : n});
    prog.cones.push_back({conic::ConeType::NonNeg, k});

    conic::ConeSolution sol = conic::solve(prog, st);
    if (sol.status == conic::SolveStatus::PrimalInfeasible)
      throw InfeasibleMoments("worst_tail_expectation: moment system infeasible on grid");
    if (sol.status != conic::SolveStatus::Optimal) {
      // a thin active set can leave the master degenerate; densify and retry
      if (stride > 1) {
        stride = std::max(1, stride / 2);
        for (int i = 0; i < N; i += stride) add(i);
        continue;
      }
      throw std::runtime_error("worst_tail_expectation: master solve failed");
    }
    value = -sol.primal_objective;

    const double y0 = sol.y(0);
    const Vec ymu = sol.y.segment(1, n);
    Mat Ys;
    if (n == 1) {
      Ys = Mat::Constant(1, 1, sol.y(1 + n));
    } else {
      Ys = conic::smat(sol.y.segment(1 + n, sn));
    }
    // price the full grid
    double worst = 0.0;
    std::vector<std::pair<double, int>> viol;
    for (int i = 0; i < N; ++i) {
      if (in_active[i]) continue;
      const Vec& p = as.pts[i];
      const double rc = std::max(0.0, as.loss[i] - s) - y0 - ymu.dot(p) -
                        (p.transpose() * Ys * p).value();
      if (rc > 1e-9) viol.push_back({rc, i});
      worst = std::max(worst, rc);
    }
    if (viol.empty()) {
      if (cache) {
        cache->clear();
        for (int c = 0; c < k; ++c)
          if (sol.x(c) > 1e-10) cache->push_back(active[c]);
      }
      break;
    }
    std::sort(viol.begin(), viol.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int t = 0; t < std::min<int>(5, static_cast<int>(viol.size())); ++t)
      add(viol[t].second);
  }
  return value;
}

double sup_cvar(const AmbiguitySet& amb, const AtomSet& as, double eps,
                double eta, double eta0,
                std::vector<std::vector<int>>* caches = nullptr) {
  const int m = static_cast<int>(amb.mix.m);
  const int N = static_cast<int>(as.pts.size());
  auto g = [&](double beta) {
    double tail = 0.0;
    for (int j = 0; j < m; ++j) {
      // component means were appended at the tail of the atom list
      const int mean_idx = N - m + j;
      const Mat S = amb.mix.Sigma[j] + amb.mix.mu[j] * amb.mix.mu[j].transpose();
      tail += amb.mix.gamma[j] *
              worst_tail_expectation(as, mean_idx, amb.mix.mu[j], S, beta + eta,
                                     caches ? &(*caches)[j] : nullptr);
    }
    return beta + tail / eps;
  };
  double a = -eta0 - 1.0, b = eta0 + 1.0;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = g(c), fd = g(d);
  // the outer bisection only resolves 1e-4, so 1e-5 on beta is plenty
  for (int it = 0; it < 40 && b - a > 1e-5; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = g(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = g(d);
    }
  }
  return std::min(fc, fd);
}

}  // namespace

double wc_cvar_oracle(const AmbiguitySet& amb, const Vec& Hrow, double eps,
                      int grid_density) {
  amb.validate();
  if (!(eps > 0.0) || eps > 1.0)
    throw std::invalid_argument("wc_cvar_oracle: risk level outside (0, 1]");
  if (Hrow.size() != amb.dim()) throw std::invalid_argument("wc_cvar_oracle: dimension mismatch");
  const double eta0 = poly::support(amb.W, Hrow);
  const AtomSet as = build_atoms(amb, Hrow, grid_density);

  // per-component active-set caches persist across the whole search: the
  // moment system never changes, only the hinge offset does
  std::vector<std::vector<int>> caches(amb.mix.m);
  double lo = -eta0 - 1.0, hi = eta0 + 1.0;
  while (hi - lo > 1e-4) {
    const double mid = 0.5 * (lo + hi);
    if (sup_cvar(amb, as, eps, mid, eta0, &caches) <= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace drmpc::tightening
