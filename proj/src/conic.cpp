#include "drmpc/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace drmpc::conic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kSqrt2 = std::sqrt(2.0);

struct BlockRef {
  ConeType type;
  int order;  // vector length or matrix order
  int off;    // first row in A
  int len;    // rows occupied
};

std::vector<BlockRef> layout(const std::vector<ConeBlock>& cones) {
  std::vector<BlockRef> refs;
  int off = 0;
  for (const auto& c : cones) {
    refs.push_back({c.type, c.dim, off, c.rows()});
    off += c.rows();
  }
  return refs;
}

}  // namespace

int svec_len(int order) { return order * (order + 1) / 2; }

Vec svec(const Mat& M) {
  const int k = static_cast<int>(M.rows());
  Vec v(svec_len(k));
  int t = 0;
  for (int j = 0; j < k; ++j)
    for (int i = j; i < k; ++i) v(t++) = (i == j) ? M(i, j) : kSqrt2 * 0.5 * (M(i, j) + M(j, i));
  return v;
}

Mat smat(const Vec& v) {
  const int len = static_cast<int>(v.size());
  int k = static_cast<int>((std::sqrt(8.0 * len + 1.0) - 1.0) / 2.0 + 0.5);
  Mat M(k, k);
  int t = 0;
  for (int j = 0; j < k; ++j)
    for (int i = j; i < k; ++i) {
      double val = (i == j) ? v(t) : v(t) / kSqrt2;
      M(i, j) = val;
      M(j, i) = val;
      ++t;
    }
  return M;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::PrimalInfeasible: return "PrimalInfeasible";
    case SolveStatus::DualInfeasible: return "DualInfeasible";
    case SolveStatus::MaxIter: return "MaxIter";
    case SolveStatus::Numerical: return "Numerical";
  }
  return "Unknown";
}

bool ConeProgram::has_quadratic() const {
  return P.size() > 0 && P.cwiseAbs().maxCoeff() > 0.0;
}

void ConeProgram::validate() const {
  const int n = n_vars();
  if (n <= 0) throw std::invalid_argument("conic: program has no variables");
  if (A.cols() != n) throw std::invalid_argument("conic: A column count != q size");
  if (A.rows() != b.size()) throw std::invalid_argument("conic: A row count != b size");
  int rows = 0;
  for (const auto& c : cones) {
    if (c.dim < 0) throw std::invalid_argument("conic: negative cone dimension");
    rows += c.rows();
  }
  if (rows != A.rows()) throw std::invalid_argument("conic: cone rows do not cover A");
  if (!q.allFinite() || !A.allFinite() || !b.allFinite())
    throw std::invalid_argument("conic: non-finite data");
  if (P.size() > 0) {
    if (P.rows() != n || P.cols() != n) throw std::invalid_argument("conic: P must be n x n");
    if (!P.allFinite()) throw std::invalid_argument("conic: non-finite P");
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, P.cwiseAbs().maxCoeff()))
      throw std::invalid_argument("conic: P not symmetric");
    Eigen::LDLT<Mat> ldlt(0.5 * (P + P.transpose()));
    double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
    if (ldlt.info() != Eigen::Success ||
        (ldlt.vectorD().size() > 0 && ldlt.vectorD().minCoeff() < -1e-10 * scale))
      throw std::invalid_argument("conic: P not positive semidefinite");
  }
}

namespace {

/* ---- symmetric-cone arithmetic over the non-Zero blocks ---- */

class ConeOps {
 public:
  explicit ConeOps(const std::vector<BlockRef>& refs) : refs_(refs) {
    for (const auto& r : refs_)
      if (r.type != ConeType::Zero) {
        sym_.push_back(r);
        degree_ += (r.type == ConeType::NonNeg) ? r.order : r.order;
      }
  }

  int degree() const { return degree_; }
  bool has_sym() const { return !sym_.empty(); }

  Vec identity(int m) const {
    Vec e = Vec::Zero(m);
    for (const auto& r : sym_) {
      if (r.type == ConeType::NonNeg)
        e.segment(r.off, r.len).setOnes();
      else
        e.segment(r.off, r.len) = svec(Mat::Identity(r.order, r.order));
    }
    return e;
  }

  /* inner product over sym blocks */
  double dot(const Vec& a, const Vec& b) const {
    double v = 0.0;
    for (const auto& r : sym_) v += a.segment(r.off, r.len).dot(b.segment(r.off, r.len));
    return v;
  }

  /* sup alpha such that v + alpha dv stays in the cone; v strictly interior */
  double max_step(const Vec& v, const Vec& dv) const {
    double alpha = kInf;
    for (const auto& r : sym_) {
      if (r.type == ConeType::NonNeg) {
        for (int i = 0; i < r.len; ++i) {
          double d = dv(r.off + i);
          if (d < 0.0) alpha = std::min(alpha, -v(r.off + i) / d);
        }
      } else {
        Mat V = smat(v.segment(r.off, r.len));
        Mat D = smat(dv.segment(r.off, r.len));
        Eigen::LLT<Mat> llt(V);
        if (llt.info() != Eigen::Success) return 0.0;
        Mat L = llt.matrixL();
        Mat M = L.triangularView<Eigen::Lower>().solve(D);
        M = L.triangularView<Eigen::Lower>().solve(M.transpose()).transpose();
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M + M.transpose()),
                                              Eigen::EigenvaluesOnly);
        double mineig = es.eigenvalues().minCoeff();
        if (mineig < 0.0) alpha = std::min(alpha, -1.0 / mineig);
      }
    }
    return alpha;
  }

  /* shift v into the interior if needed: v += (1 + t) e with t = -min eig */
  void shift_interior(Vec& v, int m) const {
    double t = -kInf;
    for (const auto& r : sym_) {
      if (r.type == ConeType::NonNeg) {
        t = std::max(t, -v.segment(r.off, r.len).minCoeff());
      } else {
        Eigen::SelfAdjointEigenSolver<Mat> es(smat(v.segment(r.off, r.len)),
                                              Eigen::EigenvaluesOnly);
        t = std::max(t, -es.eigenvalues().minCoeff());
      }
    }
    if (t >= -1e-8) v += (1.0 + t) * identity(m);
  }

  const std::vector<BlockRef>& sym() const { return sym_; }

 private:
  std::vector<BlockRef> refs_;
  std::vector<BlockRef> sym_;
  int degree_ = 0;
};

/* Nesterov-Todd scaling state for all sym blocks. */
class Scaling {
 public:
  Scaling(const ConeOps& ops, int m) : ops_(ops), m_(m) {}

  bool compute(const Vec& s, const Vec& z) {
    nn_w_.clear();
    psd_R_.clear();
    psd_Rinv_.clear();
    psd_lam_.clear();
    lambda_ = Vec::Zero(m_);
    for (const auto& r : ops_.sym()) {
      if (r.type == ConeType::NonNeg) {
        Vec w(r.len);
        for (int i = 0; i < r.len; ++i) {
          double si = s(r.off + i), zi = z(r.off + i);
          if (si <= 0.0 || zi <= 0.0) return false;
          w(i) = std::sqrt(si / zi);
          lambda_(r.off + i) = std::sqrt(si * zi);
        }
        nn_w_.push_back(std::move(w));
      } else {
        Mat S = smat(s.segment(r.off, r.len));
        Mat Z = smat(z.segment(r.off, r.len));
        Eigen::LLT<Mat> ls(S), lz(Z);
        if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
        Mat Ls = ls.matrixL();
        Mat Lz = lz.matrixL();
        Eigen::JacobiSVD<Mat> svd(Lz.transpose() * Ls,
                                  Eigen::ComputeFullU | Eigen::ComputeFullV);
        Vec sig = svd.singularValues();
        if (sig.minCoeff() <= 0.0) return false;
        Vec isqrt = sig.cwiseSqrt().cwiseInverse();
        Mat R = Ls * svd.matrixV() * isqrt.asDiagonal();
        Mat Rinv = sig.cwiseSqrt().asDiagonal() * svd.matrixV().transpose() *
                   Ls.triangularView<Eigen::Lower>().solve(Mat::Identity(r.order, r.order));
        psd_R_.push_back(R);
        psd_Rinv_.push_back(Rinv);
        psd_lam_.push_back(sig);
        Mat Lam = sig.asDiagonal();
        lambda_.segment(r.off, r.len) = svec(Lam);
      }
    }
    return true;
  }

  const Vec& lambda() const { return lambda_; }

  /* H = W'W applied as a dense matrix block into K (sym rows only). */
  void add_H(Mat& K, int row0) const {
    int inn = 0, ipsd = 0;
    for (const auto& r : ops_.sym()) {
      if (r.type == ConeType::NonNeg) {
        const Vec& w = nn_w_[inn++];
        for (int i = 0; i < r.len; ++i)
          K(row0 + r.off + i, row0 + r.off + i) += w(i) * w(i);
      } else {
        Mat G = psd_R_[ipsd] * psd_R_[ipsd].transpose();
        ++ipsd;
        for (int t = 0; t < r.len; ++t) {
          Vec et = Vec::Zero(r.len);
          et(t) = 1.0;
          Vec col = svec(G * smat(et) * G);
          for (int i = 0; i < r.len; ++i) K(row0 + r.off + i, row0 + r.off + t) += col(i);
        }
      }
    }
  }

  Vec apply_H(const Vec& v) const {
    return apply_Wt(apply_W(v));
  }

  Vec apply_W(const Vec& v) const {  // W v = svec(R' V R)
    Vec out = Vec::Zero(m_);
    int inn = 0, ipsd = 0;
    for (const auto& r : ops_.sym()) {
      if (r.type == ConeType::NonNeg) {
        out.segment(r.off, r.len) =
            nn_w_[inn].cwiseProduct(v.segment(r.off, r.len));
        ++inn;
      } else {
        const Mat& R = psd_R_[ipsd++];
        out.segment(r.off, r.len) = svec(R.transpose() * smat(v.segment(r.off, r.len)) * R);
      }
    }
    return out;
  }

  Vec apply_Wt(const Vec& v) const {  // W' v = svec(R V R')
    Vec out = Vec::Zero(m_);
    int inn = 0, ipsd = 0;
    for (const auto& r : ops_.sym()) {
      if (r.type == ConeType::NonNeg) {
        out.segment(r.off, r.len) =
            nn_w_[inn].cwiseProduct(v.segment(r.off, r.len));
        ++inn;
      } else {
        const Mat& R = psd_R_[ipsd++];
        out.segment(r.off, r.len) = svec(R * smat(v.segment(r.off, r.len)) * R.transpose());
      }
    }
    return out;
  }

  Vec apply_Winv_t(const Vec& v) const {  // W^{-T} v = svec(R^{-1} V R^{-T})
    Vec out = Vec::Zero(m_);
    int inn = 0, ipsd = 0;
    for (const auto& r : ops_.sym()) {
      if (r.type == ConeType::NonNeg) {
        out.segment(r.off, r.len) =
            v.segment(r.off, r.len).cwiseQuotient(nn_w_[inn]);
        ++inn;
      } else {
        const Mat& Ri = psd_Rinv_[ipsd++];
        out.segment(r.off, r.len) = svec(Ri * smat(v.segment(r.off, r.len)) * Ri.transpose());
      }
    }
    return out;
  }

  /* Jordan product u o v in the scaled space. */
  Vec jordan(const Vec& u, const Vec& v) const {
    Vec out = Vec::Zero(m_);
    for (const auto& r : ops_.sym()) {
      if (r.type == ConeType::NonNeg) {
        out.segment(r.off, r.len) =
            u.segment(r.off, r.len).cwiseProduct(v.segment(r.off, r.len));
      } else {
        Mat U = smat(u.segment(r.off, r.len));
        Mat V = smat(v.segment(r.off, r.len));
        out.segment(r.off, r.len) = svec(0.5 * (U * V + V * U));
      }
    }
    return out;
  }

  /* lambda \ d : solve lambda o u = d (lambda diagonal in scaled space). */
  Vec div_lambda(const Vec& d) const {
    Vec out = Vec::Zero(m_);
    int ipsd = 0;
    for (const auto& r : ops_.sym()) {
      if (r.type == ConeType::NonNeg) {
        out.segment(r.off, r.len) =
            d.segment(r.off, r.len).cwiseQuotient(lambda_.segment(r.off, r.len));
      } else {
        const Vec& sig = psd_lam_[ipsd++];
        Mat D = smat(d.segment(r.off, r.len));
        Mat U(r.order, r.order);
        for (int i = 0; i < r.order; ++i)
          for (int j = 0; j < r.order; ++j) U(i, j) = 2.0 * D(i, j) / (sig(i) + sig(j));
        out.segment(r.off, r.len) = svec(U);
      }
    }
    return out;
  }

  /* lambda o lambda */
  Vec lambda_sq() const {
    Vec out = Vec::Zero(m_);
    int ipsd = 0;
    for (const auto& r : ops_.sym()) {
      if (r.type == ConeType::NonNeg) {
        out.segment(r.off, r.len) =
            lambda_.segment(r.off, r.len).cwiseAbs2();
      } else {
        const Vec& sig = psd_lam_[ipsd++];
        Mat L2 = sig.cwiseAbs2().asDiagonal();
        out.segment(r.off, r.len) = svec(L2);
      }
    }
    return out;
  }

 private:
  const ConeOps& ops_;
  int m_;
  std::vector<Vec> nn_w_;
  std::vector<Mat> psd_R_, psd_Rinv_;
  std::vector<Vec> psd_lam_;
  Vec lambda_;
};

/* LDL' factorization without pivoting; valid for the quasi-definite KKT
 * matrices produced here once the static regularization is applied. */
class LdlSolver {
 public:
  bool factor(const Mat& K) {
    const int N = static_cast<int>(K.rows());
    L_ = K;
    D_.resize(N);
    for (int j = 0; j < N; ++j) {
      Vec w(j);
      for (int k = 0; k < j; ++k) w(k) = L_(j, k) * D_(k);
      double dj = L_(j, j);
      if (j > 0) dj -= L_.row(j).head(j).dot(w);
      if (std::abs(dj) < 1e-300) return false;
      D_(j) = dj;
      if (j + 1 < N) {
        L_.col(j).segment(j + 1, N - j - 1) -=
            L_.block(j + 1, 0, N - j - 1, j) * w;
        L_.col(j).segment(j + 1, N - j - 1) /= dj;
      }
    }
    return true;
  }

  Vec solve(const Vec& rhs) const {
    const int N = static_cast<int>(rhs.size());
    Vec x = rhs;
    for (int j = 0; j < N; ++j)
      if (j + 1 < N) x.segment(j + 1, N - j - 1) -= x(j) * L_.col(j).segment(j + 1, N - j - 1);
    x = x.cwiseQuotient(D_);
    for (int j = N - 1; j >= 0; --j)
      if (j + 1 < N) x(j) -= L_.col(j).segment(j + 1, N - j - 1).dot(x.segment(j + 1, N - j - 1));
    return x;
  }

 private:
  Mat L_;
  Vec D_;
};

/* KKT system [P + dI, A'; A, -(H + dI)] with H = 0 on Zero rows. */
class Kkt {
 public:
  Kkt(const ConeProgram& prog, const ConeOps& ops, double reg)
      : ops_(ops), reg_(reg) {
    n_ = prog.n_vars();
    m_ = prog.n_rows();
    base_ = Mat::Zero(n_ + m_, n_ + m_);
    if (prog.P.size() > 0) base_.topLeftCorner(n_, n_) = prog.P;
    base_.topRightCorner(n_, m_) = prog.A.transpose();
    base_.bottomLeftCorner(m_, n_) = prog.A;
  }

  /* Factor with the given scaling (or identity H when scal == nullptr). */
  bool factor(const Scaling* scal) {
    K_ = base_;
    if (scal) {
      Mat H = Mat::Zero(n_ + m_, n_ + m_);
      scal->add_H(H, n_);
      K_ -= H;
    } else {
      for (const auto& r : ops_.sym())
        for (int i = 0; i < r.len; ++i) K_(n_ + r.off + i, n_ + r.off + i) -= 1.0;
    }
    exact_ = K_;
    double reg = reg_;
    for (int attempt = 0; attempt < 4; ++attempt) {
      Mat Kr = K_;
      Kr.diagonal().head(n_).array() += reg;
      Kr.diagonal().tail(m_).array() -= reg;
      if (ldl_.factor(Kr)) return true;
      reg *= 100.0;
    }
    return false;
  }

  /* Solve against the unregularized matrix with iterative refinement. */
  Vec solve(const Vec& rhs) const {
    Vec x = ldl_.solve(rhs);
    for (int it = 0; it < 2; ++it) {
      Vec r = rhs - exact_ * x;
      x += ldl_.solve(r);
    }
    return x;
  }

  int n() const { return n_; }
  int m() const { return m_; }

 private:
  const ConeOps& ops_;
  double reg_;
  int n_ = 0, m_ = 0;
  Mat base_, K_, exact_;
  LdlSolver ldl_;
};

struct Residuals {
  double pres = kInf, dres = kInf, gap = kInf, relgap = kInf;
};

/* ---- homogeneous self-dual path for linear objectives ---- */

ConeSolution solve_hsd(const ConeProgram& prog, const SolverSettings& st) {
  const int n = prog.n_vars();
  const int m = prog.n_rows();
  auto refs = layout(prog.cones);
  ConeOps ops(refs);
  const double nu = ops.degree() + 1.0;

  ConeSolution sol;

  Kkt kkt(prog, ops, st.static_reg);

  Vec x = Vec::Zero(n);
  Vec y = Vec::Zero(m);
  Vec s = Vec::Zero(m);
  double tau = 1.0, kappa = 1.0;

  // least-squares style start from the identity-scaled KKT system
  {
    if (!kkt.factor(nullptr)) {
      sol.status = SolveStatus::Numerical;
      return sol;
    }
    Vec rhs(n + m);
    rhs.head(n) = -prog.q;
    rhs.tail(m) = prog.b;
    Vec xy = kkt.solve(rhs);
    x = xy.head(n);
    y = xy.tail(m);
    if (ops.has_sym()) {
      for (const auto& r : ops.sym()) s.segment(r.off, r.len) = -y.segment(r.off, r.len);
      ops.shift_interior(s, m);
      Vec z = y;
      ops.shift_interior(z, m);
      for (const auto& r : ops.sym()) y.segment(r.off, r.len) = z.segment(r.off, r.len);
    }
  }

  const double normb = std::max(1.0, prog.b.lpNorm<Eigen::Infinity>());
  const double normq = std::max(1.0, prog.q.lpNorm<Eigen::Infinity>());

  Scaling scal(ops, m);
  double best_metric = kInf;
  ConeSolution best;

  for (int iter = 0; iter < st.max_iter; ++iter) {
    Vec rx = prog.A.transpose() * y + prog.q * tau;
    Vec rz = prog.A * x + s - prog.b * tau;
    double rtau = prog.q.dot(x) + prog.b.dot(y) + kappa;
    double mu = (ops.dot(s, y) + tau * kappa) / nu;

    // scaled convergence metrics
    Vec xh = x / tau, yh = y / tau, sh = s / tau;
    double pres = (prog.A * xh + sh - prog.b).lpNorm<Eigen::Infinity>() / normb;
    double dres = (prog.A.transpose() * yh + prog.q).lpNorm<Eigen::Infinity>() / normq;
    double pobj = prog.q.dot(xh);
    double dobj = -prog.b.dot(yh);
    double gap = ops.dot(sh, yh);
    double relgap = std::abs(pobj - dobj) / std::max(1.0, std::min(std::abs(pobj), std::abs(dobj)));

    double metric = std::max({pres, dres, std::min(gap, relgap)});
    if (metric < best_metric) {
      best_metric = metric;
      best.x = xh;
      best.y = yh;
      best.s = sh;
      best.primal_objective = pobj;
      best.dual_objective = dobj;
      best.primal_residual = pres;
      best.dual_residual = dres;
      best.duality_gap = gap;
      best.iterations = iter;
    }

    if (pres <= st.tol_feas && dres <= st.tol_feas &&
        (gap <= st.tol_gap || relgap <= st.tol_gap)) {
      best.status = SolveStatus::Optimal;
      best.iterations = iter;
      return best;
    }

    // infeasibility certificates
    double by = prog.b.dot(y);
    if (by < -1e-12) {
      Vec yc = y / (-by);
      if ((prog.A.transpose() * yc).lpNorm<Eigen::Infinity>() <=
          st.tol_feas * (1.0 + yc.lpNorm<Eigen::Infinity>())) {
        sol.status = SolveStatus::PrimalInfeasible;
        sol.y = yc;
        sol.x = Vec::Zero(n);
        sol.s = Vec::Zero(m);
        sol.iterations = iter;
        return sol;
      }
    }
    double qx = prog.q.dot(x);
    if (qx < -1e-12) {
      Vec xc = x / (-qx);
      Vec sc = s / (-qx);
      if ((prog.A * xc + sc).lpNorm<Eigen::Infinity>() <=
          st.tol_feas * (1.0 + xc.lpNorm<Eigen::Infinity>())) {
        sol.status = SolveStatus::DualInfeasible;
        sol.x = xc;
        sol.s = sc;
        sol.y = Vec::Zero(m);
        sol.iterations = iter;
        return sol;
      }
    }

    if (ops.has_sym() && !scal.compute(s, y)) {
      best.status = SolveStatus::Numerical;
      return best;
    }
    if (!kkt.factor(ops.has_sym() ? &scal : nullptr)) {
      best.status = SolveStatus::Numerical;
      return best;
    }

    Vec rhs1(n + m);
    rhs1.head(n) = -prog.q;
    rhs1.tail(m) = prog.b;
    Vec uv1 = kkt.solve(rhs1);
    Vec u1 = uv1.head(n), v1 = uv1.tail(m);
    double denom = prog.q.dot(u1) + prog.b.dot(v1) - kappa / tau;
    if (std::abs(denom) < 1e-300) {
      best.status = SolveStatus::Numerical;
      return best;
    }

    auto direction = [&](const Vec& ds, double dkap, Vec& dx, Vec& dy, Vec& dsv,
                         double& dtau, double& dkappa) {
      Vec rhs2(n + m);
      rhs2.head(n) = -rx;
      rhs2.tail(m) = -rz;
      Vec wld;
      if (ops.has_sym()) {
        wld = scal.apply_Wt(scal.div_lambda(ds));
        for (const auto& r : ops.sym())
          rhs2.segment(n + r.off, r.len) -= wld.segment(r.off, r.len);
      }
      Vec uv2 = kkt.solve(rhs2);
      Vec u2 = uv2.head(n), v2 = uv2.tail(m);
      dtau = (-rtau - prog.q.dot(u2) - prog.b.dot(v2) - dkap / tau) / denom;
      dx = u2 + dtau * u1;
      dy = v2 + dtau * v1;
      dsv = Vec::Zero(m);
      if (ops.has_sym()) {
        Vec hdz = scal.apply_H(dy);
        for (const auto& r : ops.sym())
          dsv.segment(r.off, r.len) = wld.segment(r.off, r.len) - hdz.segment(r.off, r.len);
      }
      dkappa = (dkap - kappa * dtau) / tau;
    };

    // predictor
    Vec ds_aff = -scal.lambda_sq();
    Vec dx, dy, dsv;
    double dtau, dkappa;
    direction(ds_aff, -tau * kappa, dx, dy, dsv, dtau, dkappa);

    double alpha = ops.max_step(s, dsv);
    alpha = std::min(alpha, ops.max_step(y, dy));
    if (dtau < 0.0) alpha = std::min(alpha, -tau / dtau);
    if (dkappa < 0.0) alpha = std::min(alpha, -kappa / dkappa);
    alpha = std::min(alpha, 1.0);

    double mu_aff = (ops.dot(s + alpha * dsv, y + alpha * dy) +
                     (tau + alpha * dtau) * (kappa + alpha * dkappa)) / nu;
    double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

    // corrector
    Vec corr = scal.jordan(scal.apply_Winv_t(dsv), scal.apply_W(dy));
    Vec ds_c = -scal.lambda_sq() - corr + sigma * mu * ops.identity(m);
    double dkap_c = -tau * kappa - dtau * dkappa + sigma * mu;
    direction(ds_c, dkap_c, dx, dy, dsv, dtau, dkappa);

    alpha = ops.max_step(s, dsv);
    alpha = std::min(alpha, ops.max_step(y, dy));
    if (dtau < 0.0) alpha = std::min(alpha, -tau / dtau);
    if (dkappa < 0.0) alpha = std::min(alpha, -kappa / dkappa);
    alpha = std::min(0.99 * alpha, 1.0);
    if (!std::isfinite(alpha) || alpha < 1e-13) {
      best.status = SolveStatus::Numerical;
      return best;
    }

    x += alpha * dx;
    y += alpha * dy;
    s += alpha * dsv;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
    for (const auto& r : refs)
      if (r.type == ConeType::Zero) s.segment(r.off, r.len).setZero();
  }

  best.status = SolveStatus::MaxIter;
  return best;
}

/* ---- native path for quadratic objectives (no embedding) ---- */

ConeSolution solve_qp(const ConeProgram& prog, const SolverSettings& st) {
  const int n = prog.n_vars();
  const int m = prog.n_rows();
  auto refs = layout(prog.cones);
  ConeOps ops(refs);
  const double nu = ops.degree();

  ConeSolution sol;
  Kkt kkt(prog, ops, st.static_reg);

  auto objective = [&](const Vec& xv) {
    double v = prog.q.dot(xv);
    if (prog.P.size() > 0) v += 0.5 * xv.dot(prog.P * xv);
    return v;
  };

  // equality-only case: one KKT solve
  if (!ops.has_sym()) {
    if (!kkt.factor(nullptr)) {
      sol.status = SolveStatus::Numerical;
      return sol;
    }
    Vec rhs(n + m);
    rhs.head(n) = -prog.q;
    rhs.tail(m) = prog.b;
    Vec xy = kkt.solve(rhs);
    sol.x = xy.head(n);
    sol.y = xy.tail(m);
    sol.s = Vec::Zero(m);
    sol.primal_residual =
        (prog.A * sol.x - prog.b).lpNorm<Eigen::Infinity>() /
        std::max(1.0, prog.b.lpNorm<Eigen::Infinity>());
    Vec rd = prog.q + prog.A.transpose() * sol.y;
    if (prog.P.size() > 0) rd += prog.P * sol.x;
    sol.dual_residual = rd.lpNorm<Eigen::Infinity>() / std::max(1.0, prog.q.lpNorm<Eigen::Infinity>());
    sol.duality_gap = 0.0;
    sol.primal_objective = sol.dual_objective = objective(sol.x);
    sol.status = (sol.primal_residual <= 1e2 * st.tol_feas && sol.dual_residual <= 1e2 * st.tol_feas)
                     ? SolveStatus::Optimal
                     : SolveStatus::Numerical;
    return sol;
  }

  Vec x = Vec::Zero(n);
  Vec y = Vec::Zero(m);
  Vec s = Vec::Zero(m);

  {
    if (!kkt.factor(nullptr)) {
      sol.status = SolveStatus::Numerical;
      return sol;
    }
    Vec rhs(n + m);
    rhs.head(n) = -prog.q;
    rhs.tail(m) = prog.b;
    Vec xy = kkt.solve(rhs);
    x = xy.head(n);
    y = xy.tail(m);
    for (const auto& r : ops.sym()) s.segment(r.off, r.len) = -y.segment(r.off, r.len);
    ops.shift_interior(s, m);
    Vec z = y;
    ops.shift_interior(z, m);
    for (const auto& r : ops.sym()) y.segment(r.off, r.len) = z.segment(r.off, r.len);
  }

  const double normb = std::max(1.0, prog.b.lpNorm<Eigen::Infinity>());
  const double normq = std::max(1.0, prog.q.lpNorm<Eigen::Infinity>());

  Scaling scal(ops, m);
  double best_metric = kInf;
  ConeSolution best;

  for (int iter = 0; iter < st.max_iter; ++iter) {
    Vec rx = prog.q + prog.A.transpose() * y;
    if (prog.P.size() > 0) rx += prog.P * x;
    Vec rz = prog.A * x + s - prog.b;
    double mu = ops.dot(s, y) / nu;

    double pres = rz.lpNorm<Eigen::Infinity>() / normb;
    double dres = rx.lpNorm<Eigen::Infinity>() / normq;
    double gap = ops.dot(s, y);
    double pobj = objective(x);
    double relgap = gap / std::max(1.0, std::abs(pobj));

    double metric = std::max({pres, dres, std::min(gap, relgap)});
    if (metric < best_metric) {
      best_metric = metric;
      best.x = x;
      best.y = y;
      best.s = s;
      best.primal_objective = pobj;
      best.dual_objective = pobj - gap;
      best.primal_residual = pres;
      best.dual_residual = dres;
      best.duality_gap = gap;
      best.iterations = iter;
    }

    if (pres <= st.tol_feas && dres <= st.tol_feas &&
        (gap <= st.tol_gap || relgap <= st.tol_gap)) {
      best.status = SolveStatus::Optimal;
      best.iterations = iter;
      return best;
    }

    if (!scal.compute(s, y)) {
      best.status = (best_metric < 1e-6) ? SolveStatus::MaxIter : SolveStatus::Numerical;
      return best;
    }
    if (!kkt.factor(&scal)) {
      best.status = SolveStatus::Numerical;
      return best;
    }

    auto direction = [&](const Vec& ds, Vec& dx, Vec& dy, Vec& dsv) {
      Vec rhs(n + m);
      rhs.head(n) = -rx;
      rhs.tail(m) = -rz;
      Vec wld = scal.apply_Wt(scal.div_lambda(ds));
      for (const auto& r : ops.sym())
        rhs.segment(n + r.off, r.len) -= wld.segment(r.off, r.len);
      Vec uv = kkt.solve(rhs);
      dx = uv.head(n);
      dy = uv.tail(m);
      Vec hdz = scal.apply_H(dy);
      dsv = Vec::Zero(m);
      for (const auto& r : ops.sym())
        dsv.segment(r.off, r.len) = wld.segment(r.off, r.len) - hdz.segment(r.off, r.len);
    };

    Vec dx, dy, dsv;
    direction(-scal.lambda_sq(), dx, dy, dsv);

    double alpha = std::min({ops.max_step(s, dsv), ops.max_step(y, dy), 1.0});
    double mu_aff = ops.dot(s + alpha * dsv, y + alpha * dy) / nu;
    double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

    Vec corr = scal.jordan(scal.apply_Winv_t(dsv), scal.apply_W(dy));
    Vec ds_c = -scal.lambda_sq() - corr + sigma * mu * ops.identity(m);
    direction(ds_c, dx, dy, dsv);

    alpha = std::min(0.99 * std::min(ops.max_step(s, dsv), ops.max_step(y, dy)), 1.0);
    if (!std::isfinite(alpha) || alpha < 1e-13) {
      best.status = (best_metric < 1e-6) ? SolveStatus::MaxIter : SolveStatus::Numerical;
      return best;
    }

    x += alpha * dx;
    y += alpha * dy;
    s += alpha * dsv;
  }

  best.status = SolveStatus::MaxIter;
  return best;
}

}  // namespace

ConeSolution solve(const ConeProgram& prog, const SolverSettings& settings) {
  prog.validate();

  // no constraints: closed-form or unbounded
  if (prog.n_rows() == 0) {
    ConeSolution sol;
    sol.y = Vec::Zero(0);
    sol.s = Vec::Zero(0);
    if (prog.has_quadratic()) {
      Eigen::LDLT<Mat> ldlt(prog.P);
      Vec x = ldlt.solve(-prog.q);
      if ((prog.P * x + prog.q).lpNorm<Eigen::Infinity>() <=
          1e-8 * std::max(1.0, prog.q.lpNorm<Eigen::Infinity>())) {
        sol.x = x;
        sol.status = SolveStatus::Optimal;
        sol.primal_objective = sol.dual_objective = 0.5 * x.dot(prog.P * x) + prog.q.dot(x);
      } else {
        sol.x = Vec::Zero(prog.n_vars());
        sol.status = SolveStatus::DualInfeasible;
      }
    } else if (prog.q.lpNorm<Eigen::Infinity>() == 0.0) {
      sol.x = Vec::Zero(prog.n_vars());
      sol.status = SolveStatus::Optimal;
    } else {
      sol.x = -prog.q.normalized();
      sol.status = SolveStatus::DualInfeasible;
    }
    return sol;
  }

  if (!prog.has_quadratic()) return solve_hsd(prog, settings);

  ConeSolution sol = solve_qp(prog, settings);
  if (sol.status == SolveStatus::Optimal) return sol;

  // classify failures through a feasibility probe of the constraint system
  ConeProgram probe;
  probe.q = Vec::Zero(prog.n_vars());
  probe.A = prog.A;
  probe.b = prog.b;
  probe.cones = prog.cones;
  ConeSolution feas = solve_hsd(probe, settings);
  if (feas.status == SolveStatus::PrimalInfeasible) return feas;
  return sol;
}

LpResult solve_lp(const Mat& C, const Vec& d, const Vec& q, const SolverSettings& settings) {
  ConeProgram prog;
  prog.q = q;
  prog.A = C;
  prog.b = d;
  prog.cones = {{ConeType::NonNeg, static_cast<int>(d.size())}};
  ConeSolution sol = solve(prog, settings);
  LpResult res;
  res.x = sol.x;
  switch (sol.status) {
    case SolveStatus::Optimal:
      res.status = LpStatus::Optimal;
      res.value = sol.primal_objective;
      break;
    case SolveStatus::PrimalInfeasible:
      res.status = LpStatus::Infeasible;
      break;
    case SolveStatus::DualInfeasible:
      res.status = LpStatus::Unbounded;
      break;
    default:
      res.status = LpStatus::Error;
      break;
  }
  return res;
}

std::string serialize_program(const ConeProgram& prog) {
  nlohmann::json j;
  auto mat_to_json = [](const Mat& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < M.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < M.cols(); ++c) row.push_back(M(i, c));
      rows.push_back(row);
    }
    return rows;
  };
  auto vec_to_json = [](const Vec& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
  };
  j["n_vars"] = prog.n_vars();
  j["P"] = mat_to_json(prog.P);
  j["q"] = vec_to_json(prog.q);
  j["A"] = mat_to_json(prog.A);
  j["b"] = vec_to_json(prog.b);
  nlohmann::json cones = nlohmann::json::array();
  for (const auto& c : prog.cones) {
    const char* t = c.type == ConeType::Zero ? "zero"
                    : c.type == ConeType::NonNeg ? "nonneg"
                                                 : "psd";
    cones.push_back({{"type", t}, {"dim", c.dim}});
  }
  j["cones"] = cones;
  return j.dump();
}

ConeProgram parse_program(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  auto mat_from_json = [](const nlohmann::json& rows) {
    if (rows.empty()) return Mat(0, 0);
    Mat M(rows.size(), rows[0].size());
    for (size_t i = 0; i < rows.size(); ++i)
      for (size_t c = 0; c < rows[i].size(); ++c) M(i, c) = rows[i][c].get<double>();
    return M;
  };
  auto vec_from_json = [](const nlohmann::json& arr) {
    Vec v(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<double>();
    return v;
  };
  ConeProgram prog;
  prog.P = mat_from_json(j.at("P"));
  prog.q = vec_from_json(j.at("q"));
  prog.A = mat_from_json(j.at("A"));
  prog.b = vec_from_json(j.at("b"));
  if (prog.A.size() == 0) prog.A = Mat(prog.b.size(), prog.q.size());
  for (const auto& c : j.at("cones")) {
    std::string t = c.at("type").get<std::string>();
    ConeType ct = t == "zero" ? ConeType::Zero : t == "nonneg" ? ConeType::NonNeg : ConeType::Psd;
    prog.cones.push_back({ct, c.at("dim").get<int>()});
  }
  return prog;
}

}  // namespace drmpc::conic
