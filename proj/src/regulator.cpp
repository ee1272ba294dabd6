#include <drmpc/regulator.hpp>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace drmpc::regulator {

namespace {

bool is_symmetric(const Mat& M, double tol) {
  if (M.rows() != M.cols()) return false;
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= tol;
}

// PBH test: rank [lam*I - A, B] (stabilizability) resp. [lam*I - A; C]
// (detectability) must be n at every eigenvalue of A on or outside the unit
// circle. Rank threshold 1e-10 relative to the largest singular value.
bool pbh_full_rank(const Eigen::MatrixXcd& M, int n) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return n == 0;
  double thresh = 1e-10 * sv(0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) ++rank;
  return rank >= n;
}

}  // namespace

double spectral_radius(const Mat& M) {
  if (M.rows() == 0) return 0.0;
  Eigen::EigenSolver<Mat> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Mat psd_sqrt(const Mat& M) {
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  Vec lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

void Plant::validate() const {
  const int nn = n();
  const int mm = m();
  if (A.rows() != A.cols()) throw std::invalid_argument("plant: A must be square");
  if (B.rows() != nn || mm < 1)
    throw std::invalid_argument("plant: B must be n x m with m >= 1");
  if (Q.rows() != nn || Q.cols() != nn)
    throw std::invalid_argument("plant: Q must be n x n");
  if (R.rows() != mm || R.cols() != mm)
    throw std::invalid_argument("plant: R must be m x m");
  if (!A.allFinite() || !B.allFinite() || !Q.allFinite() || !R.allFinite())
    throw std::invalid_argument("plant: matrices must be finite");
  if (!is_symmetric(Q, 1e-10 * std::max(1.0, Q.cwiseAbs().maxCoeff())))
    throw std::invalid_argument("plant: Q must be symmetric");
  if (!is_symmetric(R, 1e-10 * std::max(1.0, R.cwiseAbs().maxCoeff())))
    throw std::invalid_argument("plant: R must be symmetric");
  {
    Eigen::SelfAdjointEigenSolver<Mat> es(Q);
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
      throw std::invalid_argument("plant: Q must be positive semidefinite");
  }
  {
    Eigen::SelfAdjointEigenSolver<Mat> es(R);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw std::invalid_argument("plant: R must be positive definite");
  }

  Eigen::EigenSolver<Mat> es(A, false);
  Mat C = psd_sqrt(Q);
  for (int i = 0; i < nn; ++i) {
    std::complex<double> lam = es.eigenvalues()(i);
    if (std::abs(lam) < 1.0 - 1e-12) continue;
    Eigen::MatrixXcd lamI = lam * Eigen::MatrixXcd::Identity(nn, nn);
    Eigen::MatrixXcd stab(nn, nn + mm);
    stab << lamI - A.cast<std::complex<double>>(), B.cast<std::complex<double>>();
    if (!pbh_full_rank(stab, nn)) {
      std::ostringstream os;
      os << "plant: (A,B) not stabilizable at eigenvalue " << lam;
      throw std::invalid_argument(os.str());
    }
    Eigen::MatrixXcd det(2 * nn, nn);
    det << lamI - A.cast<std::complex<double>>(), C.cast<std::complex<double>>();
    if (!pbh_full_rank(det, nn)) {
      std::ostringstream os;
      os << "plant: (A, Q^{1/2}) not detectable at eigenvalue " << lam;
      throw std::invalid_argument(os.str());
    }
  }
}

Regulator synthesize(const Plant& plant, double tol, int max_iter) {
  plant.validate();
  const Mat& A = plant.A;
  const Mat& B = plant.B;
  const Mat& Q = plant.Q;
  const Mat& R = plant.R;

  Mat P = Q;
  int iters = 0;
  bool converged = false;
  while (iters < max_iter) {
    ++iters;
    Mat BtP = B.transpose() * P;
    Mat S = R + BtP * B;
    Mat Pn = A.transpose() * P * A -
             (BtP * A).transpose() * S.ldlt().solve(BtP * A) + Q;
    Pn = 0.5 * (Pn + Pn.transpose());
    double diff = (Pn - P).cwiseAbs().maxCoeff();
    P = Pn;
    if (diff <= tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw NoConvergence("riccati iteration did not converge within " +
                        std::to_string(max_iter) + " iterations");

  Regulator reg;
  reg.P = P;
  Mat S = R + B.transpose() * P * B;
  reg.PsiTilde = 0.5 * (S + S.transpose());
  reg.K = -S.ldlt().solve(B.transpose() * P * A);
  reg.Phi = A + B * reg.K;
  reg.iterations = iters;

  double rho = spectral_radius(reg.Phi);
  if (rho >= 1.0)
    throw Unstabilizable("closed loop spectral radius " + std::to_string(rho));

  double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
  Mat riccati = A.transpose() * P * A -
                (B.transpose() * P * A).transpose() *
                    S.ldlt().solve(B.transpose() * P * A) +
                Q - P;
  if (riccati.cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw NoConvergence("riccati residual above tolerance");
  Mat lyap = reg.Phi.transpose() * P * reg.Phi + Q +
             reg.K.transpose() * R * reg.K - P;
  if (lyap.cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw NoConvergence("lyapunov identity residual above tolerance");

  return reg;
}

double finite_horizon_cost(const Regulator& reg, const Vec& c) {
  const int m = static_cast<int>(reg.PsiTilde.rows());
  if (!c.allFinite())
    throw std::invalid_argument("finite_horizon_cost: c must be finite");
  if (c.size() % m != 0)
    throw std::invalid_argument(
        "finite_horizon_cost: c length must be a multiple of the input dimension");
  double J = 0.0;
  for (int l = 0; l * m < c.size(); ++l) {
    Vec cl = c.segment(l * m, m);
    J += cl.dot(reg.PsiTilde * cl);
  }
  return J;
}

}  // namespace drmpc::regulator
