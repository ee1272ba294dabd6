#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace drmpc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace regulator {

// Linear plant x+ = Ax + Bu with quadratic stage weights.
struct Plant {
  Mat A;
  Mat B;
  Mat Q;
  Mat R;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }

  // Throws std::invalid_argument on dimension mismatch, asymmetric or
  // indefinite weights, unstabilizable (A,B) or undetectable (A, Q^{1/2}).
  void validate() const;
};

struct Regulator {
  Mat K;         // m x n feedback gain, u = Kx optimal for the plant
  Mat P;         // Riccati solution
  Mat Phi;       // A + BK
  Mat PsiTilde;  // R + B'PB
  int iterations = 0;
};

struct NoConvergence : std::runtime_error {
  explicit NoConvergence(const std::string& msg) : std::runtime_error(msg) {}
};

struct Unstabilizable : std::runtime_error {
  explicit Unstabilizable(const std::string& msg) : std::runtime_error(msg) {}
};

double spectral_radius(const Mat& M);

// Symmetric PSD square root via eigendecomposition, negative eigenvalues
// clipped to zero.
Mat psd_sqrt(const Mat& M);

// Riccati fixed-point iteration from P0 = Q until the successive-iterate
// infinity norm drops below tol. Certifies the Riccati residual, the
// Lyapunov identity Phi'P Phi + Q + K'RK = P and spectral_radius(Phi) < 1
// before returning.
Regulator synthesize(const Plant& plant, double tol = 1e-12,
                     int max_iter = 10000);

// Cost of a stacked perturbation sequence c = (c_0; ...; c_{N-1}),
// sum_l c_l' PsiTilde c_l. c.size() must be a multiple of m.
double finite_horizon_cost(const Regulator& reg, const Vec& c);

}  // namespace regulator
}  // namespace drmpc
