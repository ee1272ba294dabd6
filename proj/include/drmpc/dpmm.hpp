#pragma once

#include <drmpc/polytope.hpp>

#include <vector>

namespace drmpc::dpmm {

// Normal-Wishart base measure plus stick-breaking concentration.
struct NwPrior {
  Vec theta0;
  double lambda0 = 0.01;
  double omega0 = 0.0;
  Mat Psi0;
  double alpha = 1.0;
  int Kmax = 20;

  int dim() const { return static_cast<int>(theta0.size()); }
  void validate() const;
  static NwPrior defaults(int n);
};

// Summarized block of samples: count, sum of samples, sum of outer products.
struct Clump {
  double count = 0.0;
  Vec sum;
  Mat sumsq;
};

// Variational factors of one mixture component: stick Beta(a, b) and
// Normal-Wishart(theta, lambda, omega, Psi^{-1}).
struct Component {
  double a = 1.0;
  double b = 1.0;
  Vec theta;
  double lambda = 0.0;
  double omega = 0.0;
  Mat Psi;
};

struct Posterior {
  NwPrior prior;
  std::vector<Component> comp;   // size Kmax
  std::vector<Clump> clumps;     // clumps[k] belongs to comp[k]; count 0 = none
  std::vector<Vec> singlets;     // raw samples pending compression
  Vec Nk;                        // responsibility-weighted counts per component
  bool seeded = false;
  std::vector<double> last_elbo; // evidence lower bound trace of the last observe
  int last_sweeps = 0;

  int dim() const { return prior.dim(); }
  double represented_count() const;
};

Posterior init(const NwPrior& prior);

// Coordinate-ascent variational sweeps over current clumps + singlets + batch
// until the evidence lower bound changes by <= 1e-6 or 50 sweeps. The batch is
// retained as singlets; cost is independent of the total historical count.
void observe(Posterior& post, const std::vector<Vec>& batch);

// Merges every singlet whose maximum responsibility is >= 0.95 into the clump
// of its dominant component. Total represented count is conserved exactly.
void compress(Posterior& post);

// Moment parameterization of the learned mixture.
struct MixtureEstimate {
  int m = 0;
  Vec gamma;
  std::vector<Vec> mu;
  std::vector<Mat> Sigma;
};

// Expected stick weights with the tail folded into the last populated
// component, components with negligible weight or population pruned
// (single prior-moment component if none survive), means radially shrunk
// toward theta0 until strictly inside W, covariances from the
// inverse-Wishart mean (Psi/omega fallback for small degrees of freedom)
// with eigenvalues floored at 1e-8.
MixtureEstimate extract(const Posterior& post, const poly::HPolytope& W);

double digamma(double x);

}  // namespace drmpc::dpmm
