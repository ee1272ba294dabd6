#include <drmpc/dpmm.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace drmpc::dpmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_det(const Mat& M) {
  Eigen::LLT<Mat> llt(M);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("dpmm: scale matrix lost positive definiteness");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

double lmvgamma(int n, double a) {
  double r = 0.25 * n * (n - 1) * std::log(M_PI);
  for (int i = 1; i <= n; ++i) r += std::lgamma(a + 0.5 * (1 - i));
  return r;
}

double kl_beta(double a, double b, double a0, double b0) {
  auto logB = [](double x, double y) {
    return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y);
  };
  return logB(a0, b0) - logB(a, b) + (a - a0) * digamma(a) +
         (b - b0) * digamma(b) - (a + b - a0 - b0) * digamma(a + b);
}

// KL of NW(theta1,lambda1,omega1,Psi1^{-1}) from NW(theta0,lambda0,omega0,Psi0^{-1}).
double kl_nw(const Component& q, const NwPrior& p) {
  const int n = p.dim();
  Eigen::LLT<Mat> llt(q.Psi);
  Mat Psinv = llt.solve(Mat::Identity(n, n));
  double logdet_q = log_det(q.Psi);
  double elogdet = n * std::log(2.0) - logdet_q;
  for (int i = 1; i <= n; ++i) elogdet += digamma(0.5 * (q.omega + 1 - i));

  Vec d = q.theta - p.theta0;
  double gauss = 0.5 * (p.lambda0 * q.omega * d.dot(Psinv * d) +
                        n * p.lambda0 / q.lambda - n +
                        n * std::log(q.lambda / p.lambda0));

  double lnZ0 = 0.5 * p.omega0 * n * std::log(2.0) -
                0.5 * p.omega0 * log_det(p.Psi0) + lmvgamma(n, 0.5 * p.omega0);
  double lnZ1 = 0.5 * q.omega * n * std::log(2.0) - 0.5 * q.omega * logdet_q +
                lmvgamma(n, 0.5 * q.omega);
  double wish = lnZ0 - lnZ1 + 0.5 * (q.omega - p.omega0) * elogdet -
                0.5 * (q.omega * n - q.omega * (p.Psi0 * Psinv).trace());
  return gauss + wish;
}

struct Cache {
  Vec Elogpi;
  Vec Elogdet;
  std::vector<Mat> Psinv;
  std::vector<Vec> Psinv_theta;
  Vec theta_quad;
};

Cache build_cache(const Posterior& post) {
  const int K = post.prior.Kmax;
  const int n = post.dim();
  Cache c;
  c.Elogpi.resize(K);
  c.Elogdet.resize(K);
  c.theta_quad.resize(K);
  c.Psinv.resize(K);
  c.Psinv_theta.resize(K);
  double cum = 0.0;
  for (int k = 0; k < K; ++k) {
    const Component& q = post.comp[k];
    double elogb = digamma(q.a) - digamma(q.a + q.b);
    double elog1mb = digamma(q.b) - digamma(q.a + q.b);
    c.Elogpi(k) = cum + elogb;
    cum += elog1mb;

    Eigen::LLT<Mat> llt(q.Psi);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("dpmm: scale matrix lost positive definiteness");
    c.Psinv[k] = llt.solve(Mat::Identity(n, n));
    c.Psinv_theta[k] = c.Psinv[k] * q.theta;
    c.theta_quad(k) = q.theta.dot(c.Psinv_theta[k]);
    double elogdet = n * std::log(2.0) - log_det(q.Psi);
    for (int i = 1; i <= n; ++i) elogdet += digamma(0.5 * (q.omega + 1 - i));
    c.Elogdet(k) = elogdet;
  }
  return c;
}

Vec softmax_inplace(Vec& logr, double* lse_out) {
  double mx = logr.maxCoeff();
  Vec ex = (logr.array() - mx).exp();
  double s = ex.sum();
  if (lse_out) *lse_out = mx + std::log(s);
  return ex / s;
}

Vec singlet_logr(const Posterior& post, const Cache& c, const Vec& w) {
  const int K = post.prior.Kmax;
  const int n = post.dim();
  Vec logr(K);
  for (int k = 0; k < K; ++k) {
    const Component& q = post.comp[k];
    double quad = w.dot(c.Psinv[k] * w) - 2.0 * w.dot(c.Psinv_theta[k]) +
                  c.theta_quad(k);
    logr(k) = c.Elogpi(k) + 0.5 * c.Elogdet(k) - 0.5 * n * kLog2Pi -
              0.5 * (n / q.lambda + q.omega * quad);
  }
  return logr;
}

Vec clump_logr(const Posterior& post, const Cache& c, const Clump& cl) {
  const int K = post.prior.Kmax;
  const int n = post.dim();
  Vec logr(K);
  for (int k = 0; k < K; ++k) {
    const Component& q = post.comp[k];
    double quad = (c.Psinv[k] * cl.sumsq).trace() -
                  2.0 * cl.sum.dot(c.Psinv_theta[k]) +
                  cl.count * c.theta_quad(k);
    logr(k) = cl.count * (c.Elogpi(k) + 0.5 * c.Elogdet(k) -
                          0.5 * n * kLog2Pi - 0.5 * n / q.lambda) -
              0.5 * q.omega * quad;
  }
  return logr;
}

struct SuffStats {
  Vec Nk;
  std::vector<Vec> sk;
  std::vector<Mat> Qk;
  double lse_sum = 0.0;
};

SuffStats e_step(const Posterior& post, const Cache& c) {
  const int K = post.prior.Kmax;
  const int n = post.dim();
  SuffStats st;
  st.Nk = Vec::Zero(K);
  st.sk.assign(K, Vec::Zero(n));
  st.Qk.assign(K, Mat::Zero(n, n));
  for (const Vec& w : post.singlets) {
    Vec logr = singlet_logr(post, c, w);
    double lse;
    Vec r = softmax_inplace(logr, &lse);
    st.lse_sum += lse;
    st.Nk += r;
    Mat ww = w * w.transpose();
    for (int k = 0; k < K; ++k) {
      st.sk[k] += r(k) * w;
      st.Qk[k] += r(k) * ww;
    }
  }
  for (const Clump& cl : post.clumps) {
    if (cl.count <= 0.0) continue;
    Vec logr = clump_logr(post, c, cl);
    double lse;
    Vec r = softmax_inplace(logr, &lse);
    st.lse_sum += lse;
    st.Nk += cl.count * r;
    for (int k = 0; k < K; ++k) {
      st.sk[k] += r(k) * cl.sum;
      st.Qk[k] += r(k) * cl.sumsq;
    }
  }
  return st;
}

void m_step(Posterior& post, const SuffStats& st) {
  const int K = post.prior.Kmax;
  const NwPrior& p = post.prior;
  for (int k = 0; k < K; ++k) {
    Component& q = post.comp[k];
    double N = st.Nk(k);
    q.lambda = p.lambda0 + N;
    q.omega = p.omega0 + N;
    q.theta = (p.lambda0 * p.theta0 + st.sk[k]) / q.lambda;
    if (N > 1e-12) {
      Vec wbar = st.sk[k] / N;
      Mat scatter = st.Qk[k] - st.sk[k] * wbar.transpose();
      Vec d = wbar - p.theta0;
      Mat Psi = p.Psi0 + scatter +
                (p.lambda0 * N / q.lambda) * (d * d.transpose());
      q.Psi = 0.5 * (Psi + Psi.transpose());
    } else {
      q.Psi = p.Psi0;
    }
  }
  double suffix = 0.0;
  for (int k = K - 1; k >= 0; --k) {
    post.comp[k].a = 1.0 + st.Nk(k);
    post.comp[k].b = p.alpha + suffix;
    suffix += st.Nk(k);
  }
  post.Nk = st.Nk;
}

double elbo_kl(const Posterior& post) {
  double kl = 0.0;
  for (const Component& q : post.comp) {
    kl += kl_beta(q.a, q.b, 1.0, post.prior.alpha);
    kl += kl_nw(q, post.prior);
  }
  return kl;
}

// Greedy farthest-point seeds over the first batch; component means start at
// spread-out samples so coordinate ascent can separate modes deterministically.
void seed_components(Posterior& post, const std::vector<Vec>& batch) {
  const int K = post.prior.Kmax;
  if (batch.empty() || K < 2) return;
  Vec mean = Vec::Zero(post.dim());
  for (const Vec& w : batch) mean += w;
  mean /= static_cast<double>(batch.size());

  auto lex_less = [](const Vec& a, const Vec& b) {
    for (int i = 0; i < a.size(); ++i) {
      if (a(i) < b(i)) return true;
      if (a(i) > b(i)) return false;
    }
    return false;
  };

  std::vector<Vec> seeds;
  std::vector<double> gaps;
  size_t first = 0;
  for (size_t i = 1; i < batch.size(); ++i) {
    double di = (batch[i] - mean).norm();
    double df = (batch[first] - mean).norm();
    if (di > df + 1e-12 ||
        (std::abs(di - df) <= 1e-12 && lex_less(batch[i], batch[first])))
      first = i;
  }
  seeds.push_back(batch[first]);
  std::vector<double> mind(batch.size());
  for (size_t i = 0; i < batch.size(); ++i)
    mind[i] = (batch[i] - seeds[0]).norm();
  while (static_cast<int>(seeds.size()) < K) {
    size_t best = 0;
    for (size_t i = 1; i < batch.size(); ++i) {
      if (mind[i] > mind[best] + 1e-12 ||
          (std::abs(mind[i] - mind[best]) <= 1e-12 &&
           lex_less(batch[i], batch[best])))
        best = i;
    }
    if (mind[best] <= 1e-12) break;
    gaps.push_back(mind[best]);
    seeds.push_back(batch[best]);
    for (size_t i = 0; i < batch.size(); ++i)
      mind[i] = std::min(mind[i], (batch[i] - seeds.back()).norm());
  }
  // Keep seeds whose separation is at least half the dominant gap; the rest
  // are fringe points of an already-represented mode.
  int keep = 1;
  if (!gaps.empty()) {
    double d1 = gaps[0];
    for (double g : gaps) {
      if (g >= 0.5 * d1)
        ++keep;
      else
        break;
    }
  }
  for (int k = 0; k < keep && k < static_cast<int>(seeds.size()); ++k)
    post.comp[k].theta = seeds[k];
}

void check_batch(const Posterior& post, const std::vector<Vec>& batch) {
  for (const Vec& w : batch) {
    if (w.size() != post.dim())
      throw std::invalid_argument("dpmm: sample dimension mismatch");
    if (!w.allFinite())
      throw std::invalid_argument("dpmm: non-finite sample");
  }
}

}  // namespace

double digamma(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("digamma: x must be positive");
  double r = 0.0;
  while (x < 10.0) {
    r -= 1.0 / x;
    x += 1.0;
  }
  double f = 1.0 / (x * x);
  return r + std::log(x) - 0.5 / x -
         f * (1.0 / 12 -
              f * (1.0 / 120 -
                   f * (1.0 / 252 -
                        f * (1.0 / 240 - f * (1.0 / 132 - f * 691.0 / 32760)))));
}

void NwPrior::validate() const {
  const int n = dim();
  if (n < 1) throw std::invalid_argument("prior: theta0 must be nonempty");
  if (!(lambda0 > 0)) throw std::invalid_argument("prior: lambda0 must be > 0");
  if (!(omega0 > n - 1))
    throw std::invalid_argument("prior: omega0 must exceed n - 1");
  if (!(alpha > 0)) throw std::invalid_argument("prior: alpha must be > 0");
  if (Kmax < 1) throw std::invalid_argument("prior: Kmax must be >= 1");
  if (Psi0.rows() != n || Psi0.cols() != n)
    throw std::invalid_argument("prior: Psi0 must be n x n");
  if ((Psi0 - Psi0.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("prior: Psi0 must be symmetric");
  Eigen::LLT<Mat> llt(Psi0);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("prior: Psi0 must be positive definite");
}

NwPrior NwPrior::defaults(int n) {
  NwPrior p;
  p.theta0 = Vec::Zero(n);
  p.lambda0 = 0.01;
  p.omega0 = n + 2;
  p.Psi0 = 0.01 * Mat::Identity(n, n);
  p.alpha = 1.0;
  p.Kmax = 20;
  return p;
}

double Posterior::represented_count() const {
  double c = static_cast<double>(singlets.size());
  for (const Clump& cl : clumps) c += cl.count;
  return c;
}

Posterior init(const NwPrior& prior) {
  prior.validate();
  Posterior post;
  post.prior = prior;
  const int n = prior.dim();
  Component base;
  base.a = 1.0;
  base.b = prior.alpha;
  base.theta = prior.theta0;
  base.lambda = prior.lambda0;
  base.omega = prior.omega0;
  base.Psi = prior.Psi0;
  post.comp.assign(prior.Kmax, base);
  Clump empty;
  empty.count = 0.0;
  empty.sum = Vec::Zero(n);
  empty.sumsq = Mat::Zero(n, n);
  post.clumps.assign(prior.Kmax, empty);
  post.Nk = Vec::Zero(prior.Kmax);
  return post;
}

void observe(Posterior& post, const std::vector<Vec>& batch) {
  if (batch.empty()) return;
  check_batch(post, batch);
  if (!post.seeded && post.represented_count() == 0.0)
    seed_components(post, batch);
  post.seeded = true;
  post.singlets.insert(post.singlets.end(), batch.begin(), batch.end());

  post.last_elbo.clear();
  post.last_sweeps = 0;
  double prev = -std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < 50; ++sweep) {
    Cache c = build_cache(post);
    SuffStats st = e_step(post, c);
    double elbo = st.lse_sum - elbo_kl(post);
    post.last_elbo.push_back(elbo);
    ++post.last_sweeps;
    m_step(post, st);
    if (std::abs(elbo - prev) <= 1e-6) break;
    prev = elbo;
  }
}

void compress(Posterior& post) {
  if (post.singlets.empty()) return;
  Cache c = build_cache(post);
  std::vector<Vec> kept;
  for (const Vec& w : post.singlets) {
    Vec logr = singlet_logr(post, c, w);
    Vec r = softmax_inplace(logr, nullptr);
    int k;
    double rmax = r.maxCoeff(&k);
    if (rmax >= 0.95) {
      Clump& cl = post.clumps[k];
      cl.count += 1.0;
      cl.sum += w;
      cl.sumsq += w * w.transpose();
    } else {
      kept.push_back(w);
    }
  }
  post.singlets.swap(kept);
}

MixtureEstimate extract(const Posterior& post, const poly::HPolytope& W) {
  const int K = post.prior.Kmax;
  const int n = post.dim();
  if (W.dim() != n) throw std::invalid_argument("extract: W dimension mismatch");
  poly::HPolytope Ws{W.C, (1.0 - 1e-6) * W.d};
  if (!poly::contains(Ws, post.prior.theta0, 0.0))
    throw std::invalid_argument("extract: theta0 must lie inside the support");

  auto shrink_into = [&](const Vec& theta) {
    if (poly::contains(Ws, theta, 0.0)) return theta;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      Vec cand = post.prior.theta0 + mid * (theta - post.prior.theta0);
      if (poly::contains(Ws, cand, 0.0))
        lo = mid;
      else
        hi = mid;
    }
    return Vec(post.prior.theta0 + lo * (theta - post.prior.theta0));
  };

  auto floor_psd = [&](const Mat& S) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()));
    Vec lam = es.eigenvalues().cwiseMax(1e-8);
    return Mat(es.eigenvectors() * lam.asDiagonal() *
               es.eigenvectors().transpose());
  };

  Vec gamma(K);
  double stick = 1.0;
  for (int k = 0; k < K; ++k) {
    const Component& q = post.comp[k];
    double ebar = q.a / (q.a + q.b);
    gamma(k) = stick * ebar;
    stick *= 1.0 - ebar;
  }
  int last_pop = -1;
  for (int k = 0; k < K; ++k)
    if (post.Nk(k) >= 1e-6) last_pop = k;
  if (last_pop >= 0) gamma(last_pop) += stick;

  MixtureEstimate mix;
  for (int k = 0; k < K; ++k) {
    if (post.Nk(k) < 1e-6 || gamma(k) < 1e-3) continue;
    const Component& q = post.comp[k];
    mix.mu.push_back(shrink_into(q.theta));
    Mat S = q.omega > n + 1 ? Mat(q.Psi / (q.omega - n - 1)) : Mat(q.Psi / q.omega);
    mix.Sigma.push_back(floor_psd(S));
    mix.gamma.conservativeResize(mix.gamma.size() + 1);
    mix.gamma(mix.gamma.size() - 1) = gamma(k);
  }
  if (mix.mu.empty()) {
    mix.mu.push_back(shrink_into(post.prior.theta0));
    Mat S = post.prior.omega0 > n + 1
                ? Mat(post.prior.Psi0 / (post.prior.omega0 - n - 1))
                : Mat(post.prior.Psi0 / post.prior.omega0);
    mix.Sigma.push_back(floor_psd(S));
    mix.gamma = Vec::Ones(1);
  }
  mix.gamma /= mix.gamma.sum();
  mix.m = static_cast<int>(mix.mu.size());
  return mix;
}

}  // namespace drmpc::dpmm
