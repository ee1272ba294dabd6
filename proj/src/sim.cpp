#include <drmpc/sim.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

namespace drmpc::sim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::uint64_t Rng::next() {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

Rng run_stream(std::uint64_t seed, int run) {
  Rng root{seed};
  std::uint64_t s = root.next();
  for (int i = 0; i < run; ++i) s = root.next();
  return Rng{s};
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

double norm_ppf(double p) {
  p = std::min(std::max(p, 1e-300), 1.0 - 1e-16);

  // Acklam's rational approximation.
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;

  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley refinement; skipped deep in the tails where exp overflows.
  if (std::abs(x) < 8.0) {
    double e = norm_cdf(x) - p;
    double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

void DisturbanceSpec::validate(int n) const {
  if (comps.empty()) throw std::invalid_argument("disturbance spec has no components");
  double total = 0.0;
  for (const auto& c : comps) {
    if (!(c.weight > 0.0)) throw std::invalid_argument("component weight must be positive");
    if (c.mu.size() != n || c.sigma.size() != n)
      throw std::invalid_argument("component dimension mismatch");
    for (int i = 0; i < n; ++i)
      if (!(c.sigma(i) >= 0.0)) throw std::invalid_argument("component sigma must be >= 0");
    total += c.weight;
  }
  if (!(total > 0.0)) throw std::invalid_argument("weights must sum to a positive value");
}

namespace {

struct BoxBounds {
  bool is_box = false;
  Vec lo, hi;
};

// Per-dimension bounds when every constraint row touches a single coordinate.
BoxBounds box_of(const poly::HPolytope& W) {
  const int n = W.dim();
  BoxBounds bb;
  bb.lo = Vec::Constant(n, -kInf);
  bb.hi = Vec::Constant(n, kInf);
  for (int r = 0; r < W.rows(); ++r) {
    int nz = -1;
    for (int i = 0; i < n; ++i) {
      if (W.C(r, i) != 0.0) {
        if (nz >= 0) return bb;  // two coordinates in one row
        nz = i;
      }
    }
    if (nz < 0) continue;  // 0 <= d, vacuous for a nonempty set
    double coef = W.C(r, nz);
    double bound = W.d(r) / coef;
    if (coef > 0.0)
      bb.hi(nz) = std::min(bb.hi(nz), bound);
    else
      bb.lo(nz) = std::max(bb.lo(nz), bound);
  }
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(bb.lo(i)) || !std::isfinite(bb.hi(i))) return bb;
  bb.is_box = true;
  return bb;
}

int pick_component(const DisturbanceSpec& spec, Rng& rng) {
  double total = 0.0;
  for (const auto& c : spec.comps) total += c.weight;
  double u = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t j = 0; j < spec.comps.size(); ++j) {
    acc += spec.comps[j].weight;
    if (u < acc) return static_cast<int>(j);
  }
  return static_cast<int>(spec.comps.size()) - 1;
}

double trunc_normal(double mu, double sigma, double lo, double hi, Rng& rng) {
  if (sigma <= 0.0) return std::min(std::max(mu, lo), hi);
  double a = norm_cdf((lo - mu) / sigma);
  double b = norm_cdf((hi - mu) / sigma);
  if (!(b - a > 0.0)) return std::min(std::max(mu, lo), hi);
  double p = a + rng.uniform() * (b - a);
  double w = mu + sigma * norm_ppf(p);
  return std::min(std::max(w, lo), hi);
}

Vec draw_in_bounds(const DisturbanceSpec& spec, const BoxBounds& bb, Rng& rng) {
  const auto& c = spec.comps[pick_component(spec, rng)];
  Vec w(c.mu.size());
  for (int i = 0; i < w.size(); ++i)
    w(i) = trunc_normal(c.mu(i), c.sigma(i), bb.lo(i), bb.hi(i), rng);
  return w;
}

// Pulls w toward the box center until every row holds with zero slack
// tolerance; needed when rows are scaled so that C * clamp(w) rounds above d.
Vec exactify(const poly::HPolytope& W, const BoxBounds& bb, Vec w) {
  Vec mid = 0.5 * (bb.lo + bb.hi);
  for (int it = 0; it < 64; ++it) {
    if (poly::contains(W, w, 0.0)) return w;
    w = mid + (w - mid) * (1.0 - std::ldexp(1e-15, it));
  }
  if (poly::contains(W, mid, 0.0)) return mid;
  throw std::logic_error("failed to produce a point inside the support set");
}

}  // namespace

Vec sample_disturbance(const DisturbanceSpec& spec, const poly::HPolytope& W, Rng& rng) {
  spec.validate(W.dim());
  BoxBounds bb = box_of(W);
  if (bb.is_box) return exactify(W, bb, draw_in_bounds(spec, bb, rng));

  // Not an axis-aligned box: rejection from the bounding box.
  BoxBounds outer;
  const int n = W.dim();
  outer.lo = Vec(n);
  outer.hi = Vec(n);
  for (int i = 0; i < n; ++i) {
    Vec e = Vec::Zero(n);
    e(i) = 1.0;
    outer.hi(i) = poly::support(W, e);
    outer.lo(i) = -poly::support(W, -e);
    if (!std::isfinite(outer.lo(i)) || !std::isfinite(outer.hi(i)))
      throw UnsupportedSupport("support set is unbounded");
  }
  for (int tries = 0; tries < 100000; ++tries) {
    Vec w = draw_in_bounds(spec, outer, rng);
    if (poly::contains(W, w, 0.0)) return w;
  }
  throw UnsupportedSupport("rejection sampling exhausted 1e5 tries on a non-box support");
}

dpmm::MixtureEstimate global_moment_baseline(const std::vector<Vec>& samples,
                                             const poly::HPolytope& W) {
  if (samples.size() < 2) throw TooFewSamples("moment baseline needs at least two samples");
  const int n = W.dim();
  const double N = static_cast<double>(samples.size());
  Vec mean = Vec::Zero(n);
  for (const auto& s : samples) {
    if (s.size() != n) throw std::invalid_argument("sample dimension mismatch");
    mean += s;
  }
  mean /= N;
  Mat cov = Mat::Zero(n, n);
  for (const auto& s : samples) cov += (s - mean) * (s - mean).transpose();
  cov /= (N - 1.0);

  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  Vec ev = eig.eigenvalues().cwiseMax(1e-8);
  cov = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();

  if (!poly::contains(W, mean, 0.0)) {
    // Euclidean projection onto W.
    conic::ConeProgram prog;
    prog.P = 2.0 * Mat::Identity(n, n);
    prog.q = -2.0 * mean;
    prog.A = W.C;
    prog.b = W.d;
    prog.cones = {{conic::ConeType::NonNeg, W.rows()}};
    conic::SolverSettings st;
    auto sol = conic::solve(prog, st);
    bool usable = sol.status == conic::SolveStatus::Optimal ||
                  (sol.x.size() == n && sol.primal_residual <= 1e-6 && sol.dual_residual <= 1e-6);
    if (!usable) throw std::runtime_error("projection of the sample mean failed");
    mean = sol.x;
    for (int it = 0; it < 10000 && !poly::contains(W, mean, 0.0); ++it) mean *= 0.999999;
    if (!poly::contains(W, mean, 1e-9))
      throw std::runtime_error("projected mean is not inside the support set");
  }

  dpmm::MixtureEstimate est;
  est.m = 1;
  est.gamma = Vec::Ones(1);
  est.mu = {mean};
  est.Sigma = {cov};
  return est;
}

std::string to_string(ControllerMode mode) {
  switch (mode) {
    case ControllerMode::OnlineLearning: return "online_learning";
    case ControllerMode::GlobalMoment: return "global_moment";
    case ControllerMode::NoLearning: return "no_learning";
  }
  return "unknown";
}

ControllerMode controller_mode_from_string(const std::string& s) {
  if (s == "online_learning") return ControllerMode::OnlineLearning;
  if (s == "global_moment") return ControllerMode::GlobalMoment;
  if (s == "no_learning") return ControllerMode::NoLearning;
  throw std::invalid_argument("unknown controller mode: " + s);
}

void Scenario::validate() const {
  cfg.validate();
  const int n = cfg.plant.n();
  if (x0.size() != n) throw std::invalid_argument("x0 dimension mismatch");
  if (T_s < 1) throw std::invalid_argument("T_s must be >= 1");
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (historical_samples < 0) throw std::invalid_argument("historical_samples must be >= 0");
  historical.validate(n);
  online.validate(n);
  if (prior.theta0.size() != 0) {
    if (prior.dim() != n) throw std::invalid_argument("prior dimension mismatch");
    prior.validate();
  }
  if (mode == ControllerMode::GlobalMoment && historical_samples < 2)
    throw TooFewSamples("global moment mode needs at least two historical samples");
  if (name.empty()) throw std::invalid_argument("scenario name must be nonempty");
}

namespace {

mpc::MpcConfig patched_config(const Scenario& scn, const Baseline* base,
                              const conic::SolverSettings& st) {
  mpc::MpcConfig cfg = scn.cfg;
  if (cfg.terminal_mode == mpc::TerminalMode::OfflineFallback && cfg.offline_Zf.rows() == 0) {
    if (base)
      cfg.offline_Zf = base->worst_sets.Zf;
    else
      cfg.offline_Zf = mpc::offline_terminal_set(cfg, st);
  }
  return cfg;
}

}  // namespace

Baseline prepare(const Scenario& scn, const conic::SolverSettings& st) {
  scn.validate();
  mpc::MpcConfig cfg = patched_config(scn, nullptr, st);
  Baseline base;
  base.eta0 = tightening::worst_case_eta(cfg.W, cfg.X.C, st);
  // A support set without interior carries no probability mass to spread,
  // so the worst-case tightening is exactly zero; strip solver noise.
  if (!poly::origin_interior(cfg.W)) base.eta0.setZero();
  base.worst_sets = mpc::build_sets(cfg, base.eta0, 0, st);
  return base;
}

RunLog run_closed_loop(const Scenario& scn, int run, const Baseline* base,
                       const conic::SolverSettings& st) {
  scn.validate();
  Baseline local;
  if (!base) {
    local = prepare(scn, st);
    base = &local;
  }
  const mpc::MpcConfig cfg = patched_config(scn, base, st);
  const int n = cfg.plant.n();
  const int m = cfg.plant.m();
  const int p = cfg.X.rows();
  Rng rng = run_stream(scn.seed, run);

  RunLog log;
  log.run = run;
  log.steps.reserve(scn.T_s + 1);
  log.violations = Mat::Zero(scn.T_s + 1, p);
  log.cost_slack_max = -kInf;

  // Terminal-set recursion can stall for a fresh tightening; fall back to the
  // worst-case terminal set, which stays invariant for any smaller tightening.
  auto build_with_fallback = [&](const Vec& eta, int epoch) -> std::optional<mpc::TightenedSets> {
    try {
      return mpc::build_sets(cfg, eta, epoch, st);
    } catch (const mpc::EmptyStageSet&) {
      return std::nullopt;
    } catch (const mpc::EmptyTerminalSet&) {
    }
    if (cfg.terminal_mode == mpc::TerminalMode::OnlineMrpi) {
      mpc::MpcConfig alt = cfg;
      alt.terminal_mode = mpc::TerminalMode::OfflineFallback;
      alt.offline_Zf = base->worst_sets.Zf;
      try {
        return mpc::build_sets(alt, eta, epoch, st);
      } catch (...) {
        return std::nullopt;
      }
    }
    return std::nullopt;
  };

  // A support set without interior (e.g. W = {0}) admits no moment learning
  // and pins the tightening at zero, so the learner is skipped.
  const bool degenerate = !poly::origin_interior(cfg.W);
  const bool learning = scn.mode != ControllerMode::NoLearning && !degenerate;

  // Priming: draw the historical batch and fit the first ambiguity set.
  dpmm::NwPrior prior = scn.prior.theta0.size() ? scn.prior : dpmm::NwPrior::defaults(n);
  dpmm::Posterior post;
  std::vector<Vec> all;
  tightening::AmbiguitySet amb;
  amb.W = cfg.W;
  mpc::TightenedSets sets;
  if (degenerate) {
    sets = base->worst_sets;
  } else {
    std::vector<Vec> hist;
    hist.reserve(scn.historical_samples);
    for (int i = 0; i < scn.historical_samples; ++i)
      hist.push_back(sample_disturbance(scn.historical, cfg.W, rng));
    if (scn.mode == ControllerMode::GlobalMoment) {
      all = hist;
      amb.mix = global_moment_baseline(all, cfg.W);
    } else {
      post = dpmm::init(prior);
      if (!hist.empty()) {
        dpmm::observe(post, hist);
        dpmm::compress(post);
      }
      amb.mix = dpmm::extract(post, cfg.W);
    }
    auto tight = tightening::solve_eta(amb, cfg.X.C, cfg.eps, st);
    if (auto s0 = build_with_fallback(tight.eta, 0))
      sets = *s0;
    else
      sets = base->worst_sets;
  }

  Vec x = scn.x0;
  double prev_bound = 0.0;
  bool have_prev = false;
  for (int k = 0; k <= scn.T_s; ++k) {
    for (int i = 0; i < p; ++i)
      log.violations(k, i) = (cfg.X.C.row(i).dot(x) > cfg.X.d(i)) ? 1.0 : 0.0;

    StepRecord rec;
    rec.k = k;
    rec.x = x;
    rec.eta = sets.eta;

    auto t0 = std::chrono::steady_clock::now();
    mpc::MpcSolution sol;
    try {
      sol = mpc::solve_ocp(cfg, sets, x, st);
    } catch (const mpc::Infeasible& e) {
      if (k == 0) throw InitialInfeasible(e.what());
      log.infeasible_steps += 1;
      break;
    }
    rec.t_solve = seconds_since(t0);
    rec.u = mpc::control_input(sol);
    // Inputs are hard constraints; interior-point slack can graze a facet by
    // a rounding-level amount, so pull back toward the interior origin.
    for (int it = 0; it < 64 && !poly::contains(cfg.U, rec.u, 0.0); ++it)
      rec.u *= (1.0 - std::ldexp(1e-15, it));
    rec.J = sol.J;
    rec.status = sol.status;

    if (have_prev) log.cost_slack_max = std::max(log.cost_slack_max, sol.J - prev_bound);
    Vec c0 = sol.c.head(m);
    prev_bound = sol.J - c0.dot(cfg.reg.PsiTilde * c0);
    have_prev = true;
    if (k >= 1)
      log.J_cost += x.dot(cfg.plant.Q * x) + rec.u.dot(cfg.plant.R * rec.u);

    if (k == scn.T_s) {
      rec.w = Vec::Zero(n);
      rec.flag = scn.mode == ControllerMode::NoLearning ? 0 : 1;
      log.steps.push_back(std::move(rec));
      break;
    }

    Vec w = sample_disturbance(scn.online, cfg.W, rng);
    rec.w = w;
    Vec x_next = cfg.plant.A * x + cfg.plant.B * rec.u + w;
    Vec w_hat = x_next - cfg.plant.A * x - cfg.plant.B * rec.u;
    if ((w_hat - w).cwiseAbs().maxCoeff() > 1e-12)
      throw std::logic_error("disturbance recovery mismatch");

    int flag = 0;
    if (learning) {
      t0 = std::chrono::steady_clock::now();
      if (scn.mode == ControllerMode::OnlineLearning) {
        dpmm::observe(post, {w_hat});
        dpmm::compress(post);
        amb.mix = dpmm::extract(post, cfg.W);
      } else {
        all.push_back(w_hat);
        amb.mix = global_moment_baseline(all, cfg.W);
      }
      rec.t_learn = seconds_since(t0);

      t0 = std::chrono::steady_clock::now();
      auto tight = tightening::solve_eta(amb, cfg.X.C, cfg.eps, st);
      rec.t_tighten = seconds_since(t0);

      t0 = std::chrono::steady_clock::now();
      auto fresh = build_with_fallback(tight.eta, k + 1);
      rec.t_sets = seconds_since(t0);

      t0 = std::chrono::steady_clock::now();
      if (fresh) {
        auto cand = mpc::candidate(sol, x_next, cfg);
        auto dec = mpc::safe_update(cand, *fresh, sets);
        sets = std::move(dec.active);
        flag = dec.flag;
      }
      rec.t_update = seconds_since(t0);
    } else if (scn.mode != ControllerMode::NoLearning) {
      flag = 1;  // nothing to learn; the held sets are trivially fresh
    }
    rec.flag = flag;
    log.steps.push_back(std::move(rec));
    x = x_next;
  }
  if (!std::isfinite(log.cost_slack_max)) log.cost_slack_max = 0.0;
  return log;
}

namespace {

int thread_budget(int runs) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("DRMPC_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1) hw = std::min(hw, cap);
  }
  return std::max(1, std::min(hw, runs));
}

}  // namespace

std::vector<RunLog> run_all(const Scenario& scn, const conic::SolverSettings& st) {
  scn.validate();
  Scenario local = scn;
  if (local.cfg.terminal_mode == mpc::TerminalMode::OfflineFallback &&
      local.cfg.offline_Zf.rows() == 0)
    local.cfg.offline_Zf = mpc::offline_terminal_set(local.cfg, st);
  Baseline base = prepare(local, st);

  std::vector<RunLog> logs(local.runs);
  std::vector<std::exception_ptr> errs(local.runs);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= local.runs) return;
      try {
        logs[i] = run_closed_loop(local, i, &base, st);
      } catch (...) {
        errs[i] = std::current_exception();
      }
    }
  };
  int nthreads = thread_budget(local.runs);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return logs;
}

Summary metrics(const Scenario& scn, const std::vector<RunLog>& logs) {
  Summary s;
  s.runs = static_cast<int>(logs.size());
  s.T_s = scn.T_s;
  s.first_window = std::min(scn.cfg.N, scn.T_s);
  const int p = scn.cfg.X.rows();
  s.eta_mean = Mat::Zero(scn.T_s + 1, p);
  if (logs.empty()) return s;

  double jsum = 0.0, jsq = 0.0;
  long viol_first = 0, viol_full = 0;
  long flag_sum = 0, flag_cnt = 0, step_cnt = 0;
  Vec eta_cnt = Vec::Zero(scn.T_s + 1);
  for (const auto& log : logs) {
    jsum += log.J_cost;
    jsq += log.J_cost * log.J_cost;
    for (int k = 1; k <= scn.T_s; ++k) {
      bool any = log.violations.row(k).maxCoeff() > 0.5;
      if (any) {
        viol_full += 1;
        if (k <= s.first_window) viol_first += 1;
      }
    }
    for (const auto& rec : log.steps) {
      s.eta_mean.row(rec.k) += rec.eta.transpose();
      eta_cnt(rec.k) += 1.0;
      if (rec.k < scn.T_s) {
        flag_sum += rec.flag;
        flag_cnt += 1;
      }
      s.t_solve += rec.t_solve;
      s.t_learn += rec.t_learn;
      s.t_tighten += rec.t_tighten;
      s.t_sets += rec.t_sets;
      s.t_update += rec.t_update;
      step_cnt += 1;
    }
  }
  const double R = static_cast<double>(s.runs);
  s.J_mean = jsum / R;
  s.J_std = s.runs > 1 ? std::sqrt(std::max(0.0, (jsq - R * s.J_mean * s.J_mean) / (R - 1.0)))
                       : 0.0;
  s.violation_rate = static_cast<double>(viol_first) / (R * s.first_window);
  s.violation_rate_full = static_cast<double>(viol_full) / (R * s.T_s);
  for (int k = 0; k <= scn.T_s; ++k)
    if (eta_cnt(k) > 0.0) s.eta_mean.row(k) /= eta_cnt(k);
  s.flag_rate = flag_cnt > 0 ? static_cast<double>(flag_sum) / flag_cnt : 0.0;
  if (step_cnt > 0) {
    s.t_solve /= step_cnt;
    s.t_learn /= step_cnt;
    s.t_tighten /= step_cnt;
    s.t_sets /= step_cnt;
    s.t_update /= step_cnt;
  }
  return s;
}

namespace {

void append_num(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

std::string run_csv(const RunLog& log) {
  std::string out = "k";
  if (log.steps.empty()) return out + "\n";
  const auto& first = log.steps.front();
  auto head = [&](const char* stem, Eigen::Index cnt) {
    for (Eigen::Index i = 0; i < cnt; ++i) out += "," + std::string(stem) + std::to_string(i + 1);
  };
  head("x", first.x.size());
  head("u", first.u.size());
  head("w", first.x.size());
  head("eta", first.eta.size());
  out += ",flag,J,status\n";
  for (const auto& rec : log.steps) {
    out += std::to_string(rec.k);
    auto cols = [&](const Vec& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        out += ',';
        append_num(out, v(i));
      }
    };
    cols(rec.x);
    cols(rec.u);
    cols(rec.w);
    cols(rec.eta);
    out += ',' + std::to_string(rec.flag) + ',';
    append_num(out, rec.J);
    out += ',' + conic::to_string(rec.status) + '\n';
  }
  return out;
}

std::string summary_json(const Scenario& scn, const Summary& sum) {
  nlohmann::json eta = nlohmann::json::array();
  for (int k = 0; k < sum.eta_mean.rows(); ++k) {
    nlohmann::json row = nlohmann::json::array();
    for (int i = 0; i < sum.eta_mean.cols(); ++i) row.push_back(sum.eta_mean(k, i));
    eta.push_back(row);
  }
  nlohmann::json j{
      {"scenario", scn.name},
      {"mode", to_string(scn.mode)},
      {"runs", sum.runs},
      {"steps", sum.T_s},
      {"first_window", sum.first_window},
      {"J_mean", sum.J_mean},
      {"J_std", sum.J_std},
      {"violation_rate", sum.violation_rate},
      {"violation_rate_full", sum.violation_rate_full},
      {"flag_rate", sum.flag_rate},
      {"eta_mean", eta},
      {"time_seconds",
       {{"solve", sum.t_solve},
        {"learn", sum.t_learn},
        {"tighten", sum.t_tighten},
        {"sets", sum.t_sets},
        {"update", sum.t_update}}},
  };
  return j.dump(2) + "\n";
}

void write_outputs(const Scenario& scn, const std::vector<RunLog>& logs,
                   const Summary& sum, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& log : logs) {
    std::ofstream f(std::filesystem::path(dir) /
                    (scn.name + "_" + std::to_string(log.run) + ".csv"));
    if (!f) throw std::runtime_error("cannot open run CSV for writing");
    f << run_csv(log);
  }
  std::ofstream f(std::filesystem::path(dir) / (scn.name + "_summary.json"));
  if (!f) throw std::runtime_error("cannot open summary JSON for writing");
  f << summary_json(scn, sum);
}

}  // namespace drmpc::sim
