#include <drmpc/cli.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace drmpc::cli {

namespace {

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

nlohmann::json mat_json(const Mat& M) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) a.push_back(vec_json(M.row(r).transpose()));
  return a;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ConfigError(out_path + ": cannot open for writing");
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct SimOpts {
  std::string config;
  std::optional<int> runs;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string out;
  std::optional<double> tol;
};

int cmd_sim(const SimOpts& o) {
  CliConfig cc = load_config(o.config);
  if (o.runs) cc.scenario.runs = *o.runs;
  if (o.seed) cc.scenario.seed = *o.seed;
  if (!o.mode.empty()) cc.scenario.mode = sim::controller_mode_from_string(o.mode);
  if (!o.out.empty()) cc.out_dir = o.out;
  if (o.tol) {
    cc.solver.tol_feas = *o.tol;
    cc.solver.tol_gap = *o.tol;
  }
  try {
    cc.scenario.validate();
  } catch (const std::exception& ex) {
    throw ConfigError(o.config + ": " + ex.what());
  }

  std::vector<sim::RunLog> logs = sim::run_all(cc.scenario, cc.solver);
  sim::Summary sum = sim::metrics(cc.scenario, logs);
  sim::write_outputs(cc.scenario, logs, sum, cc.out_dir);

  std::printf("%s: %d run(s), %d step(s), mode %s\n", cc.scenario.name.c_str(),
              sum.runs, sum.T_s, sim::to_string(cc.scenario.mode).c_str());
  std::printf("J_mean %.17g  J_std %.17g\n", sum.J_mean, sum.J_std);
  std::printf("violation_rate %.17g (first %d step(s))  %.17g (all)\n",
              sum.violation_rate, sum.first_window, sum.violation_rate_full);
  std::printf("flag_rate %.17g\n", sum.flag_rate);
  std::printf("time/step: solve %.17g  learn %.17g  tighten %.17g  sets %.17g  update %.17g\n",
              sum.t_solve, sum.t_learn, sum.t_tighten, sum.t_sets, sum.t_update);
  std::printf("outputs: %s\n", cc.out_dir.c_str());
  return 0;
}

struct LqrOpts {
  std::string config;
  std::string out;
};

int cmd_lqr(const LqrOpts& o) {
  regulator::Plant plant = load_plant(o.config);
  regulator::Regulator reg = regulator::synthesize(plant);
  nlohmann::json j{{"K", mat_json(reg.K)},
                   {"P", mat_json(reg.P)},
                   {"Phi", mat_json(reg.Phi)},
                   {"PsiTilde", mat_json(reg.PsiTilde)},
                   {"iterations", reg.iterations}};
  emit(j.dump(2) + "\n", o.out);
  return 0;
}

struct TightenOpts {
  std::string support;
  std::string rows;
  std::string mixture;
  std::vector<double> eps;
  std::string out;
  std::optional<double> tol;
};

int cmd_tighten(const TightenOpts& o) {
  tightening::AmbiguitySet amb;
  amb.W = read_polytope(o.support);
  amb.mix = mixture_from_json(slurp(o.mixture), o.mixture);
  Mat H = read_matrix(o.rows);
  if (H.cols() != amb.W.dim())
    throw ConfigError(o.rows + ": row dimension disagrees with the support set");
  Vec eps;
  if (o.eps.size() == 1)
    eps = Vec::Constant(H.rows(), o.eps.front());
  else if (static_cast<Eigen::Index>(o.eps.size()) == H.rows())
    eps = Eigen::Map<const Vec>(o.eps.data(), static_cast<Eigen::Index>(o.eps.size()));
  else
    throw ConfigError("--eps needs one value or one per constraint row");
  amb.validate();

  conic::SolverSettings st;
  if (o.tol) {
    st.tol_feas = *o.tol;
    st.tol_gap = *o.tol;
  }
  tightening::TighteningResult res = tightening::solve_eta(amb, H, eps, st);
  Vec eta0 = tightening::worst_case_eta(amb.W, H, st);
  Vec raw(res.eta.size());
  nlohmann::json fallback = nlohmann::json::array();
  for (size_t i = 0; i < res.rows.size(); ++i) {
    raw(static_cast<Eigen::Index>(i)) = res.rows[i].raw;
    fallback.push_back(res.rows[i].fallback);
  }
  nlohmann::json j{{"eta", vec_json(res.eta)},
                   {"raw", vec_json(raw)},
                   {"eta0", vec_json(eta0)},
                   {"eps", vec_json(eps)},
                   {"fallback", fallback}};
  emit(j.dump(2) + "\n", o.out);
  return 0;
}

struct LearnOpts {
  std::string samples;
  std::string support;
  std::optional<double> lambda0, omega0, alpha, psi0;
  std::optional<int> kmax;
  std::string out;
};

int cmd_learn(const LearnOpts& o) {
  std::vector<Vec> samples = read_samples(o.samples);
  poly::HPolytope W = read_polytope(o.support);
  const int n = W.dim();
  if (!samples.empty() && samples.front().size() != n)
    throw ConfigError(o.samples + ": sample dimension disagrees with the support set");

  dpmm::NwPrior prior = dpmm::NwPrior::defaults(n);
  if (o.lambda0) prior.lambda0 = *o.lambda0;
  if (o.omega0) prior.omega0 = *o.omega0;
  if (o.alpha) prior.alpha = *o.alpha;
  if (o.psi0) prior.Psi0 = *o.psi0 * Mat::Identity(n, n);
  if (o.kmax) prior.Kmax = *o.kmax;
  prior.validate();

  dpmm::Posterior post = dpmm::init(prior);
  for (const Vec& w : samples) {
    dpmm::observe(post, {w});
    dpmm::compress(post);
  }
  dpmm::MixtureEstimate est = dpmm::extract(post, W);
  emit(mixture_to_json(est), o.out);
  return 0;
}

struct MrpiOpts {
  std::string phi;
  std::string map;
  std::string support;
  std::string base;
  std::string out;
};

int cmd_mrpi(const MrpiOpts& o) {
  Mat Phi = read_matrix(o.phi);
  poly::HPolytope W = read_polytope(o.support);
  poly::HPolytope base = read_polytope(o.base);
  Mat D = o.map.empty() ? Mat::Identity(Phi.rows(), Phi.cols()) : read_matrix(o.map);
  poly::MrpiResult res = poly::mrpi(Phi, D, W, base);
  const char* status = res.status == poly::MrpiStatus::Ok      ? "ok"
                       : res.status == poly::MrpiStatus::Empty ? "empty"
                                                               : "max_iter";
  nlohmann::json j{{"status", status},
                   {"iterations", res.iterations},
                   {"C", mat_json(res.set.C)},
                   {"d", vec_json(res.set.d)}};
  emit(j.dump(2) + "\n", o.out);
  if (res.status != poly::MrpiStatus::Ok) {
    std::cerr << "mrpi: recursion ended with status " << status << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int cli_run(int argc, const char* const* argv) {
  CLI::App app{"risk-averse stochastic MPC with online-learned disturbance moments"};
  app.require_subcommand(1);

  SimOpts so;
  CLI::App* sim_cmd = app.add_subcommand("sim", "run closed-loop simulations from a scenario config");
  sim_cmd->add_option("--config", so.config, "scenario config file")->required();
  sim_cmd->add_option("--runs", so.runs, "override the number of runs");
  sim_cmd->add_option("--seed", so.seed, "override the RNG seed");
  sim_cmd->add_option("--mode", so.mode, "override the controller mode")
      ->check(CLI::IsMember({"online_learning", "global_moment", "no_learning"}));
  sim_cmd->add_option("--out", so.out, "output directory (default from config)");
  sim_cmd->add_option("--tol", so.tol, "conic solver feasibility/gap tolerance");

  LqrOpts lo;
  CLI::App* lqr_cmd = app.add_subcommand("lqr", "synthesize the LQR regulator of the [plant] table");
  lqr_cmd->add_option("--config", lo.config, "config file with a [plant] table")->required();
  lqr_cmd->add_option("--out", lo.out, "write the JSON here instead of stdout");

  TightenOpts to;
  CLI::App* tighten_cmd = app.add_subcommand("tighten", "solve the risk-tightening offsets for constraint rows");
  tighten_cmd->add_option("--support", to.support, "disturbance support polytope file (rows: coefficients then offset)")->required();
  tighten_cmd->add_option("--rows", to.rows, "constraint row matrix file")->required();
  tighten_cmd->add_option("--mixture", to.mixture, "moment mixture JSON file")->required();
  tighten_cmd->add_option("--eps", to.eps, "risk level(s): one value or one per row")->required()->expected(-1);
  tighten_cmd->add_option("--out", to.out, "write the JSON here instead of stdout");
  tighten_cmd->add_option("--tol", to.tol, "conic solver feasibility/gap tolerance");

  LearnOpts le;
  CLI::App* learn_cmd = app.add_subcommand("learn", "fit the disturbance mixture from a sample file");
  learn_cmd->add_option("--samples", le.samples, "sample file, one disturbance per row")->required();
  learn_cmd->add_option("--support", le.support, "disturbance support polytope file")->required();
  learn_cmd->add_option("--lambda0", le.lambda0, "prior mean-precision scale");
  learn_cmd->add_option("--omega0", le.omega0, "prior Wishart degrees of freedom");
  learn_cmd->add_option("--alpha", le.alpha, "stick-breaking concentration");
  learn_cmd->add_option("--psi0", le.psi0, "prior scale matrix, psi0 * identity");
  learn_cmd->add_option("--kmax", le.kmax, "truncation level of the variational posterior");
  learn_cmd->add_option("--out", le.out, "write the JSON here instead of stdout");

  MrpiOpts mo;
  CLI::App* mrpi_cmd = app.add_subcommand("mrpi", "maximal robust invariant set of z+ = Phi z + D w inside a base polytope");
  mrpi_cmd->add_option("--phi", mo.phi, "closed-loop matrix file")->required();
  mrpi_cmd->add_option("--map", mo.map, "disturbance map matrix file (default identity)");
  mrpi_cmd->add_option("--support", mo.support, "disturbance support polytope file")->required();
  mrpi_cmd->add_option("--base", mo.base, "base constraint polytope file")->required();
  mrpi_cmd->add_option("--out", mo.out, "write the JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (sim_cmd->parsed()) return cmd_sim(so);
    if (lqr_cmd->parsed()) return cmd_lqr(lo);
    if (tighten_cmd->parsed()) return cmd_tighten(to);
    if (learn_cmd->parsed()) return cmd_learn(le);
    if (mrpi_cmd->parsed()) return cmd_mrpi(mo);
  } catch (const sim::InitialInfeasible& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}

int cli_run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli_run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace drmpc::cli
