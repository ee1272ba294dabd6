#include <drmpc/cli.hpp>

#include <json.hpp>

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace drmpc::cli {

namespace {

struct Entry {
  std::string value;
  int line = 0;
  bool used = false;
};

// Flat key -> value map after the syntactic pass; keys carry their table
// prefix ("plant.A").
struct Raw {
  std::string path;
  std::map<std::string, Entry> kv;

  [[noreturn]] void fail(int line, const std::string& msg) const {
    std::ostringstream os;
    os << path << ':';
    if (line > 0) os << line << ": ";
    else os << ' ';
    os << msg;
    throw ConfigError(os.str());
  }

  Entry* opt(const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  Entry& need(const std::string& key) {
    Entry* e = opt(key);
    if (!e) fail(0, "missing required key '" + key + "'");
    return *e;
  }
};

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Comment starts at the first '#' outside double quotes.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    else if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

bool valid_name(const std::string& s, bool allow_dot) {
  if (s.empty()) return false;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') continue;
    if (c == '.' && allow_dot) continue;
    return false;
  }
  return s.front() != '.' && s.back() != '.';
}

int bracket_depth(const std::string& s) {
  int depth = 0;
  bool quoted = false;
  for (char c : s) {
    if (c == '"') quoted = !quoted;
    else if (c == '[' && !quoted) ++depth;
    else if (c == ']' && !quoted) --depth;
  }
  return depth;
}

Raw lex(const std::string& text, const std::string& path) {
  Raw raw;
  raw.path = path;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') raw.fail(no, "unterminated table header");
      section = trim(body.substr(1, body.size() - 2));
      if (!valid_name(section, true))
        raw.fail(no, "bad table name '" + section + "'");
      continue;
    }
    size_t eq = body.find('=');
    if (eq == std::string::npos)
      raw.fail(no, "expected 'key = value' or '[table]'");
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (!valid_name(key, false)) raw.fail(no, "bad key '" + key + "'");
    if (value.empty()) raw.fail(no, "missing value for '" + key + "'");
    const int first = no;
    // Arrays may continue across lines until the brackets close.
    while (bracket_depth(value) > 0) {
      if (!std::getline(in, line))
        raw.fail(first, "unterminated array for '" + key + "'");
      ++no;
      value += " " + trim(strip_comment(line));
    }
    std::string full = section.empty() ? key : section + "." + key;
    if (!raw.kv.emplace(full, Entry{value, first, false}).second)
      raw.fail(first, "duplicate key '" + full + "'");
  }
  return raw;
}

struct Cursor {
  const std::string& s;
  size_t i = 0;

  void skip() {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  }
  bool eat(char c) {
    skip();
    if (i < s.size() && s[i] == c) { ++i; return true; }
    return false;
  }
  bool done() {
    skip();
    return i == s.size();
  }
};

bool read_number(Cursor& c, double& out) {
  c.skip();
  const char* start = c.s.c_str() + c.i;
  char* end = nullptr;
  out = std::strtod(start, &end);
  if (end == start) return false;
  c.i += static_cast<size_t>(end - start);
  return true;
}

[[noreturn]] void bad_value(const Raw& raw, const std::string& key,
                            const Entry& e, const std::string& want) {
  raw.fail(e.line, "key '" + key + "': expected " + want);
}

double as_double(const Raw& raw, const std::string& key, const Entry& e) {
  Cursor c{e.value};
  double v = 0;
  if (!read_number(c, v) || !c.done()) bad_value(raw, key, e, "a number");
  return v;
}

long long as_int(const Raw& raw, const std::string& key, const Entry& e) {
  const char* start = e.value.c_str();
  char* end = nullptr;
  long long v = std::strtoll(start, &end, 10);
  if (end == start || trim(end)[0] != '\0') bad_value(raw, key, e, "an integer");
  return v;
}

std::uint64_t as_uint(const Raw& raw, const std::string& key, const Entry& e) {
  const char* start = e.value.c_str();
  char* end = nullptr;
  unsigned long long v = std::strtoull(start, &end, 10);
  if (end == start || trim(end)[0] != '\0' || e.value.find('-') != std::string::npos)
    bad_value(raw, key, e, "a nonnegative integer");
  return v;
}

std::string as_string(const Raw& raw, const std::string& key, const Entry& e) {
  const std::string& v = e.value;
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      bad_value(raw, key, e, "a closed \"string\"");
    return v.substr(1, v.size() - 2);
  }
  for (char c : v)
    if (std::isspace(static_cast<unsigned char>(c)))
      bad_value(raw, key, e, "a quoted string");
  return v;
}

Vec as_vec(const Raw& raw, const std::string& key, const Entry& e) {
  Cursor c{e.value};
  if (!c.eat('[')) bad_value(raw, key, e, "a vector like [1, 2]");
  std::vector<double> vals;
  if (!c.eat(']')) {
    for (;;) {
      double v = 0;
      if (!read_number(c, v)) bad_value(raw, key, e, "a vector like [1, 2]");
      vals.push_back(v);
      if (c.eat(']')) break;
      if (!c.eat(',')) bad_value(raw, key, e, "a vector like [1, 2]");
    }
  }
  if (!c.done()) bad_value(raw, key, e, "a vector like [1, 2]");
  return Eigen::Map<const Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

Mat as_mat(const Raw& raw, const std::string& key, const Entry& e) {
  Cursor c{e.value};
  const char* want = "a matrix like [[1, 2], [3, 4]]";
  if (!c.eat('[')) bad_value(raw, key, e, want);
  std::vector<std::vector<double>> rows;
  if (!c.eat(']')) {
    for (;;) {
      if (!c.eat('[')) bad_value(raw, key, e, want);
      std::vector<double> row;
      if (!c.eat(']')) {
        for (;;) {
          double v = 0;
          if (!read_number(c, v)) bad_value(raw, key, e, want);
          row.push_back(v);
          if (c.eat(']')) break;
          if (!c.eat(',')) bad_value(raw, key, e, want);
        }
      }
      rows.push_back(std::move(row));
      if (c.eat(']')) break;
      if (!c.eat(',')) bad_value(raw, key, e, want);
    }
  }
  if (!c.done()) bad_value(raw, key, e, want);
  if (rows.empty()) return Mat(0, 0);
  const size_t cols = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != cols) raw.fail(e.line, "key '" + key + "': ragged matrix rows");
  Mat M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t cc = 0; cc < cols; ++cc) M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cc)) = rows[r][cc];
  return M;
}

sim::DisturbanceSpec as_mixture(Raw& raw, const std::string& table) {
  Vec weights = as_vec(raw, table + ".weights", raw.need(table + ".weights"));
  Mat means = as_mat(raw, table + ".means", raw.need(table + ".means"));
  Mat sigmas = as_mat(raw, table + ".sigmas", raw.need(table + ".sigmas"));
  if (means.rows() != weights.size() || sigmas.rows() != weights.size() ||
      means.cols() != sigmas.cols())
    raw.fail(0, "table '" + table + "': weights/means/sigmas sizes disagree");
  sim::DisturbanceSpec spec;
  for (Eigen::Index j = 0; j < weights.size(); ++j) {
    sim::MixtureComponent comp;
    comp.weight = weights(j);
    comp.mu = means.row(j).transpose();
    comp.sigma = sigmas.row(j).transpose();
    spec.comps.push_back(std::move(comp));
  }
  return spec;
}

void reject_unused(const Raw& raw) {
  const Entry* worst = nullptr;
  std::string worst_key;
  for (const auto& [key, e] : raw.kv) {
    if (e.used) continue;
    if (!worst || e.line < worst->line) {
      worst = &e;
      worst_key = key;
    }
  }
  if (worst) raw.fail(worst->line, "unknown key '" + worst_key + "'");
}

std::string default_name(const std::string& path) {
  std::string stem = std::filesystem::path(path).stem().string();
  return stem.empty() ? "scenario" : stem;
}

}  // namespace

CliConfig parse_config(const std::string& text, const std::string& path) {
  Raw raw = lex(text, path);
  CliConfig out;
  sim::Scenario& scn = out.scenario;

  scn.name = default_name(path);
  if (Entry* e = raw.opt("name")) scn.name = as_string(raw, "name", *e);

  regulator::Plant& plant = scn.cfg.plant;
  plant.A = as_mat(raw, "plant.A", raw.need("plant.A"));
  plant.B = as_mat(raw, "plant.B", raw.need("plant.B"));
  plant.Q = as_mat(raw, "plant.Q", raw.need("plant.Q"));
  plant.R = as_mat(raw, "plant.R", raw.need("plant.R"));

  scn.cfg.N = static_cast<int>(as_int(raw, "mpc.N", raw.need("mpc.N")));
  std::string terminal = "online_mrpi";
  if (Entry* e = raw.opt("mpc.terminal")) terminal = as_string(raw, "mpc.terminal", *e);
  if (terminal == "online_mrpi") scn.cfg.terminal_mode = mpc::TerminalMode::OnlineMrpi;
  else if (terminal == "offline_fallback") scn.cfg.terminal_mode = mpc::TerminalMode::OfflineFallback;
  else raw.fail(raw.kv.count("mpc.terminal") ? raw.kv.at("mpc.terminal").line : 0,
                "key 'mpc.terminal': expected online_mrpi or offline_fallback");

  scn.cfg.X.C = as_mat(raw, "state.H", raw.need("state.H"));
  scn.cfg.X.d = as_vec(raw, "state.h", raw.need("state.h"));
  scn.cfg.eps = as_vec(raw, "state.eps", raw.need("state.eps"));
  scn.cfg.U.C = as_mat(raw, "input.G", raw.need("input.G"));
  scn.cfg.U.d = as_vec(raw, "input.g", raw.need("input.g"));
  scn.cfg.W.C = as_mat(raw, "disturbance.E", raw.need("disturbance.E"));
  scn.cfg.W.d = as_vec(raw, "disturbance.f", raw.need("disturbance.f"));

  scn.historical = as_mixture(raw, "disturbance.historical");
  scn.online = as_mixture(raw, "disturbance.online");

  scn.historical_samples = static_cast<int>(
      as_int(raw, "learning.historical_samples", raw.need("learning.historical_samples")));
  {
    const int n = static_cast<int>(plant.A.rows());
    bool touched = false;
    dpmm::NwPrior prior = dpmm::NwPrior::defaults(std::max(n, 1));
    if (Entry* e = raw.opt("learning.lambda0")) { prior.lambda0 = as_double(raw, "learning.lambda0", *e); touched = true; }
    if (Entry* e = raw.opt("learning.omega0")) { prior.omega0 = as_double(raw, "learning.omega0", *e); touched = true; }
    if (Entry* e = raw.opt("learning.alpha")) { prior.alpha = as_double(raw, "learning.alpha", *e); touched = true; }
    if (Entry* e = raw.opt("learning.psi0")) {
      prior.Psi0 = as_double(raw, "learning.psi0", *e) * Mat::Identity(n, n);
      touched = true;
    }
    if (Entry* e = raw.opt("learning.kmax")) { prior.Kmax = static_cast<int>(as_int(raw, "learning.kmax", *e)); touched = true; }
    if (touched) scn.prior = prior;
  }

  scn.x0 = as_vec(raw, "run.x0", raw.need("run.x0"));
  scn.T_s = static_cast<int>(as_int(raw, "run.steps", raw.need("run.steps")));
  scn.runs = static_cast<int>(as_int(raw, "run.runs", raw.need("run.runs")));
  scn.seed = as_uint(raw, "run.seed", raw.need("run.seed"));
  {
    Entry& e = raw.need("run.mode");
    try {
      scn.mode = sim::controller_mode_from_string(as_string(raw, "run.mode", e));
    } catch (const std::invalid_argument& ex) {
      raw.fail(e.line, std::string("key 'run.mode': ") + ex.what());
    }
  }
  out.out_dir = "out/" + scn.name;
  if (Entry* e = raw.opt("run.out")) out.out_dir = as_string(raw, "run.out", *e);

  if (Entry* e = raw.opt("solver.tol_feas")) out.solver.tol_feas = as_double(raw, "solver.tol_feas", *e);
  if (Entry* e = raw.opt("solver.tol_gap")) out.solver.tol_gap = as_double(raw, "solver.tol_gap", *e);
  if (Entry* e = raw.opt("solver.max_iter")) out.solver.max_iter = static_cast<int>(as_int(raw, "solver.max_iter", *e));

  reject_unused(raw);

  try {
    plant.validate();
    scn.cfg.reg = regulator::synthesize(plant);
    scn.validate();
    if (scn.prior.theta0.size() != 0) scn.prior.validate();
  } catch (const std::exception& ex) {
    raw.fail(0, ex.what());
  }
  return out;
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

CliConfig load_config(const std::string& path) {
  return parse_config(slurp(path), path);
}

regulator::Plant plant_from_config(const std::string& text, const std::string& path) {
  Raw raw = lex(text, path);
  regulator::Plant plant;
  plant.A = as_mat(raw, "plant.A", raw.need("plant.A"));
  plant.B = as_mat(raw, "plant.B", raw.need("plant.B"));
  plant.Q = as_mat(raw, "plant.Q", raw.need("plant.Q"));
  plant.R = as_mat(raw, "plant.R", raw.need("plant.R"));
  for (const auto& [key, e] : raw.kv)
    if (!e.used && key.rfind("plant.", 0) == 0)
      raw.fail(e.line, "unknown key '" + key + "'");
  try {
    plant.validate();
  } catch (const std::exception& ex) {
    raw.fail(0, ex.what());
  }
  return plant;
}

regulator::Plant load_plant(const std::string& path) {
  return plant_from_config(slurp(path), path);
}

Mat read_matrix(const std::string& path) {
  std::string text = slurp(path);
  std::istringstream in(text);
  std::string line;
  int no = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++no;
    std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    for (char& c : body)
      if (c == ',') c = ' ';
    std::istringstream ls(body);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      char* end = nullptr;
      double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0')
        throw ConfigError(path + ":" + std::to_string(no) + ": bad number '" + tok + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ConfigError(path + ":" + std::to_string(no) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(path + ": no numeric rows");
  Mat M(static_cast<Eigen::Index>(rows.size()),
        static_cast<Eigen::Index>(rows.front().size()));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows.front().size(); ++c)
      M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return M;
}

poly::HPolytope read_polytope(const std::string& path) {
  Mat M = read_matrix(path);
  if (M.cols() < 2)
    throw ConfigError(path + ": a polytope row needs coefficients plus an offset");
  poly::HPolytope P;
  P.C = M.leftCols(M.cols() - 1);
  P.d = M.col(M.cols() - 1);
  return P;
}

std::vector<Vec> read_samples(const std::string& path) {
  Mat M = read_matrix(path);
  std::vector<Vec> out;
  out.reserve(static_cast<size_t>(M.rows()));
  for (Eigen::Index r = 0; r < M.rows(); ++r) out.push_back(M.row(r).transpose());
  return out;
}

std::string mixture_to_json(const dpmm::MixtureEstimate& est) {
  nlohmann::json gamma = nlohmann::json::array();
  nlohmann::json mu = nlohmann::json::array();
  nlohmann::json Sigma = nlohmann::json::array();
  for (int j = 0; j < est.m; ++j) {
    gamma.push_back(est.gamma(j));
    nlohmann::json mrow = nlohmann::json::array();
    for (Eigen::Index i = 0; i < est.mu[j].size(); ++i) mrow.push_back(est.mu[j](i));
    mu.push_back(mrow);
    nlohmann::json smat = nlohmann::json::array();
    for (Eigen::Index r = 0; r < est.Sigma[j].rows(); ++r) {
      nlohmann::json srow = nlohmann::json::array();
      for (Eigen::Index c = 0; c < est.Sigma[j].cols(); ++c) srow.push_back(est.Sigma[j](r, c));
      smat.push_back(srow);
    }
    Sigma.push_back(smat);
  }
  nlohmann::json j{{"m", est.m}, {"gamma", gamma}, {"mu", mu}, {"Sigma", Sigma}};
  return j.dump(2) + "\n";
}

dpmm::MixtureEstimate mixture_from_json(const std::string& text,
                                        const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
  dpmm::MixtureEstimate est;
  try {
    est.m = j.at("m").get<int>();
    const auto& gamma = j.at("gamma");
    const auto& mu = j.at("mu");
    const auto& Sigma = j.at("Sigma");
    if (static_cast<int>(gamma.size()) != est.m ||
        static_cast<int>(mu.size()) != est.m ||
        static_cast<int>(Sigma.size()) != est.m)
      throw ConfigError(path + ": m disagrees with gamma/mu/Sigma lengths");
    est.gamma = Vec(est.m);
    for (int c = 0; c < est.m; ++c) {
      est.gamma(c) = gamma.at(c).get<double>();
      const auto& mrow = mu.at(c);
      Vec mv(mrow.size());
      for (size_t i = 0; i < mrow.size(); ++i) mv(static_cast<Eigen::Index>(i)) = mrow.at(i).get<double>();
      est.mu.push_back(std::move(mv));
      const auto& smat = Sigma.at(c);
      Mat S(smat.size(), smat.empty() ? 0 : smat.at(0).size());
      for (size_t r = 0; r < smat.size(); ++r) {
        const auto& srow = smat.at(r);
        if (static_cast<Eigen::Index>(srow.size()) != S.cols())
          throw ConfigError(path + ": ragged Sigma block");
        for (size_t cc = 0; cc < srow.size(); ++cc)
          S(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cc)) = srow.at(cc).get<double>();
      }
      est.Sigma.push_back(std::move(S));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
  return est;
}

}  // namespace drmpc::cli
