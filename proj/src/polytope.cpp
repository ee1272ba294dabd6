#include "drmpc/polytope.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace drmpc::poly {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

HPolytope parse_polytope(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  int lineno = 0;
  int ncols = -1;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> toks;
    std::string t;
    while (ls >> t) toks.push_back(t);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks.size() < 3)
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected 'c1 ... cn <= d'");
    if (toks[toks.size() - 2] != "<=")
      throw std::runtime_error("line " + std::to_string(lineno) + ": missing '<='");
    std::vector<double> coeffs;
    try {
      for (size_t i = 0; i + 2 < toks.size(); ++i) coeffs.push_back(std::stod(toks[i]));
      rhs.push_back(std::stod(toks.back()));
    } catch (const std::exception&) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": bad number");
    }
    if (ncols < 0) ncols = static_cast<int>(coeffs.size());
    if (static_cast<int>(coeffs.size()) != ncols)
      throw std::runtime_error("line " + std::to_string(lineno) + ": inconsistent column count");
    rows.push_back(coeffs);
  }
  if (rows.empty()) throw std::runtime_error("polytope text has no rows");
  HPolytope P;
  P.C = Mat(rows.size(), ncols);
  P.d = Vec(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < ncols; ++j) P.C(i, j) = rows[i][j];
    P.d(i) = rhs[i];
  }
  return P;
}

std::string format_polytope(const HPolytope& P) {
  std::string out;
  char buf[64];
  for (int i = 0; i < P.rows(); ++i) {
    for (int j = 0; j < P.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", P.C(i, j));
      out += buf;
      out += ' ';
    }
    std::snprintf(buf, sizeof(buf), "%.17g", P.d(i));
    out += "<= ";
    out += buf;
    out += '\n';
  }
  return out;
}

double support(const HPolytope& P, const Vec& a, const conic::SolverSettings& settings) {
  if (a.size() != P.dim()) throw std::invalid_argument("support: direction dimension mismatch");
  auto res = conic::solve_lp(P.C, P.d, -a, settings);
  switch (res.status) {
    case conic::LpStatus::Optimal: return -res.value;
    case conic::LpStatus::Unbounded: return kInf;
    case conic::LpStatus::Infeasible: return -kInf;
    default: throw std::runtime_error("support: LP solver failure");
  }
}

bool contains(const HPolytope& P, const Vec& x, double tol) {
  if (x.size() != P.dim()) throw std::invalid_argument("contains: point dimension mismatch");
  return ((P.C * x - P.d).array() <= tol).all();
}

bool is_empty(const HPolytope& P, const conic::SolverSettings& settings) {
  auto res = conic::solve_lp(P.C, P.d, Vec::Zero(P.dim()), settings);
  if (res.status == conic::LpStatus::Optimal) return false;
  if (res.status == conic::LpStatus::Infeasible) return true;
  throw std::runtime_error("is_empty: LP solver failure");
}

bool is_bounded(const HPolytope& P, const conic::SolverSettings& settings) {
  for (int j = 0; j < P.dim(); ++j) {
    Vec a = Vec::Zero(P.dim());
    a(j) = 1.0;
    if (!std::isfinite(support(P, a, settings))) return false;
    a(j) = -1.0;
    if (!std::isfinite(support(P, a, settings))) return false;
  }
  return true;
}

bool origin_interior(const HPolytope& P) { return (P.d.array() > 0.0).all(); }

HPolytope tighten_rows(const HPolytope& P, const Vec& offsets) {
  if (offsets.size() != P.rows())
    throw std::invalid_argument("tighten_rows: offset count mismatch");
  return {P.C, P.d - offsets};
}

HPolytope remove_redundancy(const HPolytope& P, double slack,
                            const conic::SolverSettings& settings) {
  std::vector<int> keep;
  for (int i = 0; i < P.rows(); ++i) keep.push_back(i);
  for (int i = static_cast<int>(keep.size()) - 1; i >= 0; --i) {
    if (keep.size() <= 1) break;
    int row = keep[static_cast<size_t>(i)];
    // maximize this row over the others, with its own bound relaxed by 1
    Mat C(keep.size(), P.dim());
    Vec d(keep.size());
    for (size_t k = 0; k < keep.size(); ++k) {
      C.row(k) = P.C.row(keep[k]);
      d(k) = P.d(keep[k]) + (keep[k] == row ? 1.0 : 0.0);
    }
    auto res = conic::solve_lp(C, d, -P.C.row(row).transpose(), settings);
    if (res.status == conic::LpStatus::Optimal && -res.value <= P.d(row) + slack)
      keep.erase(keep.begin() + i);
  }
  HPolytope out;
  out.C = Mat(keep.size(), P.dim());
  out.d = Vec(keep.size());
  for (size_t k = 0; k < keep.size(); ++k) {
    out.C.row(k) = P.C.row(keep[k]);
    out.d(k) = P.d(keep[k]);
  }
  return out;
}

Mat error_tube_offsets(const Mat& Phi, const HPolytope& W, const Mat& H, int N) {
  const int p = static_cast<int>(H.rows());
  Mat zeta = Mat::Zero(N + 1, p);
  Mat PhiPow = Phi;  // Phi^j starting at j = 1
  for (int l = 2; l <= N; ++l) {
    for (int i = 0; i < p; ++i) {
      double extra = support(W, PhiPow.transpose() * H.row(i).transpose());
      zeta(l, i) = zeta(l - 1, i) + extra;
    }
    PhiPow = PhiPow * Phi;
  }
  return zeta;
}

Mat input_tube_offsets(const Mat& Phi, const Mat& K, const HPolytope& W,
                       const Mat& G, int M) {
  const int q = static_cast<int>(G.rows());
  Mat delta = Mat::Zero(M, q);
  Mat PhiPow = Mat::Identity(Phi.rows(), Phi.cols());  // Phi^j starting at j = 0
  for (int l = 1; l < M; ++l) {
    Mat KP = K * PhiPow;
    for (int i = 0; i < q; ++i) {
      double extra = support(W, KP.transpose() * G.row(i).transpose());
      delta(l, i) = delta(l - 1, i) + extra;
    }
    PhiPow = PhiPow * Phi;
  }
  return delta;
}

MrpiResult mrpi(const Mat& Phi, const Mat& D, const HPolytope& W,
                const HPolytope& base, double slack, int max_iter,
                const conic::SolverSettings& settings) {
  MrpiResult out;
  if (is_empty(base, settings)) {
    out.status = MrpiStatus::Empty;
    return out;
  }
  // accumulated description: blocks base.C * Phi^j with cumulative offsets
  Mat C = base.C;
  Vec d = base.d;
  Mat blockC = base.C;  // rows of the newest block
  Vec blockD = base.d;
  for (int iter = 0; iter < max_iter; ++iter) {
    // predecessor rows of the newest block
    Mat nextC = blockC * Phi;
    Vec nextD(blockD.size());
    for (int i = 0; i < blockC.rows(); ++i) {
      double sigma = support(W, D.transpose() * blockC.row(i).transpose(), settings);
      if (!std::isfinite(sigma)) {
        out.status = MrpiStatus::Empty;
        return out;
      }
      nextD(i) = blockD(i) - sigma;
    }
    // fixed point when every new row is implied by the current description
    HPolytope cur{C, d};
    bool all_redundant = true;
    for (int i = 0; i < nextC.rows(); ++i) {
      double h = support(cur, nextC.row(i).transpose(), settings);
      if (h == -kInf) {
        out.status = MrpiStatus::Empty;
        return out;
      }
      if (h > nextD(i) + slack) {
        all_redundant = false;
        break;
      }
    }
    if (all_redundant) {
      out.status = MrpiStatus::Ok;
      out.set = remove_redundancy(cur, slack, settings);
      out.iterations = iter;
      return out;
    }
    Mat C2(C.rows() + nextC.rows(), C.cols());
    C2 << C, nextC;
    Vec d2(d.size() + nextD.size());
    d2 << d, nextD;
    C = C2;
    d = d2;
    if (is_empty({C, d}, settings)) {
      out.status = MrpiStatus::Empty;
      return out;
    }
    blockC = nextC;
    blockD = nextD;
  }
  out.status = MrpiStatus::MaxIter;
  out.iterations = max_iter;
  return out;
}

double minimal_rpi_support(const Mat& Phi, const HPolytope& W, const Vec& a,
                           double alpha, const conic::SolverSettings& settings) {
  if (alpha <= 0.0 || alpha >= 1.0)
    throw std::invalid_argument("minimal_rpi_support: alpha must be in (0,1)");
  if (!origin_interior(W))
    throw std::invalid_argument("minimal_rpi_support: W must contain the origin strictly");
  const int cap = 200;
  Mat PhiPow = Phi;
  int s = -1;
  for (int k = 1; k <= cap; ++k) {
    bool inside = true;
    for (int i = 0; i < W.rows(); ++i) {
      double h = support(W, PhiPow.transpose() * W.C.row(i).transpose(), settings);
      if (h > alpha * W.d(i)) {
        inside = false;
        break;
      }
    }
    if (inside) {
      s = k;
      break;
    }
    PhiPow = PhiPow * Phi;
  }
  if (s < 0) throw std::runtime_error("minimal_rpi_support: contraction horizon not found");
  double total = 0.0;
  Mat Pw = Mat::Identity(Phi.rows(), Phi.cols());
  for (int i = 0; i < s; ++i) {
    total += support(W, Pw.transpose() * a, settings);
    Pw = Pw * Phi;
  }
  return total / (1.0 - alpha);
}

}  // namespace drmpc::poly
