#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "uavplan/convex_engine.hpp"
#include "uavplan/errors.hpp"

namespace uavplan {

void SolverConfig::validate() const {
  if (!(growth > 1.0)) throw DomainError("barrier growth factor must exceed 1");
  if (!(t0 > 0.0 && inner_tol > 0.0 && gap_tol > 0.0 && tol_feas > 0.0 && slack_floor >= 0.0)) {
    throw DomainError("solver tolerances must be positive");
  }
  if (max_outer < 1 || max_inner < 1) throw DomainError("iteration limits must be positive");
}

int LPProblem::add_variable(double lo, double hi, double cost) {
  objective.push_back(cost);
  lower.push_back(lo);
  upper.push_back(hi);
  return num_vars() - 1;
}

void LPProblem::add_row(std::vector<std::pair<int, double>> coeffs, double bound) {
  rows.push_back(Row{std::move(coeffs), bound});
}

namespace {

constexpr double kPivotTol = 1e-9;

// Dense simplex tableau. Column layout: [structural | slack | artificial | rhs].
// The last row holds reduced costs of the maximization objective (entering
// columns have negative entries).
class Tableau {
 public:
  Tableau(int rows, int cols) : t_(Eigen::MatrixXd::Zero(rows + 1, cols + 1)), basis_(rows, -1) {}

  double& at(int r, int c) { return t_(r, c); }
  double rhs(int r) const { return t_(r, t_.cols() - 1); }
  double& rhs(int r) { return t_(r, t_.cols() - 1); }
  double& cost(int c) { return t_(rows(), c); }
  double objective_value() const { return t_(rows(), t_.cols() - 1); }
  int rows() const { return static_cast<int>(t_.rows()) - 1; }
  int cols() const { return static_cast<int>(t_.cols()) - 1; }
  std::vector<int>& basis() { return basis_; }

  void pivot(int r, int c) {
    t_.row(r) /= t_(r, c);
    for (int i = 0; i <= rows(); ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = c;
  }

  // Makes the cost row consistent with the current basis.
  void price_out_basis() {
    for (int r = 0; r < rows(); ++r) {
      const int b = basis_[static_cast<std::size_t>(r)];
      const double f = t_(rows(), b);
      if (f != 0.0) t_.row(rows()) -= f * t_.row(r);
    }
  }

  enum class Status { Optimal, Unbounded };

  // Maximizes over columns [0, allowed_cols). Dantzig pricing, switching to
  // Bland's rule after a run of degenerate pivots.
  Status optimize(int allowed_cols) {
    int degenerate_run = 0;
    const long max_pivots = 50L * (rows() + cols()) + 1000;
    for (long it = 0; it < max_pivots; ++it) {
      const bool bland = degenerate_run > 50;
      int enter = -1;
      double best = -kPivotTol;
      for (int c = 0; c < allowed_cols; ++c) {
        const double rc = t_(rows(), c);
        if (rc < -kPivotTol) {
          if (bland) {
            enter = c;
            break;
          }
          if (rc < best) {
            best = rc;
            enter = c;
          }
        }
      }
      if (enter < 0) return Status::Optimal;

      int leave = -1;
      double best_ratio = kInf;
      for (int r = 0; r < rows(); ++r) {
        const double a = t_(r, enter);
        if (a > kPivotTol) {
          const double ratio = rhs(r) / a;
          if (ratio < best_ratio - 1e-12 ||
              (ratio <= best_ratio + 1e-12 && leave >= 0 &&
               basis_[static_cast<std::size_t>(r)] < basis_[static_cast<std::size_t>(leave)])) {
            best_ratio = ratio;
            leave = r;
          }
        }
      }
      if (leave < 0) return Status::Unbounded;
      degenerate_run = best_ratio <= 1e-12 ? degenerate_run + 1 : 0;
      pivot(leave, enter);
    }
    throw std::runtime_error("simplex pivot limit exceeded");
  }

 private:
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
};

// Maps an original variable onto nonnegative structural columns.
struct VarMap {
  double offset = 0.0;
  int col_pos = -1;  // +y
  int col_neg = -1;  // -y
};

}  // namespace

LPSolution solve_lp(const LPProblem& p, const SolverConfig& cfg) {
  const int n = p.num_vars();
  if (static_cast<int>(p.lower.size()) != n || static_cast<int>(p.upper.size()) != n) {
    throw DomainError("LP bound vectors do not match the variable count");
  }

  std::vector<VarMap> vars(static_cast<std::size_t>(n));
  int ny = 0;
  struct DenseRow {
    std::vector<std::pair<int, double>> coeffs;  // structural columns
    double bound;
  };
  std::vector<DenseRow> rows;

  for (int j = 0; j < n; ++j) {
    const double lo = p.lower[static_cast<std::size_t>(j)];
    const double hi = p.upper[static_cast<std::size_t>(j)];
    if (lo > hi) throw InfeasibleError("LP variable has lower bound above upper bound");
    auto& v = vars[static_cast<std::size_t>(j)];
    if (std::isfinite(lo)) {
      v.offset = lo;
      v.col_pos = ny++;
      if (std::isfinite(hi)) rows.push_back({{{v.col_pos, 1.0}}, hi - lo});
    } else if (std::isfinite(hi)) {
      v.offset = hi;
      v.col_neg = ny++;
    } else {
      v.col_pos = ny++;
      v.col_neg = ny++;
    }
  }

  for (const auto& row : p.rows) {
    DenseRow r{{}, row.bound};
    for (const auto& [j, a] : row.coeffs) {
      if (j < 0 || j >= n) throw DomainError("LP row references an unknown variable");
      const auto& v = vars[static_cast<std::size_t>(j)];
      r.bound -= a * v.offset;
      if (v.col_pos >= 0) r.coeffs.emplace_back(v.col_pos, a);
      if (v.col_neg >= 0) r.coeffs.emplace_back(v.col_neg, -a);
    }
    rows.push_back(std::move(r));
  }

  const int m = static_cast<int>(rows.size());
  int n_art = 0;
  for (const auto& r : rows) n_art += r.bound < 0.0 ? 1 : 0;

  const int slack0 = ny;
  const int art0 = ny + m;
  Tableau tab(m, ny + m + n_art);
  int art = art0;
  for (int i = 0; i < m; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    const double sign = r.bound < 0.0 ? -1.0 : 1.0;
    for (const auto& [c, a] : r.coeffs) tab.at(i, c) += sign * a;
    tab.at(i, slack0 + i) = sign;
    tab.rhs(i) = sign * r.bound;
    if (sign < 0.0) {
      tab.at(i, art) = 1.0;
      tab.basis()[static_cast<std::size_t>(i)] = art++;
    } else {
      tab.basis()[static_cast<std::size_t>(i)] = slack0 + i;
    }
  }

  if (n_art > 0) {
    for (int c = art0; c < art0 + n_art; ++c) tab.cost(c) = 1.0;
    tab.price_out_basis();
    tab.optimize(art0 + n_art);
    if (tab.objective_value() < -cfg.tol_feas) {
      throw InfeasibleError("LP is infeasible");
    }
    // Drive zero-level artificials out of the basis where possible.
    for (int r = 0; r < m; ++r) {
      if (tab.basis()[static_cast<std::size_t>(r)] < art0) continue;
      for (int c = 0; c < art0; ++c) {
        if (std::abs(tab.at(r, c)) > kPivotTol) {
          tab.pivot(r, c);
          break;
        }
      }
    }
    for (int c = 0; c <= tab.cols(); ++c) tab.cost(c) = 0.0;
  }

  for (int j = 0; j < n; ++j) {
    const auto& v = vars[static_cast<std::size_t>(j)];
    const double c = p.objective[static_cast<std::size_t>(j)];
    if (v.col_pos >= 0) tab.cost(v.col_pos) -= c;
    if (v.col_neg >= 0) tab.cost(v.col_neg) += c;
  }
  tab.price_out_basis();
  if (tab.optimize(art0) == Tableau::Status::Unbounded) {
    throw UnboundedError("LP objective is unbounded");
  }

  std::vector<double> y(static_cast<std::size_t>(ny), 0.0);
  for (int r = 0; r < m; ++r) {
    const int b = tab.basis()[static_cast<std::size_t>(r)];
    if (b < ny) y[static_cast<std::size_t>(b)] = tab.rhs(r);
  }
  LPSolution sol;
  sol.x.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const auto& v = vars[static_cast<std::size_t>(j)];
    double x = v.offset;
    if (v.col_pos >= 0) x += y[static_cast<std::size_t>(v.col_pos)];
    if (v.col_neg >= 0) x -= y[static_cast<std::size_t>(v.col_neg)];
    // Snap to the box to remove pivoting round-off.
    x = std::clamp(x, p.lower[static_cast<std::size_t>(j)], p.upper[static_cast<std::size_t>(j)]);
    sol.x[static_cast<std::size_t>(j)] = x;
    sol.objective += p.objective[static_cast<std::size_t>(j)] * x;
  }
  return sol;
}

}  // namespace uavplan
