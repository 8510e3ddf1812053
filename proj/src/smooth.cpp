#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "uavplan/convex_engine.hpp"
#include "uavplan/errors.hpp"

namespace uavplan {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

// Accumulates lower-triangle Hessian entries into a sparse matrix whose
// pattern is fixed after the first assembly.
class Assembler {
 public:
  explicit Assembler(int n) : n_(n) {}

  void begin() {
    cursor_ = 0;
    if (frozen_) std::fill(h_.valuePtr(), h_.valuePtr() + h_.nonZeros(), 0.0);
  }

  void add(int r, int c, double v) {
    if (r < c) std::swap(r, c);
    if (!frozen_) {
      triplets_.emplace_back(r, c, v);
    } else {
      h_.valuePtr()[slots_[cursor_]] += v;
    }
    ++cursor_;
  }

  // Returns true when the pattern was (re)built on this call.
  bool finish() {
    if (frozen_) {
      if (cursor_ != slots_.size()) throw std::logic_error("Hessian emission count changed between evaluations");
      return false;
    }
    h_.resize(n_, n_);
    h_.setFromTriplets(triplets_.begin(), triplets_.end());
    h_.makeCompressed();
    slots_.resize(triplets_.size());
    for (std::size_t i = 0; i < triplets_.size(); ++i) {
      const int r = triplets_[i].row();
      const int c = triplets_[i].col();
      const int* inner = h_.innerIndexPtr();
      const int begin = h_.outerIndexPtr()[c];
      const int end = h_.outerIndexPtr()[c + 1];
      const int* pos = std::lower_bound(inner + begin, inner + end, r);
      slots_[i] = static_cast<std::size_t>(pos - inner);
    }
    triplets_.clear();
    triplets_.shrink_to_fit();
    frozen_ = true;
    return true;
  }

  SpMat& matrix() { return h_; }

 private:
  int n_;
  bool frozen_ = false;
  std::size_t cursor_ = 0;
  std::vector<Eigen::Triplet<double>> triplets_;
  std::vector<std::size_t> slots_;
  SpMat h_;
};

class LocalSink final : public HessianSink {
 public:
  struct Entry {
    int a, b;
    double v;
  };
  void add(int a, int b, double v) override { entries.push_back({a, b, v}); }
  std::vector<Entry> entries;
};

// Multipliers of the inequality rows and of the finite simple bounds.
struct Duals {
  std::vector<double> rows, lower, upper;
};

// Local gradients and slacks (-g_i > 0) of every row at one point.
struct Linearization {
  double objective = 0.0;
  std::vector<double> objective_grad;
  std::vector<double> slack;
  std::vector<std::vector<double>> grad;
};

class BarrierContext {
 public:
  BarrierContext(const SmoothProblem& p) : p_(p), n_(p.dimension) {
    const auto sz = static_cast<std::size_t>(n_);
    lower_ = p.lower.empty() ? std::vector<double>(sz, -kInf) : p.lower;
    upper_ = p.upper.empty() ? std::vector<double>(sz, kInf) : p.upper;
    if (lower_.size() != sz || upper_.size() != sz) {
      throw DomainError("smooth problem bounds do not match its dimension");
    }
    for (int j = 0; j < n_; ++j) {
      if (std::isfinite(lower_[static_cast<std::size_t>(j)])) ++num_bounds_;
      if (std::isfinite(upper_[static_cast<std::size_t>(j)])) ++num_bounds_;
    }
  }

  int num_barrier_terms() const { return static_cast<int>(p_.constraints.size()) + num_bounds_; }

  double eval(const SmoothFunction& f, const std::vector<double>& x, std::vector<double>& grad,
              LocalSink* sink) const {
    local_.resize(f.support.size());
    for (std::size_t i = 0; i < f.support.size(); ++i) {
      local_[i] = x[static_cast<std::size_t>(f.support[i])];
    }
    grad.assign(f.support.size(), 0.0);
    if (sink) sink->entries.clear();
    return f.eval(local_, grad, sink);
  }

  double objective(const std::vector<double>& x) const {
    std::vector<double> g;
    return eval(p_.objective, x, g, nullptr);
  }

  bool strictly_inside_bounds(const std::vector<double>& x) const {
    for (int j = 0; j < n_; ++j) {
      const auto i = static_cast<std::size_t>(j);
      if (!(x[i] > lower_[i] && x[i] < upper_[i])) return false;
    }
    return true;
  }

  // Fills `lin` at x; when `asmb` is given also assembles the primal-dual
  // Hessian for multipliers `y` at weight t. Returns false outside the domain.
  bool linearize(const std::vector<double>& x, Linearization& lin, Assembler* asmb = nullptr, double t = 0.0,
                 const Duals* y = nullptr) const {
    if (!strictly_inside_bounds(x)) return false;
    LocalSink sink;
    LocalSink* hs = asmb ? &sink : nullptr;
    if (asmb) asmb->begin();

    lin.objective = eval(p_.objective, x, lin.objective_grad, hs);
    if (!std::isfinite(lin.objective)) return false;
    if (asmb) {
      const auto& os = p_.objective.support;
      for (const auto& e : sink.entries) {
        asmb->add(os[static_cast<std::size_t>(e.a)], os[static_cast<std::size_t>(e.b)], -t * e.v);
      }
    }

    const std::size_t m = p_.constraints.size();
    lin.slack.resize(m);
    lin.grad.resize(m);
    for (std::size_t r = 0; r < m; ++r) {
      const auto& c = p_.constraints[r];
      const double v = eval(c, x, lin.grad[r], hs);
      if (!(v < 0.0) || !std::isfinite(v)) return false;
      lin.slack[r] = -v;
      if (!asmb) continue;
      const double lam = y->rows[r];
      const double w = lam / lin.slack[r];
      const auto& s = c.support;
      const auto& g = lin.grad[r];
      for (const auto& e : sink.entries) {
        asmb->add(s[static_cast<std::size_t>(e.a)], s[static_cast<std::size_t>(e.b)], lam * e.v);
      }
      for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) asmb->add(s[i], s[j], w * g[i] * g[j]);
      }
    }

    if (asmb) {
      for (int j = 0; j < n_; ++j) {
        const auto i = static_cast<std::size_t>(j);
        double d = 0.0;
        if (std::isfinite(lower_[i])) d += y->lower[i] / (x[i] - lower_[i]);
        if (std::isfinite(upper_[i])) d += y->upper[i] / (upper_[i] - x[i]);
        asmb->add(j, j, d);
      }
      asmb->finish();
    }
    return true;
  }

  // Negative gradient of the barrier -t f - sum log(slack).
  Eigen::VectorXd barrier_descent(const std::vector<double>& x, const Linearization& lin, double t) const {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n_);
    const auto& os = p_.objective.support;
    for (std::size_t i = 0; i < os.size(); ++i) b[os[i]] += t * lin.objective_grad[i];
    for (std::size_t r = 0; r < p_.constraints.size(); ++r) {
      const auto& s = p_.constraints[r].support;
      const double inv = 1.0 / lin.slack[r];
      for (std::size_t i = 0; i < s.size(); ++i) b[s[i]] -= inv * lin.grad[r][i];
    }
    for (int j = 0; j < n_; ++j) {
      const auto i = static_cast<std::size_t>(j);
      if (std::isfinite(lower_[i])) b[j] += 1.0 / (x[i] - lower_[i]);
      if (std::isfinite(upper_[i])) b[j] -= 1.0 / (upper_[i] - x[i]);
    }
    return b;
  }

  // Squared norm of the centering residual: stationarity of the Lagrangian of
  // -t f plus complementarity lambda_i * slack_i = 1.
  double residual2(const std::vector<double>& x, const Linearization& lin, double t, const Duals& y) const {
    Eigen::VectorXd rd = Eigen::VectorXd::Zero(n_);
    double rc = 0.0;
    const auto& os = p_.objective.support;
    for (std::size_t i = 0; i < os.size(); ++i) rd[os[i]] -= t * lin.objective_grad[i];
    for (std::size_t r = 0; r < p_.constraints.size(); ++r) {
      const auto& s = p_.constraints[r].support;
      for (std::size_t i = 0; i < s.size(); ++i) rd[s[i]] += y.rows[r] * lin.grad[r][i];
      rc += sq(y.rows[r] * lin.slack[r] - 1.0);
    }
    for (int j = 0; j < n_; ++j) {
      const auto i = static_cast<std::size_t>(j);
      if (std::isfinite(lower_[i])) {
        rd[j] -= y.lower[i];
        rc += sq(y.lower[i] * (x[i] - lower_[i]) - 1.0);
      }
      if (std::isfinite(upper_[i])) {
        rd[j] += y.upper[i];
        rc += sq(y.upper[i] * (upper_[i] - x[i]) - 1.0);
      }
    }
    return rd.squaredNorm() + rc;
  }

  // Multipliers on the central path for the current slacks.
  Duals central_duals(const std::vector<double>& x, const Linearization& lin) const {
    Duals y;
    y.rows.resize(lin.slack.size());
    for (std::size_t r = 0; r < lin.slack.size(); ++r) y.rows[r] = 1.0 / lin.slack[r];
    y.lower.assign(static_cast<std::size_t>(n_), 0.0);
    y.upper.assign(static_cast<std::size_t>(n_), 0.0);
    for (int j = 0; j < n_; ++j) {
      const auto i = static_cast<std::size_t>(j);
      if (std::isfinite(lower_[i])) y.lower[i] = 1.0 / (x[i] - lower_[i]);
      if (std::isfinite(upper_[i])) y.upper[i] = 1.0 / (upper_[i] - x[i]);
    }
    return y;
  }

  // Multiplier step that linearizes lambda_i * slack_i = 1 along dx.
  Duals dual_step(const std::vector<double>& x, const Linearization& lin, const Duals& y,
                  const Eigen::VectorXd& dx) const {
    Duals d;
    d.rows.resize(lin.slack.size());
    for (std::size_t r = 0; r < lin.slack.size(); ++r) {
      const auto& s = p_.constraints[r].support;
      double gdx = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) gdx += lin.grad[r][i] * dx[s[i]];
      const double lam = y.rows[r];
      const double sl = lin.slack[r];
      d.rows[r] = -lam + 1.0 / sl + lam / sl * gdx;
    }
    d.lower.assign(static_cast<std::size_t>(n_), 0.0);
    d.upper.assign(static_cast<std::size_t>(n_), 0.0);
    for (int j = 0; j < n_; ++j) {
      const auto i = static_cast<std::size_t>(j);
      if (std::isfinite(lower_[i])) {
        const double sl = x[i] - lower_[i];
        d.lower[i] = -y.lower[i] + 1.0 / sl - y.lower[i] / sl * dx[j];
      }
      if (std::isfinite(upper_[i])) {
        const double sl = upper_[i] - x[i];
        d.upper[i] = -y.upper[i] + 1.0 / sl + y.upper[i] / sl * dx[j];
      }
    }
    return d;
  }

  // Smallest slack over rows and finite bounds; -inf outside the domain.
  double min_slack(const std::vector<double>& x) const {
    double worst = kInf;
    std::vector<double> g;
    for (const auto& c : p_.constraints) {
      const double v = eval(c, x, g, nullptr);
      if (!std::isfinite(v)) return -kInf;
      worst = std::min(worst, -v);
    }
    for (int j = 0; j < n_; ++j) {
      const auto i = static_cast<std::size_t>(j);
      if (std::isfinite(lower_[i])) worst = std::min(worst, x[i] - lower_[i]);
      if (std::isfinite(upper_[i])) worst = std::min(worst, upper_[i] - x[i]);
    }
    return worst;
  }

  double max_violation(const std::vector<double>& x) const {
    double worst = -kInf;
    std::vector<double> g;
    for (const auto& c : p_.constraints) {
      const double v = eval(c, x, g, nullptr);
      worst = std::max(worst, std::isfinite(v) ? v : kInf);
    }
    for (int j = 0; j < n_; ++j) {
      const auto i = static_cast<std::size_t>(j);
      if (std::isfinite(lower_[i])) worst = std::max(worst, lower_[i] - x[i]);
      if (std::isfinite(upper_[i])) worst = std::max(worst, x[i] - upper_[i]);
    }
    return worst;
  }

  // Largest step in [0, 1] keeping x + a dx strictly inside the simple bounds.
  double max_step(const std::vector<double>& x, const Eigen::VectorXd& dx) const {
    double a = 1.0;
    for (int j = 0; j < n_; ++j) {
      const auto i = static_cast<std::size_t>(j);
      if (dx[j] < 0.0 && std::isfinite(lower_[i])) a = std::min(a, 0.99 * (x[i] - lower_[i]) / -dx[j]);
      if (dx[j] > 0.0 && std::isfinite(upper_[i])) a = std::min(a, 0.99 * (upper_[i] - x[i]) / dx[j]);
    }
    return a;
  }

 private:
  static double sq(double v) { return v * v; }

  const SmoothProblem& p_;
  int n_;
  int num_bounds_ = 0;
  std::vector<double> lower_, upper_;
  mutable std::vector<double> local_;
};

// Largest step in [0, 1] keeping every multiplier positive.
double dual_max_step(const Duals& y, const Duals& dy) {
  double a = 1.0;
  auto scan = [&](const std::vector<double>& v, const std::vector<double>& dv) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (dv[i] < 0.0 && v[i] > 0.0) a = std::min(a, 0.99 * v[i] / -dv[i]);
    }
  };
  scan(y.rows, dy.rows);
  scan(y.lower, dy.lower);
  scan(y.upper, dy.upper);
  return a;
}

// Moves x a little toward an earlier, better-centered stage point until every
// slack reaches `floor`. Rows are convex, so slacks along the segment are at
// least the interpolated ones and the objective loss is proportional to theta.
void pull_inside(const BarrierContext& ctx, const std::vector<std::vector<double>>& stages, double start_objective,
                 double floor, std::vector<double>& x) {
  if (floor <= 0.0 || ctx.min_slack(x) >= floor) return;
  // Shortest blend toward each better-centered stage that restores the floor;
  // keep the blend with the best objective.
  std::vector<double> best;
  double best_f = start_objective;
  std::vector<double> mix(x.size());
  auto blend = [&](const std::vector<double>& anchor, double theta) {
    for (std::size_t i = 0; i < x.size(); ++i) mix[i] = x[i] + theta * (anchor[i] - x[i]);
  };
  for (const auto& anchor : stages) {
    if (ctx.min_slack(anchor) < 10.0 * floor) continue;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      blend(anchor, mid);
      (ctx.min_slack(mix) >= floor ? hi : lo) = mid;
    }
    blend(anchor, hi);
    if (ctx.min_slack(mix) < floor) continue;
    const double f = ctx.objective(mix);
    if (f >= best_f) {
      best_f = f;
      best = mix;
    }
  }
  if (!best.empty()) x.swap(best);
}

void axpy(std::vector<double>& out, const std::vector<double>& v, double a, const std::vector<double>& dv) {
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] + a * dv[i];
}

}  // namespace

double max_constraint_value(const SmoothProblem& p, std::span<const double> x) {
  BarrierContext ctx(p);
  return ctx.max_violation(std::vector<double>(x.begin(), x.end()));
}

SmoothResult solve_smooth(const SmoothProblem& p, const SolverConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(p.start.size()) != p.dimension) {
    throw DomainError("smooth problem start point has the wrong dimension");
  }
  BarrierContext ctx(p);
  std::vector<double> x = p.start;
  const int n = p.dimension;

  SmoothResult res;
  res.start_objective = ctx.objective(x);
  Linearization lin;
  if (!ctx.linearize(x, lin)) {
    throw InfeasibleError("solve_smooth: start point is not strictly feasible");
  }

  // Each outer stage centers at weight t with primal-dual Newton steps; the
  // multipliers carry over between stages.
  Assembler asmb(n);
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt;
  Duals y = ctx.central_duals(x, lin);
  Duals trial_y = y;
  std::vector<double> trial(static_cast<std::size_t>(n));
  Linearization trial_lin;

  double t = cfg.t0;
  const int m = std::max(ctx.num_barrier_terms(), 1);
  bool capped = false;
  std::vector<std::vector<double>> stages;

  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    bool centered = false;
    for (int inner = 0; inner < cfg.max_inner; ++inner) {
      ctx.linearize(x, lin, &asmb, t, &y);
      SpMat& H = asmb.matrix();
      if (res.newton_steps == 0) ldlt.analyzePattern(H);

      // Tiny diagonal regularization, grown until the factorization succeeds.
      Eigen::VectorXd diag = H.diagonal();
      double reg = 1e-14;
      for (int attempt = 0; attempt < 12; ++attempt) {
        for (int j = 0; j < n; ++j) H.coeffRef(j, j) = diag[j] + reg * (1.0 + std::abs(diag[j]));
        ldlt.factorize(H);
        if (ldlt.info() == Eigen::Success) break;
        reg *= 100.0;
      }
      if (ldlt.info() != Eigen::Success) {
        throw std::runtime_error("solve_smooth: Newton system factorization failed");
      }
      const Eigen::VectorXd rhs = ctx.barrier_descent(x, lin, t);
      const Eigen::VectorXd dx = ldlt.solve(rhs);
      ++res.newton_steps;

      const double decrement2 = rhs.dot(dx);
      if (!(decrement2 >= 0.0) || decrement2 / 2.0 <= cfg.inner_tol) {
        centered = true;
        break;
      }

      const Duals dy = ctx.dual_step(x, lin, y, dx);
      const double r0 = std::sqrt(ctx.residual2(x, lin, t, y));
      double a = std::min(ctx.max_step(x, dx), dual_max_step(y, dy));
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        for (int j = 0; j < n; ++j) {
          trial[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(j)] + a * dx[j];
        }
        if (ctx.linearize(trial, trial_lin)) {
          axpy(trial_y.rows, y.rows, a, dy.rows);
          axpy(trial_y.lower, y.lower, a, dy.lower);
          axpy(trial_y.upper, y.upper, a, dy.upper);
          if (std::sqrt(ctx.residual2(trial, trial_lin, t, trial_y)) <= (1.0 - 0.01 * a) * r0) {
            accepted = true;
            break;
          }
        }
        a *= 0.5;
      }
      if (!accepted) {
        // No progress possible at this precision; treat as centered.
        centered = true;
        break;
      }
      x.swap(trial);
      std::swap(y, trial_y);
      lin = trial_lin;
      double xscale = 1.0;
      for (double v : x) xscale = std::max(xscale, std::abs(v));
      if (a * dx.lpNorm<Eigen::Infinity>() <= 1e-13 * xscale) {
        // Steps below working precision: centered as far as doubles allow.
        centered = true;
        break;
      }
    }
    if (!centered) capped = true;
    stages.push_back(x);
    res.outer_objectives.push_back(ctx.objective(x));
    if (static_cast<double>(m) / t < cfg.gap_tol) {
      res.converged = !capped;
      break;
    }
    t *= cfg.growth;
  }

  pull_inside(ctx, stages, res.start_objective, cfg.slack_floor, x);

  res.objective = ctx.objective(x);
  if (res.objective < res.start_objective) {
    // Never hand back something worse than the feasible start.
    x = p.start;
    res.objective = res.start_objective;
    res.message = "returned start point (no ascent)";
  }
  if (capped) res.message = "iteration cap reached; best iterate returned";
  res.max_violation = ctx.max_violation(x);
  res.x = std::move(x);
  return res;
}

}  // namespace uavplan
