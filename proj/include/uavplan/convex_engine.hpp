#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace uavplan {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct SolverConfig {
  double t0 = 1.0;          ///< initial barrier weight on the objective
  double growth = 10.0;     ///< barrier weight multiplier per outer step
  double inner_tol = 1e-8;  ///< Newton decrement^2 / 2 stopping level
  double gap_tol = 1e-7;    ///< stop once (#barrier terms) / t drops below this
  double tol_feas = 1e-6;   ///< accepted constraint violation on return
  double slack_floor = 1e-6;  ///< smallest slack (-g_i, bound distance) kept by the returned point
  int max_outer = 40;
  int max_inner = 200;

  /// Throws DomainError unless growth > 1 and all tolerances are positive.
  void validate() const;
};

// ---------------------------------------------------------------- LP ------

/// maximize c^T x  s.t.  rows (a_i^T x <= b_i),  lower <= x <= upper.
struct LPProblem {
  struct Row {
    std::vector<std::pair<int, double>> coeffs;
    double bound = 0.0;
  };
  std::vector<double> objective;
  std::vector<Row> rows;
  std::vector<double> lower;  ///< may be -kInf
  std::vector<double> upper;  ///< may be +kInf

  int num_vars() const { return static_cast<int>(objective.size()); }
  /// Appends a variable with the given bounds and objective weight, returns its index.
  int add_variable(double lo, double hi, double cost = 0.0);
  void add_row(std::vector<std::pair<int, double>> coeffs, double bound);
};

struct LPSolution {
  std::vector<double> x;
  double objective = 0.0;
};

/// Two-phase dense simplex with Bland's anti-cycling rule. Throws
/// InfeasibleError / UnboundedError.
LPSolution solve_lp(const LPProblem& p, const SolverConfig& cfg = {});

// ------------------------------------------------------- smooth / barrier ---

/// Receives Hessian entries in the local (support) numbering of a function.
/// Only one of (a, b) / (b, a) should be emitted for off-diagonal pairs.
class HessianSink {
 public:
  virtual ~HessianSink() = default;
  virtual void add(int a, int b, double v) = 0;
};

/// A function of the variables listed in `support`. `eval` receives the
/// gathered local values, writes the local gradient and, when `hess` is
/// non-null, emits its Hessian. Emission order and count must not depend on x.
/// Returning a non-finite value marks x as outside the function's domain.
struct SmoothFunction {
  std::vector<int> support;
  std::function<double(std::span<const double> x, std::span<double> grad, HessianSink* hess)> eval;
};

/// maximize f(x) (concave)  s.t.  g_i(x) <= 0 (convex),  lower <= x <= upper.
struct SmoothProblem {
  int dimension = 0;
  SmoothFunction objective;
  std::vector<SmoothFunction> constraints;
  std::vector<double> lower;  ///< empty or size `dimension`; -kInf allowed
  std::vector<double> upper;  ///< empty or size `dimension`; +kInf allowed
  std::vector<double> start;  ///< strictly feasible point
};

struct SmoothResult {
  std::vector<double> x;
  double objective = 0.0;
  double start_objective = 0.0;
  double max_violation = 0.0;    ///< max_i g_i(x), bounds included
  bool converged = false;        ///< false: iteration cap hit, best iterate returned
  int newton_steps = 0;
  std::vector<double> outer_objectives;  ///< f after each centering step
  std::string message;
};

/// Log-barrier interior-point maximization: barrier weight t grows per outer
/// stage, each stage centered by primal-dual Newton steps (sparse LDLT). The
/// returned point keeps every slack >= slack_floor when the start allowed it.
/// Throws InfeasibleError if `start` is not strictly feasible.
SmoothResult solve_smooth(const SmoothProblem& p, const SolverConfig& cfg = {});

/// max_i g_i(x) over constraints and simple bounds (negative means strict).
double max_constraint_value(const SmoothProblem& p, std::span<const double> x);

// -------------------------------------------------------- gradient check ---

using ValueGradFn = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Largest |analytic_i - central_difference_i| / max(||analytic||_inf, 1e-300),
/// with step h_i = 1e-6 (1 + |x_i|).
double check_gradient(const ValueGradFn& f, std::span<const double> x);

/// Same check for a SmoothFunction evaluated on a full-length vector x.
double check_gradient(const SmoothFunction& f, std::span<const double> x);

}  // namespace uavplan
