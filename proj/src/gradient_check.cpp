#include <algorithm>
#include <cmath>
#include <vector>

#include "uavplan/convex_engine.hpp"

namespace uavplan {

double check_gradient(const ValueGradFn& f, std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> g(n), scratch(n), xp(x.begin(), x.end());
  f(x, g);
  double scale = 1e-300;
  for (double v : g) scale = std::max(scale, std::abs(v));

  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x[i]));
    xp[i] = x[i] + h;
    const double fp = f(xp, scratch);
    xp[i] = x[i] - h;
    const double fm = f(xp, scratch);
    xp[i] = x[i];
    const double fd = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - g[i]) / scale);
  }
  return worst;
}

double check_gradient(const SmoothFunction& f, std::span<const double> x) {
  std::vector<double> local(f.support.size());
  for (std::size_t i = 0; i < f.support.size(); ++i) local[i] = x[static_cast<std::size_t>(f.support[i])];
  return check_gradient(
      [&f](std::span<const double> xl, std::span<double> g) { return f.eval(xl, g, nullptr); }, local);
}

}  // namespace uavplan
