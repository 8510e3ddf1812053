#include <doctest.h>

#include <cmath>
#include <random>

#include "uavplan/channel.hpp"
#include "uavplan/convex_engine.hpp"
#include "uavplan/errors.hpp"

using namespace uavplan;

namespace {

// Reference-table channel: 0 dB, -30 dB, 2 / 2.7, -70 dBm noise, 30 dBm power.
ChannelParams table_channel() { return ChannelParams{}; }

double ref_lb_gain(double d, double cb, const ChannelParams& cp) {
  return cb * cp.beta0 / std::pow(d, cp.alpha_L) + (1 - cb) * cp.mu * cp.beta0 / std::pow(d, cp.alpha_N);
}

struct Draw {
  Vec3 q, w;
  double c_bar;
};

Draw random_draw(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Draw d;
  d.w = Vec3(-50 + 100 * unit(rng), -50 + 100 * unit(rng), 0.0);
  d.q = Vec3(-100 + 200 * unit(rng), -100 + 200 * unit(rng), 2 + 150 * unit(rng));
  d.c_bar = unit(rng);
  return d;
}

}  // namespace

TEST_CASE("gain") {
  const ChannelParams cp = table_channel();
  CHECK(gain(1.0, ChannelState::LoS, cp) == doctest::Approx(1.0));
  CHECK(gain(100.0, ChannelState::LoS, cp) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(gain(100.0, ChannelState::NLoS, cp) == doctest::Approx(std::pow(10.0, -8.4)).epsilon(1e-12));
  CHECK(gain(100.0, ChannelState::NLoS, cp) == doctest::Approx(3.981e-9).epsilon(1e-3));
  CHECK_THROWS_AS(gain(0.0, ChannelState::LoS, cp), DomainError);
  CHECK_THROWS_AS(gain(-1.0, ChannelState::NLoS, cp), DomainError);
}

TEST_CASE("lower_bound_gain") {
  const ChannelParams cp = table_channel();
  CHECK(lower_bound_gain(100, 1.0, cp) == doctest::Approx(1e-4));
  CHECK(lower_bound_gain(100, 0.0, cp) == doctest::Approx(3.981e-9).epsilon(1e-3));
  CHECK(lower_bound_gain(100, 0.5, cp) == doctest::Approx(5.0002e-5).epsilon(1e-5));
  CHECK_THROWS_AS(lower_bound_gain(0.0, 0.5, cp), DomainError);
}

TEST_CASE("qt_gain values") {
  const ChannelParams cp = table_channel();
  const Vec3 w(0, 0, 0), q(0, 0, 100);
  CHECK(qt_gain(q, w, 0.3, 0.0, 0.0, cp) == 0.0);
  CHECK(qt_gain(q, w, 1.0, 1e-4, 0.0, cp) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK_THROWS_AS(qt_gain(w, w, 0.5, 1.0, 1.0, cp), DomainError);
}

TEST_CASE("qt_optimal_aux") {
  const ChannelParams cp = table_channel();
  const Vec3 w(0, 0, 0), q(0, 0, 100);
  const QtAux one = qt_optimal_aux(q, w, 1.0, cp);
  CHECK(one.lambda == doctest::Approx(1e-4));
  CHECK(one.kappa == 0.0);
  const QtAux zero = qt_optimal_aux(q, w, 0.0, cp);
  CHECK(zero.lambda == 0.0);
  CHECK(zero.kappa == doctest::Approx(1.259e-7).epsilon(1e-3));
  const Vec3 q2(3, 4, 50);
  CHECK(qt_optimal_aux(q2, w, 0.5, cp).lambda * std::pow(q2.norm(), 2.0) == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(qt_optimal_aux(w, w, 0.5, cp), DomainError);
}

TEST_CASE("spectral_efficiency") {
  const ChannelParams cp = table_channel();
  CHECK(spectral_efficiency(0.0, 1e-4, cp) == 0.0);
  CHECK(spectral_efficiency(1.0, 1e-4, cp) == doctest::Approx(std::log2(1 + 1e6)));
  CHECK(spectral_efficiency(1.0, 1e-4, cp) == doctest::Approx(19.93).epsilon(1e-3));
  CHECK(spectral_efficiency(1.0, 3.981e-9, cp) == doctest::Approx(5.351).epsilon(1e-3));
}

TEST_CASE("average_rates") {
  const ChannelParams cp = table_channel();
  const int N = 5;
  std::vector<Vec3> traj(N + 1, Vec3(0, 0, 100));
  const std::vector<Vec3> gns{Vec3(0, 0, 0)};

  const RateSummary idle = average_rates(traj, gns, Grid::Zero(1, N), Grid::Ones(1, N), cp);
  CHECK(idle.per_gn[0] == 0.0);
  CHECK(idle.min_rate == 0.0);

  const RateSummary hover = average_rates(traj, gns, Grid::Ones(1, N), Grid::Ones(1, N), cp);
  CHECK(hover.per_gn[0] == doctest::Approx(19.93).epsilon(1e-3));
  CHECK(hover.min_rate == hover.per_gn[0]);

  CHECK_THROWS(average_rates(traj, gns, Grid::Ones(2, N), Grid::Ones(1, N), cp));
}

TEST_CASE("property: quadratic transform is tight at the optimal multipliers") {
  const ChannelParams cp = table_channel();
  std::mt19937_64 rng(21);
  for (int i = 0; i < 1000; ++i) {
    const Draw d = random_draw(rng);
    const QtAux aux = qt_optimal_aux(d.q, d.w, d.c_bar, cp);
    const double lb = lower_bound_gain((d.q - d.w).norm(), d.c_bar, cp);
    CHECK(std::abs(qt_gain(d.q, d.w, d.c_bar, aux.lambda, aux.kappa, cp) - lb) <= 1e-12 * lb);
    CHECK(std::abs(ref_lb_gain((d.q - d.w).norm(), d.c_bar, cp) - lb) <= 1e-12 * lb);
  }
}

TEST_CASE("property: suboptimal multipliers never exceed the lower bound") {
  const ChannelParams cp = table_channel();
  std::mt19937_64 rng(22);
  std::lognormal_distribution<double> scale(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const Draw d = random_draw(rng);
    const QtAux aux = qt_optimal_aux(d.q, d.w, d.c_bar, cp);
    const double lb = lower_bound_gain((d.q - d.w).norm(), d.c_bar, cp);
    const double v = qt_gain(d.q, d.w, d.c_bar, aux.lambda * scale(rng), aux.kappa * scale(rng), cp);
    CHECK(v <= lb * (1 + 1e-12));
  }
}

TEST_CASE("property: lower bound below the true gain") {
  const ChannelParams cp = table_channel();
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double d = 1 + 300 * unit(rng);
    CHECK(nlos_gain(d, cp) <= los_gain(d, cp));
    CHECK(lower_bound_gain(d, 0.0, cp) <= gain(d, ChannelState::NLoS, cp) * (1 + 1e-14));
    CHECK(lower_bound_gain(d, unit(rng), cp) <= gain(d, ChannelState::LoS, cp) * (1 + 1e-14));
  }
}

TEST_CASE("property: qt_gain is concave in position and c_bar") {
  const ChannelParams cp = table_channel();
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec3 w(0, 0, 0);
  for (int i = 0; i < 10000; ++i) {
    const Draw ref = random_draw(rng);
    const QtAux aux = qt_optimal_aux(ref.q, w, ref.c_bar, cp);
    auto point = [&] { return Vec3(-60 + 120 * unit(rng), -60 + 120 * unit(rng), 1.5 + 100 * unit(rng)); };
    const Vec3 x = point(), y = point();
    const double cx = unit(rng), cy = unit(rng);
    const double fx = qt_gain(x, w, cx, aux.lambda, aux.kappa, cp);
    const double fy = qt_gain(y, w, cy, aux.lambda, aux.kappa, cp);
    const double fm = qt_gain((x + y) / 2, w, (cx + cy) / 2, aux.lambda, aux.kappa, cp);
    CHECK(fm >= (fx + fy) / 2 - 1e-10);
  }
}

TEST_CASE("property: spectral efficiency is monotone") {
  const ChannelParams cp = table_channel();
  std::mt19937_64 rng(25);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double h1 = 1e-9 * std::pow(1e6, unit(rng)), h2 = 1e-9 * std::pow(1e6, unit(rng));
    const double s1 = unit(rng), s2 = unit(rng);
    CHECK((spectral_efficiency(s1, std::min(h1, h2), cp) <= spectral_efficiency(s1, std::max(h1, h2), cp)));
    CHECK((spectral_efficiency(std::min(s1, s2), h1, cp) <= spectral_efficiency(std::max(s1, s2), h1, cp)));
  }
}

TEST_CASE("qt_gain derivatives match finite differences") {
  const ChannelParams cp = table_channel();
  std::mt19937_64 rng(26);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Draw d = random_draw(rng);
    const double cb = 0.05 + 0.9 * d.c_bar;
    const QtAux aux = qt_optimal_aux(d.q, d.w, cb, cp);
    // Scale to O(1) so the relative check is meaningful.
    const double s = 1.0 / lower_bound_gain((d.q - d.w).norm(), cb, cp);
    const ValueGradFn f = [&](std::span<const double> x, std::span<double> g) {
      const auto r = qt_gain_derivatives(Vec3(x[0], x[1], x[2]), d.w, x[3], aux.lambda, aux.kappa, cp);
      for (int j = 0; j < 4; ++j) g[static_cast<std::size_t>(j)] = s * r.grad[j];
      return s * r.value;
    };
    const std::vector<double> x{d.q.x(), d.q.y(), d.q.z(), cb};
    CHECK(check_gradient(f, x) <= 1e-5);
  }
}
