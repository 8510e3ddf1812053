#include "uavplan/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "uavplan/errors.hpp"

namespace uavplan {

void ChannelParams::validate() const {
  if (!(beta0 > 0.0)) throw DomainError("beta0 must be positive");
  if (!(mu > 0.0 && mu < 1.0)) throw DomainError("mu must lie in (0, 1)");
  if (!(alpha_L >= 2.0 && alpha_L < alpha_N)) {
    throw DomainError("path-loss exponents must satisfy 2 <= alpha_L < alpha_N");
  }
  if (!(sigma2 > 0.0)) throw DomainError("noise power must be positive");
  if (!(pk > 0.0)) throw DomainError("transmit power must be positive");
}

double distance_power(double d, double alpha) { return std::exp(alpha * std::log(d)); }

namespace {
void require_positive_distance(double d) {
  if (!(d > 0.0)) throw DomainError("channel distance must be positive");
}

double distance_between(const Vec3& q, const Vec3& w) {
  const double d = (q - w).norm();
  if (d == 0.0) throw DomainError("UAV and GN positions coincide");
  return d;
}
}  // namespace

double los_gain(double d, const ChannelParams& cp) {
  require_positive_distance(d);
  return cp.beta0 / distance_power(d, cp.alpha_L);
}

double nlos_gain(double d, const ChannelParams& cp) {
  require_positive_distance(d);
  return cp.mu * cp.beta0 / distance_power(d, cp.alpha_N);
}

double gain(double d, ChannelState state, const ChannelParams& cp) {
  return state == ChannelState::LoS ? los_gain(d, cp) : nlos_gain(d, cp);
}

double lower_bound_gain(double d, double c_bar, const ChannelParams& cp) {
  if (!(c_bar >= 0.0 && c_bar <= 1.0)) throw DomainError("c_bar must lie in [0, 1]");
  return c_bar * los_gain(d, cp) + (1.0 - c_bar) * nlos_gain(d, cp);
}

double qt_gain(const Vec3& q, const Vec3& w, double c_bar, double lambda, double kappa,
               const ChannelParams& cp) {
  const double d = distance_between(q, w);
  return cp.beta0 * (2.0 * lambda * std::sqrt(c_bar) - lambda * lambda * distance_power(d, cp.alpha_L) +
                     2.0 * kappa * std::sqrt(cp.mu * (1.0 - c_bar)) -
                     kappa * kappa * distance_power(d, cp.alpha_N));
}

QtAux qt_optimal_aux(const Vec3& q, const Vec3& w, double c_bar, const ChannelParams& cp) {
  const double d = distance_between(q, w);
  return QtAux{std::sqrt(c_bar) / distance_power(d, cp.alpha_L),
               std::sqrt(cp.mu * (1.0 - c_bar)) / distance_power(d, cp.alpha_N)};
}

QtGainDerivatives qt_gain_derivatives(const Vec3& q, const Vec3& w, double c_bar, double lambda,
                                      double kappa, const ChannelParams& cp) {
  const Vec3 r = q - w;
  const double d2 = r.squaredNorm();
  if (d2 == 0.0) throw DomainError("UAV and GN positions coincide");
  const double d = std::sqrt(d2);

  QtGainDerivatives out;
  out.value = qt_gain(q, w, c_bar, lambda, kappa, cp);

  // grad d^a = a d^(a-2) r;  hess d^a = a d^(a-2) I + a (a-2) d^(a-4) r r^T
  auto add_power_term = [&](double alpha, double weight) {
    const double pa2 = distance_power(d, alpha - 2.0);
    out.grad.head<3>() += weight * alpha * pa2 * r;
    out.hess.topLeftCorner<3, 3>() +=
        weight * (alpha * pa2 * Eigen::Matrix3d::Identity() + alpha * (alpha - 2.0) * pa2 / d2 * r * r.transpose());
  };
  add_power_term(cp.alpha_L, -cp.beta0 * lambda * lambda);
  add_power_term(cp.alpha_N, -cp.beta0 * kappa * kappa);

  const double c = std::clamp(c_bar, kCbarClamp, 1.0 - kCbarClamp);
  const double sq_c = std::sqrt(c);
  const double sq_1c = std::sqrt(1.0 - c);
  const double sq_mu = std::sqrt(cp.mu);
  out.grad[3] = cp.beta0 * (lambda / sq_c - kappa * sq_mu / sq_1c);
  out.hess(3, 3) = -0.5 * cp.beta0 * (lambda / (c * sq_c) + kappa * sq_mu / ((1.0 - c) * sq_1c));
  return out;
}

double spectral_efficiency(double s, double h, const ChannelParams& cp) {
  return s * std::log2(1.0 + cp.snr_scale() * h);
}

RateSummary average_rates(std::span<const Vec3> traj, std::span<const Vec3> gns,
                          const Grid& schedule, const Grid& los, const ChannelParams& cp) {
  const auto K = static_cast<Eigen::Index>(gns.size());
  if (traj.size() < 2) throw DomainError("trajectory needs at least q[0] and q[1]");
  const auto N = static_cast<Eigen::Index>(traj.size() - 1);
  if (schedule.rows() != K || schedule.cols() != N || los.rows() != K || los.cols() != N) {
    throw DomainError("average_rates: schedule / state grids do not match (K, N)");
  }
  RateSummary out;
  out.per_gn.assign(static_cast<std::size_t>(K), 0.0);
  for (Eigen::Index k = 0; k < K; ++k) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < N; ++j) {
      const double s = schedule(k, j);
      if (s == 0.0) continue;
      const double d = (traj[static_cast<std::size_t>(j + 1)] - gns[static_cast<std::size_t>(k)]).norm();
      const ChannelState st = los(k, j) >= 0.5 ? ChannelState::LoS : ChannelState::NLoS;
      acc += spectral_efficiency(s, gain(d, st, cp), cp);
    }
    out.per_gn[static_cast<std::size_t>(k)] = acc / static_cast<double>(N);
  }
  out.min_rate = K > 0 ? *std::min_element(out.per_gn.begin(), out.per_gn.end()) : 0.0;
  return out;
}

}  // namespace uavplan
