#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "uavplan/geometry.hpp"

namespace uavplan {

/// Dual-slope air-to-ground channel constants, all in linear SI units.
struct ChannelParams {
  double beta0 = 1.0;    ///< LoS power gain at 1 m
  double mu = 1e-3;      ///< extra NLoS attenuation, 0 < mu < 1
  double alpha_L = 2.0;  ///< LoS path-loss exponent
  double alpha_N = 2.7;  ///< NLoS path-loss exponent
  double sigma2 = 1e-10; ///< noise power [W]
  double pk = 1.0;       ///< GN transmit power [W]

  /// Throws DomainError unless 0 < mu < 1, 2 <= alpha_L < alpha_N and the
  /// powers are positive.
  void validate() const;
  double snr_scale() const { return pk / sigma2; }
};

/// Slot-major matrix helper: rows are GNs, columns are slots 1..N.
using Grid = Eigen::MatrixXd;

/// d^alpha evaluated as exp(alpha log d).
double distance_power(double d, double alpha);

double los_gain(double d, const ChannelParams& cp);
double nlos_gain(double d, const ChannelParams& cp);
double gain(double d, ChannelState state, const ChannelParams& cp);

/// c_bar * h_L(d) + (1 - c_bar) * h_N(d).
double lower_bound_gain(double d, double c_bar, const ChannelParams& cp);

struct QtAux {
  double lambda = 0.0;
  double kappa = 0.0;
};

/// Subtractive quadratic-transform surrogate of lower_bound_gain. Concave in
/// (q, c_bar) for fixed multipliers; equal to lower_bound_gain at the optimal
/// multipliers.
double qt_gain(const Vec3& q, const Vec3& w, double c_bar, double lambda, double kappa,
               const ChannelParams& cp);

/// Maximizers of qt_gain over (lambda, kappa) for fixed (q, c_bar).
QtAux qt_optimal_aux(const Vec3& q, const Vec3& w, double c_bar, const ChannelParams& cp);

/// Value, gradient and Hessian of qt_gain in the variables (x, y, z, c_bar).
/// Derivatives in c_bar are evaluated with c_bar clamped to
/// [kCbarClamp, 1 - kCbarClamp] so they stay finite at the box edges.
struct QtGainDerivatives {
  double value = 0.0;
  Eigen::Vector4d grad = Eigen::Vector4d::Zero();
  Eigen::Matrix4d hess = Eigen::Matrix4d::Zero();
};
inline constexpr double kCbarClamp = 1e-9;

QtGainDerivatives qt_gain_derivatives(const Vec3& q, const Vec3& w, double c_bar, double lambda,
                                      double kappa, const ChannelParams& cp);

/// s * log2(1 + pk h / sigma2).
double spectral_efficiency(double s, double h, const ChannelParams& cp);

struct RateSummary {
  std::vector<double> per_gn;  ///< time-averaged SE R_k [bps/Hz]
  double min_rate = 0.0;
};

/// Time-averaged spectral efficiency of every GN. `traj` holds q[0..N];
/// `schedule` and `los` are K x N grids over slots 1..N (`los` is 1 for LoS,
/// 0 for NLoS).
RateSummary average_rates(std::span<const Vec3> traj, std::span<const Vec3> gns,
                          const Grid& schedule, const Grid& los, const ChannelParams& cp);

}  // namespace uavplan
