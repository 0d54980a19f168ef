#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "ccsoc/errors.hpp"

namespace ccsoc {

/// Discrete-time LTI system x(k+1) = A x(k) + B u(k) + w(k).
struct LtiSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  double dt = 0.0;  // sampling interval in seconds; metadata only

  LtiSystem() = default;
  LtiSystem(Eigen::MatrixXd A_, Eigen::MatrixXd B_, double dt_ = 0.0)
      : A(std::move(A_)), B(std::move(B_)), dt(dt_) {
    if (A.rows() != A.cols()) throw DimensionError("state matrix must be square");
    if (B.rows() != A.rows()) throw DimensionError("input matrix row count must match state dimension");
    if (A.rows() < 1 || B.cols() < 1) throw DimensionError("state and input dimensions must be >= 1");
  }

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
};

/// Horizon concatenation of an LTI system:
///   x(k) = A^k x(0) + C(k) U + D(k) W
/// with U the stacked control sequence (N*m) and W the stacked disturbance
/// sequence (N*n). C(k) and D(k) have their trailing (N-k) blocks zero.
struct ConcatenatedDynamics {
  int horizon = 0;
  int n = 0;
  int m = 0;
  std::vector<Eigen::MatrixXd> state_power;  // A^k for k = 0..N
  std::vector<Eigen::MatrixXd> control_block;      // C(k), k = 1..N at index k-1
  std::vector<Eigen::MatrixXd> disturbance_block;  // D(k), k = 1..N at index k-1

  const Eigen::MatrixXd& A_pow(int k) const { return state_power.at(k); }
  const Eigen::MatrixXd& C(int k) const { return control_block.at(k - 1); }
  const Eigen::MatrixXd& D(int k) const { return disturbance_block.at(k - 1); }
};

/// Initial condition of one vehicle.
struct VehicleState {
  Eigen::VectorXd x0;
  int id = 0;
};

inline ConcatenatedDynamics concatenate(const LtiSystem& system, int horizon) {
  if (horizon < 1) throw DimensionError("horizon must be >= 1");
  const int n = system.n();
  const int m = system.m();

  ConcatenatedDynamics dyn;
  dyn.horizon = horizon;
  dyn.n = n;
  dyn.m = m;

  dyn.state_power.reserve(horizon + 1);
  dyn.state_power.push_back(Eigen::MatrixXd::Identity(n, n));
  for (int k = 1; k <= horizon; ++k)
    dyn.state_power.push_back(system.A * dyn.state_power.back());

  for (int k = 1; k <= horizon; ++k) {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, horizon * m);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, horizon * n);
    for (int j = 0; j < k; ++j) {
      // block for input/disturbance applied at step j, weighted by A^(k-1-j)
      C.block(0, j * m, n, m) = dyn.state_power[k - 1 - j] * system.B;
      D.block(0, j * n, n, n) = dyn.state_power[k - 1 - j];
    }
    dyn.control_block.push_back(std::move(C));
    dyn.disturbance_block.push_back(std::move(D));
  }
  return dyn;
}

/// Discrete Clohessy-Wiltshire-Hill system for a deputy about a circular
/// chief orbit. State [x y z xdot ydot zdot] with x radial, y along-track,
/// z cross-track; A is the exact closed-form state transition matrix over dt
/// and B applies an impulsive velocity change at the start of each interval
/// (unit spacecraft mass, so inputs carry velocity-change units).
inline LtiSystem cwh_system(double orbital_radius_km, double grav_parameter_km3_s2, double dt_s) {
  if (!(orbital_radius_km > 0.0 && grav_parameter_km3_s2 > 0.0 && dt_s > 0.0))
    throw DimensionError("cwh_system requires positive radius, mu, and dt");

  const double w = std::sqrt(grav_parameter_km3_s2 / std::pow(orbital_radius_km, 3));
  const double s = std::sin(w * dt_s);
  const double c = std::cos(w * dt_s);
  const double t = dt_s;

  Eigen::MatrixXd phi(6, 6);
  // clang-format off
  phi << 4.0 - 3.0 * c,        0.0, 0.0,  s / w,               2.0 * (1.0 - c) / w,       0.0,
         6.0 * (s - w * t),    1.0, 0.0,  2.0 * (c - 1.0) / w, (4.0 * s - 3.0 * w * t) / w, 0.0,
         0.0,                  0.0, c,    0.0,                 0.0,                       s / w,
         3.0 * w * s,          0.0, 0.0,  c,                   2.0 * s,                   0.0,
         6.0 * w * (c - 1.0),  0.0, 0.0, -2.0 * s,             4.0 * c - 3.0,             0.0,
         0.0,                  0.0, -w * s, 0.0,               0.0,                       c;
  // clang-format on

  Eigen::MatrixXd impulse(6, 3);
  impulse << Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Identity(3, 3);
  return LtiSystem(phi, phi * impulse, dt_s);
}

/// First-order map from relative orbital elements (circular orbits only) to
/// the CWH local frame. delta_radius in meters; angle deltas in radians;
/// chief_arg_latitude is the chief's argument of latitude at the epoch.
inline Eigen::VectorXd cwh_state_from_elements(double chief_radius_m, double orbital_rate,
                                               double delta_radius_m, double delta_incl,
                                               double delta_raan, double delta_anomaly,
                                               double chief_incl, double chief_arg_latitude) {
  const double u = chief_arg_latitude;
  Eigen::VectorXd x(6);
  x(0) = delta_radius_m;
  x(1) = chief_radius_m * (delta_anomaly + delta_raan * std::cos(chief_incl));
  x(2) = chief_radius_m *
         (delta_incl * std::sin(u) - delta_raan * std::sin(chief_incl) * std::cos(u));
  x(3) = 0.0;
  x(4) = -1.5 * orbital_rate * delta_radius_m;
  x(5) = chief_radius_m * orbital_rate *
         (delta_incl * std::cos(u) + delta_raan * std::sin(chief_incl) * std::sin(u));
  return x;
}

/// Trajectory of the concatenated dynamics evaluated at a fixed disturbance
/// vector (typically the sample mean). Returns x(k) for k = 1..N.
inline std::vector<Eigen::VectorXd> mean_trajectory(const ConcatenatedDynamics& dyn,
                                                    const Eigen::VectorXd& x0,
                                                    const Eigen::VectorXd& U,
                                                    const Eigen::VectorXd& w_mean) {
  if (x0.size() != dyn.n) throw DimensionError("x0 dimension mismatch");
  if (U.size() != static_cast<long>(dyn.horizon) * dyn.m) throw DimensionError("U dimension mismatch");
  if (w_mean.size() != static_cast<long>(dyn.horizon) * dyn.n) throw DimensionError("w_mean dimension mismatch");

  std::vector<Eigen::VectorXd> traj;
  traj.reserve(dyn.horizon);
  for (int k = 1; k <= dyn.horizon; ++k)
    traj.push_back(dyn.A_pow(k) * x0 + dyn.C(k) * U + dyn.D(k) * w_mean);
  return traj;
}

}  // namespace ccsoc
