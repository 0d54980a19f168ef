#pragma once

#include <cmath>
#include <limits>

#include "ccsoc/errors.hpp"

namespace ccsoc {

/// Sample count wrapper for the tail-bound algebra. n_star() = N_s + 1
/// appears throughout the bound formulas.
struct SampleBound {
  long n_samples;

  explicit SampleBound(long n_samples_) : n_samples(n_samples_) {
    if (n_samples < 2) throw DimensionError("tail bound requires N_s >= 2");
  }

  double n() const { return static_cast<double>(n_samples); }
  double n_star() const { return static_cast<double>(n_samples) + 1.0; }
};

/// Tail bound on deviations above the sample mean, in units of the sample
/// standard deviation:
///   P(x - mean >= lambda * std) <= f(lambda)
/// f is strictly decreasing on (0, inf) with range (1/(N_s+1), 1).
inline double f_lambda(const SampleBound& bound, double lambda) {
  if (!(lambda > 0.0)) throw DimensionError("f(lambda) requires lambda > 0");
  const double a = std::sqrt(bound.n_star()) + lambda;
  return a * a / (lambda * lambda * bound.n() + a * a);
}

/// Exact inverse of f_lambda. Defined for omega in (1/(N_s+1), 1); below the
/// floor no multiplier can certify the risk level with N_s samples.
inline double lambda_of_omega(const SampleBound& bound, double omega) {
  if (!(omega < 1.0)) throw DimensionError("omega must lie in (0, 1)");
  const double floor = 1.0 / bound.n_star();
  const double denom = std::sqrt(bound.n() * omega) - std::sqrt(1.0 - omega);
  if (omega <= floor || denom <= 0.0) {
    // smallest N_s making omega attainable: N_s + 1 > 1/omega
    const long suggested = static_cast<long>(std::ceil(1.0 / omega));
    throw RiskTooSmallForSampleSize(floor, suggested < 2 ? 2 : suggested);
  }
  return std::sqrt(bound.n_star() * (1.0 - omega)) / denom;
}

namespace detail {
/// Cubic whose positive root is the inflection point of f.
inline double theta_cubic(const SampleBound& bound, double lambda) {
  return 2.0 / std::sqrt(bound.n_star()) * lambda * lambda * lambda +
         3.0 * lambda * lambda - 1.0;
}
}  // namespace detail

/// Convexity threshold: f is convex on [theta, inf). Closed-form root of the
/// inflection cubic, with a bisection fallback since arccos near -1 loses
/// precision for small N_s. Always below 3^(-1/2).
inline double theta(const SampleBound& bound) {
  const double ns = bound.n();
  const double nst = bound.n_star();
  double root = std::sqrt(nst) *
                (std::cos(std::acos(-(ns - 1.0) / nst) / 3.0) - 0.5);
  if (std::abs(detail::theta_cubic(bound, root)) > 1e-10) {
    double lo = 0.0, hi = 1.0 / std::sqrt(3.0);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (detail::theta_cubic(bound, mid) < 0.0 ? lo : hi) = mid;
    }
    root = 0.5 * (lo + hi);
  }
  return root;
}

/// Necessary (not sufficient) sample count for a target-set group with the
/// given number of half-spaces and violation budget alpha. Clamped to the
/// N_s >= 2 floor of the tail bound.
inline long min_samples_target(long total_halfspaces, double alpha) {
  if (total_halfspaces < 1) throw DimensionError("need at least one half-space");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DimensionError("alpha must lie in (0,1)");
  const double bound = static_cast<double>(total_halfspaces) / alpha - 1.0;
  long n = static_cast<long>(std::ceil(bound - 1e-12));
  return n < 2 ? 2 : n;
}

/// One-sided Chebyshev multiplier: 1/(lambda^2 + 1) = omega.
inline double cantelli_lambda(double omega) {
  if (!(omega > 0.0 && omega < 1.0)) throw DimensionError("omega must lie in (0,1)");
  return std::sqrt((1.0 - omega) / omega);
}

/// Scenario-approach sample requirement N_s >= (2/alpha)(ln(1/beta) + N_o).
inline long scenario_sample_count(double alpha, double beta_confidence, long n_opt_vars) {
  if (!(alpha > 0.0 && alpha < 1.0) || !(beta_confidence > 0.0 && beta_confidence < 1.0))
    throw DimensionError("alpha and beta must lie in (0,1)");
  if (n_opt_vars < 1) throw DimensionError("need at least one optimization variable");
  const double bound =
      2.0 / alpha * (std::log(1.0 / beta_confidence) + static_cast<double>(n_opt_vars));
  return static_cast<long>(std::ceil(bound - 1e-12));
}

}  // namespace ccsoc
