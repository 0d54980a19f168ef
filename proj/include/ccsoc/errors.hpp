#pragma once

#include <stdexcept>
#include <string>

namespace ccsoc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Input dimensions do not match the problem description.
struct DimensionError : Error {
  using Error::Error;
};

/// Malformed configuration or sample file.
struct ParseError : Error {
  using Error::Error;
};

/// The sample set violates the non-degeneracy assumption (all samples equal,
/// or a derived statistic has zero spread).
struct DegenerateSampleError : Error {
  using Error::Error;
};

/// A requested violation probability lies at or below the 1/(N_s+1) floor of
/// the sample tail bound. Carries the floor and a sample count that would
/// make the request feasible.
struct RiskTooSmallForSampleSize : Error {
  double min_omega;
  long suggested_samples;

  RiskTooSmallForSampleSize(double min_omega_, long suggested_samples_)
      : Error("risk level must exceed 1/(N_s+1) = " + std::to_string(min_omega_) +
              "; at least N_s = " + std::to_string(suggested_samples_) +
              " samples are required"),
        min_omega(min_omega_),
        suggested_samples(suggested_samples_) {}
};

/// A convex subproblem inside the convex-concave loop was reported
/// infeasible by the backend.
struct InfeasibleSubproblem : Error {
  int iteration;

  explicit InfeasibleSubproblem(int iteration_)
      : Error("convex subproblem infeasible at iteration " + std::to_string(iteration_)),
        iteration(iteration_) {}
};

/// The subproblem backend failed for a reason other than infeasibility.
struct BackendError : Error {
  using Error::Error;
};

}  // namespace ccsoc
