#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "ccsoc/reformulation.hpp"

namespace ccsoc {

struct CcpConfig {
  int max_iterations = 100;
  double objective_tol = 1e-6;
  double slack_tol = 1e-8;
  double penalty_initial = 10.0;
  double penalty_growth = 5.0;
  double penalty_cap = 1e6;

  void validate() const {
    if (max_iterations < 1) throw DimensionError("max_iterations must be >= 1");
    if (!(objective_tol > 0.0 && slack_tol > 0.0)) throw DimensionError("tolerances must be positive");
    if (!(penalty_initial > 0.0 && penalty_growth >= 1.0 && penalty_cap >= penalty_initial))
      throw DimensionError("bad penalty schedule");
  }
};

enum class CcpStatus { Converged, MaxIterations, InfeasibleSubproblem, BackendFailure };

inline const char* to_string(CcpStatus s) {
  switch (s) {
    case CcpStatus::Converged: return "converged";
    case CcpStatus::MaxIterations: return "max_iterations";
    case CcpStatus::InfeasibleSubproblem: return "infeasible_subproblem";
    case CcpStatus::BackendFailure: return "backend_failure";
  }
  return "unknown";
}

struct CcpIteration {
  double objective = 0.0;       // performance objective J(U)
  double slack_sum = 0.0;
  double penalty = 0.0;
  double step_norm = 0.0;       // ||U - U_prev|| over all vehicles
  SolveStatus subproblem_status = SolveStatus::NumericalError;
};

struct Solution {
  CcpStatus status = CcpStatus::BackendFailure;
  std::vector<Eigen::VectorXd> U;     // per vehicle
  double objective = 0.0;
  std::vector<double> lambda_values;  // per target term
  RiskAllocation alloc;
  std::vector<CcpIteration> ledger;
  double solve_seconds = 0.0;
  std::string method = "proposed";
};

namespace detail {

inline double performance_objective(const ScenarioSpec& spec,
                                    const std::vector<Eigen::VectorXd>& U) {
  double j = 0.0;
  for (const auto& u : U) j += u.squaredNorm();
  return spec.control_weight * j;
}

/// Shared convex-concave driver over precomputed problem data.
inline Solution run_ccp(const ScenarioSpec& spec, const ProblemData& data,
                        const CcpConfig& config, const SubproblemBackend& backend) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();

  Solution sol;
  sol.alloc = data.alloc;
  const int nv = static_cast<int>(spec.vehicles.size());
  std::vector<Eigen::VectorXd> U_prev(nv, Eigen::VectorXd::Zero(spec.control_dim()));
  double penalty = config.penalty_initial;
  double prev_objective = std::numeric_limits<double>::quiet_NaN();

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    ReformulatedProgram rp = build_subproblem(data, spec, U_prev, penalty);
    ConicSolution sub = backend.solve(rp.assemble());

    if (sub.status == SolveStatus::PrimalInfeasible) {
      throw InfeasibleSubproblem(iter);
    }
    if (sub.status != SolveStatus::Optimal) {
      sol.status = CcpStatus::BackendFailure;
      sol.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      throw BackendError("subproblem solver returned " + std::string(to_string(sub.status)) +
                         " at iteration " + std::to_string(iter));
    }

    std::vector<Eigen::VectorXd> U(nv);
    for (int v = 0; v < nv; ++v)
      U[v] = sub.x.segment(rp.layout.u_offset(v), rp.layout.nu);
    double slack_sum = 0.0;
    for (long c = 0; c < rp.layout.n_slack; ++c)
      slack_sum += std::max(0.0, sub.x(rp.layout.slack_offset(c)));

    CcpIteration rec;
    rec.objective = performance_objective(spec, U);
    rec.slack_sum = slack_sum;
    rec.penalty = penalty;
    rec.subproblem_status = sub.status;
    for (int v = 0; v < nv; ++v) rec.step_norm += (U[v] - U_prev[v]).squaredNorm();
    rec.step_norm = std::sqrt(rec.step_norm);
    sol.ledger.push_back(rec);

    sol.U = U;
    sol.objective = rec.objective;
    sol.lambda_values.clear();
    for (long t = 0; t < static_cast<long>(data.targets.size()); ++t)
      sol.lambda_values.push_back(rp.layout.pwl ? sub.x(rp.layout.lambda_offset(t))
                                                : data.targets[t].fixed_lambda);

    // no concave part: the first subproblem is the whole problem
    if (data.collisions.empty()) {
      sol.status = CcpStatus::Converged;
      break;
    }
    if (iter > 1 && std::abs(rec.objective - prev_objective) < config.objective_tol &&
        slack_sum < config.slack_tol) {
      sol.status = CcpStatus::Converged;
      break;
    }
    prev_objective = rec.objective;
    if (slack_sum > config.slack_tol)
      penalty = std::min(penalty * config.penalty_growth, config.penalty_cap);
    U_prev = U;
    if (iter == config.max_iterations) sol.status = CcpStatus::MaxIterations;
  }

  sol.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

/// Analytic-moment provider for a Gaussian (or any known-moment) disturbance.
/// The 2-norm moment identities are the standard Gaussian ones:
///   E||zbar+z||^2   = ||zbar+mu||^2 + tr(S)
///   Var(z'z)        = 4 mu'S mu + 2 tr(S^2)
///   Cov(z, z'z)     = 2 S mu
/// verified against a Monte Carlo oracle in the test suite.
struct GaussianMomentProvider final : MomentProvider {
  const ScenarioSpec& spec;
  const ConcatenatedDynamics& dyn;
  Eigen::VectorXd mean;  // concatenated disturbance mean (N*n)
  Eigen::MatrixXd cov;   // concatenated disturbance covariance

  GaussianMomentProvider(const ScenarioSpec& spec_, const ConcatenatedDynamics& dyn_,
                         Eigen::VectorXd mean_, Eigen::MatrixXd cov_)
      : spec(spec_), dyn(dyn_), mean(std::move(mean_)), cov(std::move(cov_)) {
    const long d = static_cast<long>(spec.horizon) * spec.system.n();
    if (mean.size() != d || cov.rows() != d || cov.cols() != d)
      throw DimensionError("disturbance moment dimensions mismatch");
  }

  HalfspaceMoments halfspace(int, const Eigen::RowVectorXd& g, int k,
                             const Eigen::VectorXd& x0) const override {
    HalfspaceMoments hm;
    hm.mean_u_coeff = g * dyn.C(k);
    hm.mean_const = g * (dyn.A_pow(k) * x0 + dyn.D(k) * mean);
    Eigen::RowVectorXd gd = g * dyn.D(k);
    hm.std_dev = std::sqrt(std::max(0.0, double(gd * cov * gd.transpose())));
    return hm;
  }

  QuadraticFormMoments quadratic(int, int vj, const Eigen::MatrixXd& S, int k) const override {
    Eigen::MatrixXd SD = S * dyn.D(k);
    // vehicles are i.i.d.: a pairwise difference doubles the covariance and
    // cancels the mean
    Eigen::VectorXd mu = vj >= 0 ? Eigen::VectorXd::Zero(S.rows()).eval()
                                 : (SD * mean).eval();
    Eigen::MatrixXd sig = SD * cov * SD.transpose();
    if (vj >= 0) sig *= 2.0;
    const double zz_mean = mu.squaredNorm() + sig.trace();
    const double zz_var = 4.0 * mu.dot(sig * mu) + 2.0 * (sig * sig).trace();
    const Eigen::VectorXd z_zz_cov = 2.0 * sig * mu;
    return QuadraticFormMoments::from_moments(mu, sig, zz_mean, zz_var, z_zz_cov);
  }

  double multiplier(double omega) const override { return cantelli_lambda(omega); }
  Eigen::VectorXd w_mean(int) const override { return mean; }
};

}  // namespace detail

/// The proposed method: sample-statistics reformulation + convex-concave loop.
inline Solution solve_ccp(const ScenarioSpec& spec,
                          const std::vector<DisturbanceSampleSet>& samples,
                          const CcpConfig& config, const SubproblemBackend& backend) {
  RiskAllocation alloc = allocate_uniform(spec, samples.empty() ? 2 : samples.front().count());
  ProblemData data = build_problem_data(spec, samples, alloc);
  Solution sol = detail::run_ccp(spec, data, config, backend);
  sol.method = "proposed";
  return sol;
}

/// Analytic baseline: identical pipeline with true moments and the Cantelli
/// multiplier. Requires a known disturbance mean and covariance.
inline Solution solve_cantelli_baseline(const ScenarioSpec& spec, const Eigen::VectorXd& w_mean,
                                        const Eigen::MatrixXd& w_cov, const CcpConfig& config,
                                        const SubproblemBackend& backend) {
  spec.validate();
  if (w_cov.norm() == 0.0) throw DegenerateSampleError("zero disturbance covariance");
  RiskAllocation alloc;
  alloc.mode = RiskMode::UniformFixed;  // multipliers are analytic; no PWL machinery
  for (const auto& g : spec.targets)
    alloc.target_omega.push_back(g.alpha / static_cast<double>(g.halfspace_count()));
  for (const auto& o : spec.obstacles)
    alloc.obstacle_omega.push_back(o.beta / static_cast<double>(o.term_count()));
  for (const auto& p : spec.pairwise)
    alloc.pairwise_omega.push_back(p.gamma / static_cast<double>(p.term_count()));

  ConcatenatedDynamics dyn = concatenate(spec.system, spec.horizon);
  detail::GaussianMomentProvider mp(spec, dyn, w_mean, w_cov);
  ProblemData data = detail::build_problem_data(spec, mp, alloc, dyn);
  Solution sol = detail::run_ccp(spec, data, config, backend);
  sol.method = "cantelli";
  return sol;
}

/// Scenario-approach baseline: enforce every target halfspace for every
/// disturbance sample; no probability machinery, target sets only.
inline Solution solve_scenario_baseline(const ScenarioSpec& spec,
                                        const std::vector<DisturbanceSampleSet>& samples,
                                        const SubproblemBackend& backend) {
  spec.validate();
  if (!spec.obstacles.empty() || !spec.pairwise.empty())
    throw DimensionError("scenario baseline supports target-set constraints only");
  if (samples.size() != spec.vehicles.size())
    throw DimensionError("one disturbance sample set per vehicle required");

  const auto t0 = std::chrono::steady_clock::now();
  ConcatenatedDynamics dyn = concatenate(spec.system, spec.horizon);
  const int nv = static_cast<int>(spec.vehicles.size());
  const long nu = spec.control_dim();
  const int m = spec.system.m();
  const long n = nv * nu;

  long rows = 2 * n;
  for (const auto& g : spec.targets)
    for (const auto& it : g.items) rows += it.G.rows() * samples.front().count();

  ConicProgram prog;
  prog.P = 2.0 * spec.control_weight * Eigen::MatrixXd::Identity(n, n);
  prog.q = Eigen::VectorXd::Zero(n);
  prog.G = Eigen::MatrixXd::Zero(rows, n);
  prog.h.resize(rows);
  long row = 0;
  for (int v = 0; v < nv; ++v)
    for (long i = 0; i < nu; ++i) {
      prog.G(row, v * nu + i) = 1.0;
      prog.h(row++) = spec.u_max(i % m);
      prog.G(row, v * nu + i) = -1.0;
      prog.h(row++) = -spec.u_min(i % m);
    }
  for (const auto& g : spec.targets)
    for (const auto& it : g.items) {
      const int v = spec.vehicle_index(it.vehicle);
      const auto& W = samples[v].samples;  // N_s x (N*n)
      const Eigen::MatrixXd GC = it.G * dyn.C(it.k);
      const Eigen::VectorXd base = it.G * (dyn.A_pow(it.k) * spec.vehicles[v].x0);
      const Eigen::MatrixXd GDW = W * (it.G * dyn.D(it.k)).transpose();  // N_s x rows(G)
      for (long s = 0; s < W.rows(); ++s)
        for (long r = 0; r < it.G.rows(); ++r) {
          prog.G.block(row, v * nu, 1, nu) = GC.row(r);
          prog.h(row++) = it.h(r) - base(r) - GDW(s, r);
        }
    }
  prog.cones.nonneg = rows;

  ConicSolution sub = backend.solve(prog);
  if (sub.status == SolveStatus::PrimalInfeasible) throw InfeasibleSubproblem(1);
  if (sub.status != SolveStatus::Optimal)
    throw BackendError("scenario subproblem returned " + std::string(to_string(sub.status)));

  Solution sol;
  sol.method = "scenario";
  sol.status = CcpStatus::Converged;
  for (int v = 0; v < nv; ++v) sol.U.push_back(sub.x.segment(v * nu, nu));
  sol.objective = detail::performance_objective(spec, sol.U);
  CcpIteration rec;
  rec.objective = sol.objective;
  rec.subproblem_status = sub.status;
  sol.ledger.push_back(rec);
  sol.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

// ---------------------------------------------------------------------------
// Independent feasibility re-check (does not trust the backend's report).
// ---------------------------------------------------------------------------

struct FeasibilityReport {
  double worst_target = -std::numeric_limits<double>::infinity();     // max violation
  double worst_collision = -std::numeric_limits<double>::infinity();  // max violation of DC form
  double worst_bound = -std::numeric_limits<double>::infinity();
  double worst_budget = -std::numeric_limits<double>::infinity();
  bool pass = false;
};

/// Evaluate the original reformulated constraints (target affine form, exact
/// difference-of-convex collision form, control bounds, risk budgets) at U.
inline FeasibilityReport verify_feasibility(const ScenarioSpec& spec, const ProblemData& data,
                                            const std::vector<Eigen::VectorXd>& U,
                                            const std::vector<double>& lambda_values,
                                            double tol = 1e-6) {
  FeasibilityReport rep;
  const int m = spec.system.m();
  for (std::size_t v = 0; v < U.size(); ++v)
    for (long i = 0; i < U[v].size(); ++i) {
      rep.worst_bound = std::max(rep.worst_bound, U[v](i) - spec.u_max(i % m));
      rep.worst_bound = std::max(rep.worst_bound, spec.u_min(i % m) - U[v](i));
    }

  for (std::size_t t = 0; t < data.targets.size(); ++t) {
    const auto& term = data.targets[t];
    const double lam = lambda_values.at(t);
    const double lhs = term.mean_u_coeff.dot(U[term.vehicle]) + term.mean_const +
                       lam * term.std_dev;
    rep.worst_target = std::max(rep.worst_target, lhs - term.rhs);
  }

  // risk budgets: in PWL mode the lambda values must carry the true bound sum
  if (data.alloc.mode == RiskMode::PwlTargetOptimized && data.n_samples >= 2) {
    SampleBound bound(data.n_samples);
    for (std::size_t gi = 0; gi < spec.targets.size(); ++gi) {
      double used = 0.0;
      for (std::size_t t = 0; t < data.targets.size(); ++t)
        if (data.targets[t].group == static_cast<int>(gi)) {
          rep.worst_budget =
              std::max(rep.worst_budget, data.theta_value - lambda_values.at(t));
          used += f_lambda(bound, std::max(lambda_values.at(t), 1e-12));
        }
      rep.worst_budget = std::max(rep.worst_budget, used - spec.targets[gi].alpha);
    }
  } else {
    rep.worst_budget = 0.0;
  }

  for (const auto& term : data.collisions) {
    Eigen::VectorXd dU = U[term.vehicle_i];
    if (term.vehicle_j >= 0) dU -= U[term.vehicle_j];
    const Eigen::VectorXd zbar = term.zbar0 + term.SC * dU;
    const double lhs = term.qm.mean_quadratic(zbar) - term.lambda * term.qm.std_quadratic(zbar);
    rep.worst_collision = std::max(rep.worst_collision, term.radius * term.radius - lhs);
  }
  if (data.collisions.empty()) rep.worst_collision = 0.0;
  if (data.targets.empty()) rep.worst_target = 0.0;

  rep.pass = rep.worst_target < tol && rep.worst_collision < tol && rep.worst_bound < tol &&
             rep.worst_budget < tol;
  return rep;
}

}  // namespace ccsoc
