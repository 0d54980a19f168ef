#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ccsoc/bounds.hpp"
#include "ccsoc/rng.hpp"
#include "ccsoc/sampling.hpp"
#include "ccsoc/scenario.hpp"

namespace ccsoc {

// ---------------------------------------------------------------------------
// Monte Carlo verification of chance-constraint satisfaction.
// ---------------------------------------------------------------------------

struct GroupResult {
  std::string name;
  double threshold = 0.0;  // the group's violation budget
  long satisfied = 0;
  long trials = 0;
  double ratio = 0.0;                 // joint-event satisfaction
  std::vector<double> marginal_ratio; // per member constraint
};

struct ValidationReport {
  long trials = 0;
  std::uint64_t seed = 0;
  std::vector<GroupResult> groups;
  double wall_seconds = 0.0;

  bool all_within_thresholds() const {
    for (const auto& g : groups)
      if (g.ratio < 1.0 - g.threshold) return false;
    return true;
  }
};

/// Draws one concatenated disturbance vector for one vehicle; called once per
/// (trial, vehicle) with a per-trial derived stream.
using TrialSampler = std::function<Eigen::VectorXd(int vehicle_index, Rng& rng)>;

inline TrialSampler generator_sampler(const GeneratorSpec& gen, int horizon) {
  return [gen, horizon](int, Rng& rng) { return draw_disturbance(gen, horizon, rng); };
}

inline ValidationReport validate_solution(const ScenarioSpec& spec,
                                          const std::vector<Eigen::VectorXd>& U,
                                          const TrialSampler& sampler, long trials,
                                          std::uint64_t seed) {
  spec.validate();
  if (trials < 1) throw DimensionError("need at least one trial");
  if (U.size() != spec.vehicles.size()) throw DimensionError("one control sequence per vehicle");
  const auto t0 = std::chrono::steady_clock::now();

  ConcatenatedDynamics dyn = concatenate(spec.system, spec.horizon);
  const int nv = static_cast<int>(spec.vehicles.size());
  const int N = spec.horizon;

  // deterministic parts of every trajectory
  std::vector<std::vector<Eigen::VectorXd>> det(nv);
  for (int v = 0; v < nv; ++v)
    for (int k = 1; k <= N; ++k)
      det[v].push_back(dyn.A_pow(k) * spec.vehicles[v].x0 + dyn.C(k) * U[v]);

  ValidationReport report;
  report.trials = trials;
  report.seed = seed;
  for (std::size_t gi = 0; gi < spec.targets.size(); ++gi) {
    GroupResult g;
    g.name = "target_group_" + std::to_string(gi);
    g.threshold = spec.targets[gi].alpha;
    g.marginal_ratio.assign(spec.targets[gi].halfspace_count(), 0.0);
    report.groups.push_back(std::move(g));
  }
  for (std::size_t oi = 0; oi < spec.obstacles.size(); ++oi) {
    GroupResult g;
    g.name = "obstacle_group_" + std::to_string(oi);
    g.threshold = spec.obstacles[oi].beta;
    g.marginal_ratio.assign(spec.obstacles[oi].term_count(), 0.0);
    report.groups.push_back(std::move(g));
  }
  for (std::size_t pi = 0; pi < spec.pairwise.size(); ++pi) {
    GroupResult g;
    g.name = "pairwise_group_" + std::to_string(pi);
    g.threshold = spec.pairwise[pi].gamma;
    g.marginal_ratio.assign(spec.pairwise[pi].term_count(), 0.0);
    report.groups.push_back(std::move(g));
  }

  std::vector<std::vector<Eigen::VectorXd>> x(nv, std::vector<Eigen::VectorXd>(N));
  for (long trial = 0; trial < trials; ++trial) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(trial)));
    for (int v = 0; v < nv; ++v) {
      const Eigen::VectorXd W = sampler(v, rng);
      if (W.size() != static_cast<long>(N) * spec.system.n())
        throw DimensionError("sampler returned wrong disturbance dimension");
      for (int k = 1; k <= N; ++k) x[v][k - 1] = det[v][k - 1] + dyn.D(k) * W;
    }

    std::size_t gidx = 0;
    for (const auto& group : spec.targets) {
      auto& res = report.groups[gidx++];
      bool joint = true;
      long member = 0;
      for (const auto& item : group.items) {
        const int v = spec.vehicle_index(item.vehicle);
        const Eigen::VectorXd gx = item.G * x[v][item.k - 1];
        for (long r = 0; r < gx.size(); ++r, ++member) {
          const bool ok = gx(r) <= item.h(r);
          joint = joint && ok;
          if (ok) res.marginal_ratio[member] += 1.0;
        }
      }
      if (joint) ++res.satisfied;
    }
    for (const auto& obs : spec.obstacles) {
      auto& res = report.groups[gidx++];
      bool joint = true;
      long member = 0;
      for (int id : obs.vehicles) {
        const int v = spec.vehicle_index(id);
        for (int k : obs.steps) {
          Eigen::VectorXd p = obs.S * x[v][k - 1];
          if (!obs.center.empty()) p -= obs.center[k - 1];
          const bool ok = p.norm() >= obs.radius;
          joint = joint && ok;
          if (ok) res.marginal_ratio[member] += 1.0;
          ++member;
        }
      }
      if (joint) ++res.satisfied;
    }
    for (const auto& pw : spec.pairwise) {
      auto& res = report.groups[gidx++];
      bool joint = true;
      long member = 0;
      for (const auto& pr : pw.pairs) {
        const int vi = spec.vehicle_index(pr.first);
        const int vj = spec.vehicle_index(pr.second);
        for (int k : pw.steps) {
          const bool ok = (pw.S * (x[vi][k - 1] - x[vj][k - 1])).norm() >= pw.radius;
          joint = joint && ok;
          if (ok) res.marginal_ratio[member] += 1.0;
          ++member;
        }
      }
      if (joint) ++res.satisfied;
    }
  }

  for (auto& g : report.groups) {
    g.trials = trials;
    g.ratio = static_cast<double>(g.satisfied) / static_cast<double>(trials);
    for (auto& m : g.marginal_ratio) m /= static_cast<double>(trials);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

// ---------------------------------------------------------------------------
// Statistical verification of the sample-statistics tail bound.
// ---------------------------------------------------------------------------

struct TailCell {
  double lambda = 0.0;
  double bound = 0.0;              // out-of-sample bound f(lambda)
  double empirical = 0.0;
  double stderr_out = 0.0;
  bool pass = false;
  double in_bound = 0.0;           // in-sample (member) bound 1/(1+lambda^2)
  double in_empirical = 0.0;
  double stderr_in = 0.0;
  bool in_pass = false;
};

struct TailTestReport {
  DisturbanceKind kind = DisturbanceKind::Gaussian;
  long n_samples = 0;
  long trials = 0;
  std::vector<TailCell> cells;
  bool all_pass = true;
};

namespace detail {

/// One scalar draw matching the synthetic generator's per-dimension marginals
/// (unit scale).
inline double scalar_draw(DisturbanceKind kind, Rng& rng) {
  switch (kind) {
    case DisturbanceKind::Gaussian: return rng.normal();
    case DisturbanceKind::Uniform: return rng.uniform(-1.0, 1.0);
    case DisturbanceKind::Skewed: return rng.exponential() - 1.0;
    case DisturbanceKind::Mixture:
      // symmetric bimodal: modes at +-1
      return (rng.uniform01() < 0.5 ? 1.0 : -1.0) + 0.5 * rng.normal();
  }
  return 0.0;
}

}  // namespace detail

/// Each trial draws a fresh N_s-sample set plus one independent out-of-sample
/// value; the out-of-sample exceedance frequency is compared against the
/// sample-statistics bound, the in-sample (first member) frequency against
/// the member bound.
inline TailTestReport tail_test(DisturbanceKind kind, long n_samples,
                                const std::vector<double>& lambdas, long trials,
                                std::uint64_t seed) {
  if (n_samples < 2) throw DimensionError("N_s must be >= 2");
  if (trials < 1) throw DimensionError("trials must be >= 1");
  if (lambdas.empty()) throw DimensionError("empty lambda grid");
  for (double lam : lambdas)
    if (!(lam > 0.0)) throw DimensionError("lambda grid must be positive");

  SampleBound bound(n_samples);
  TailTestReport report;
  report.kind = kind;
  report.n_samples = n_samples;
  report.trials = trials;
  std::vector<long> out_count(lambdas.size(), 0), in_count(lambdas.size(), 0);

  for (long trial = 0; trial < trials; ++trial) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(trial)));
    double sum = 0.0, sumsq = 0.0;
    double first = 0.0;
    for (long i = 0; i < n_samples; ++i) {
      const double v = detail::scalar_draw(kind, rng);
      if (i == 0) first = v;
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / static_cast<double>(n_samples);
    const double var = std::max(0.0, sumsq / static_cast<double>(n_samples) - mean * mean);
    const double sd = std::sqrt(var);
    const double x_out = detail::scalar_draw(kind, rng);
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
      if (x_out - mean >= lambdas[j] * sd) ++out_count[j];
      if (first - mean >= lambdas[j] * sd) ++in_count[j];
    }
  }

  for (std::size_t j = 0; j < lambdas.size(); ++j) {
    TailCell cell;
    cell.lambda = lambdas[j];
    cell.bound = f_lambda(bound, lambdas[j]);
    cell.empirical = static_cast<double>(out_count[j]) / static_cast<double>(trials);
    cell.stderr_out =
        std::sqrt(cell.bound * (1.0 - cell.bound) / static_cast<double>(trials));
    cell.pass = cell.empirical <= cell.bound + 3.0 * cell.stderr_out;
    cell.in_bound = 1.0 / (lambdas[j] * lambdas[j] + 1.0);
    cell.in_empirical = static_cast<double>(in_count[j]) / static_cast<double>(trials);
    cell.stderr_in =
        std::sqrt(cell.in_bound * (1.0 - cell.in_bound) / static_cast<double>(trials));
    cell.in_pass = cell.in_empirical <= cell.in_bound + 3.0 * cell.stderr_in;
    report.all_pass = report.all_pass && cell.pass && cell.in_pass;
    report.cells.push_back(cell);
  }
  return report;
}

}  // namespace ccsoc
