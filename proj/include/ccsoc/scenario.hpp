#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "ccsoc/dynamics.hpp"
#include "ccsoc/errors.hpp"

namespace ccsoc {

/// How the risk budget of each target-set group is realized:
/// - UniformFixed: the group threshold is split evenly; each halfspace gets a
///   fixed multiplier computed once from the inverse tail bound.
/// - PwlTargetOptimized: the multipliers are decision variables, coupled by a
///   piecewise-linear over-estimate of the tail-bound budget.
enum class RiskMode { UniformFixed, PwlTargetOptimized };

/// One polytopic requirement G x(k) <= h on one vehicle at one time step.
struct TargetItem {
  int vehicle = 0;  // vehicle id
  int k = 0;        // time step in 1..N
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
};

/// A joint chance constraint over the intersection of target items, with a
/// shared violation budget alpha.
struct TargetGroup {
  double alpha = 0.0;
  std::vector<TargetItem> items;

  long halfspace_count() const {
    long n = 0;
    for (const auto& it : items) n += it.G.rows();
    return n;
  }
};

/// Joint keep-out constraint ||S (x_i(k) - center(k))|| >= r over the listed
/// vehicles and steps, budget beta. An empty center list means the origin.
struct ObstacleAvoidance {
  double beta = 0.0;
  Eigen::MatrixXd S;
  double radius = 0.0;
  std::vector<int> vehicles;               // vehicle ids
  std::vector<int> steps;                  // time steps in 1..N
  std::vector<Eigen::VectorXd> center;     // o(k) for k = 1..N, in S-space; optional

  long term_count() const {
    return static_cast<long>(vehicles.size()) * static_cast<long>(steps.size());
  }
};

/// Joint inter-vehicle constraint ||S (x_i(k) - x_j(k))|| >= r, budget gamma.
struct PairwiseAvoidance {
  double gamma = 0.0;
  Eigen::MatrixXd S;
  double radius = 0.0;
  std::vector<std::pair<int, int>> pairs;  // vehicle id pairs
  std::vector<int> steps;

  long term_count() const {
    return static_cast<long>(pairs.size()) * static_cast<long>(steps.size());
  }
};

struct PwlSettings {
  int knots = 8;
  double lambda_max = 50.0;
};

/// Full problem description, independent of where the disturbance samples
/// come from.
struct ScenarioSpec {
  LtiSystem system;
  int horizon = 0;
  std::vector<VehicleState> vehicles;
  Eigen::VectorXd u_min, u_max;        // per input dimension
  double control_weight = 1.0;         // J = weight * sum_i U_i' U_i
  std::vector<TargetGroup> targets;
  std::vector<ObstacleAvoidance> obstacles;
  std::vector<PairwiseAvoidance> pairwise;
  RiskMode risk_mode = RiskMode::UniformFixed;
  PwlSettings pwl;

  int vehicle_index(int id) const {
    for (std::size_t i = 0; i < vehicles.size(); ++i)
      if (vehicles[i].id == id) return static_cast<int>(i);
    throw DimensionError("unknown vehicle id " + std::to_string(id));
  }

  void validate() const {
    if (horizon < 1) throw DimensionError("horizon must be >= 1");
    if (vehicles.empty()) throw DimensionError("at least one vehicle required");
    const int n = system.n();
    const int m = system.m();
    for (const auto& v : vehicles)
      if (v.x0.size() != n) throw DimensionError("vehicle initial state dimension mismatch");
    for (std::size_t i = 0; i < vehicles.size(); ++i)
      for (std::size_t j = i + 1; j < vehicles.size(); ++j)
        if (vehicles[i].id == vehicles[j].id) throw DimensionError("duplicate vehicle id");
    if (u_min.size() != m || u_max.size() != m)
      throw DimensionError("control bounds must match the input dimension");
    if ((u_max - u_min).minCoeff() <= 0.0)
      throw DimensionError("control bounds must have positive width");
    if (!(control_weight > 0.0)) throw DimensionError("control weight must be positive");

    for (const auto& g : targets) {
      if (!(g.alpha > 0.0 && g.alpha < 1.0)) throw DimensionError("alpha must lie in (0,1)");
      if (g.items.empty()) throw DimensionError("empty target group");
      for (const auto& it : g.items) {
        vehicle_index(it.vehicle);
        if (it.k < 1 || it.k > horizon) throw DimensionError("target time step outside horizon");
        if (it.G.rows() < 1 || it.G.cols() != n || it.G.rows() != it.h.size())
          throw DimensionError("target halfspace dimensions inconsistent");
      }
    }
    for (const auto& o : obstacles) {
      if (!(o.beta > 0.0 && o.beta < 1.0)) throw DimensionError("beta must lie in (0,1)");
      if (!(o.radius > 0.0)) throw DimensionError("obstacle radius must be positive");
      if (o.S.cols() != n || o.S.norm() == 0.0) throw DimensionError("bad extraction matrix");
      if (o.vehicles.empty() || o.steps.empty()) throw DimensionError("empty obstacle group");
      for (int id : o.vehicles) vehicle_index(id);
      for (int k : o.steps)
        if (k < 1 || k > horizon) throw DimensionError("obstacle step outside horizon");
      if (!o.center.empty() && static_cast<int>(o.center.size()) != horizon)
        throw DimensionError("obstacle center trajectory must have one point per step");
      for (const auto& c : o.center)
        if (c.size() != o.S.rows()) throw DimensionError("obstacle center dimension mismatch");
    }
    for (const auto& p : pairwise) {
      if (!(p.gamma > 0.0 && p.gamma < 1.0)) throw DimensionError("gamma must lie in (0,1)");
      if (!(p.radius > 0.0)) throw DimensionError("pairwise radius must be positive");
      if (p.S.cols() != n || p.S.norm() == 0.0) throw DimensionError("bad extraction matrix");
      if (p.pairs.empty() || p.steps.empty()) throw DimensionError("empty pairwise group");
      for (const auto& pr : p.pairs) {
        if (pr.first == pr.second) throw DimensionError("pairwise constraint on a single vehicle");
        vehicle_index(pr.first);
        vehicle_index(pr.second);
      }
      for (int k : p.steps)
        if (k < 1 || k > horizon) throw DimensionError("pairwise step outside horizon");
    }
    if (risk_mode == RiskMode::PwlTargetOptimized) {
      if (pwl.knots < 2) throw DimensionError("piecewise-linear risk mode needs >= 2 knots");
      if (!(pwl.lambda_max > 0.0)) throw DimensionError("lambda_max must be positive");
    }
  }

  long control_dim() const { return static_cast<long>(horizon) * system.m(); }
};

}  // namespace ccsoc
