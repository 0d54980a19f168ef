#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccsoc/sampling.hpp"
#include "ccsoc/scenario.hpp"
#include "ccsoc/solver.hpp"
#include "ccsoc/validation.hpp"

namespace ccsoc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config file: JSON with // comments allowed, extension .cfg by convention.
// ---------------------------------------------------------------------------

struct SampleSourceConfig {
  enum class Kind { Generator, Csv } kind = Kind::Generator;
  GeneratorSpec generator;
  long count = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> csv_paths;  // one per vehicle, in vehicle order
};

struct RunConfig {
  ScenarioSpec spec;
  SampleSourceConfig samples;
  CcpConfig ccp;
  long validation_trials = 10000;
  std::uint64_t validation_seed = 1;
  std::uint64_t config_hash = 0;
};

/// FNV-1a over the raw file bytes; recorded in every output so solutions and
/// validation runs can be matched to the exact config that produced them.
inline std::uint64_t fnv1a_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace detail {

inline Eigen::MatrixXd parse_matrix(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ParseError(what + " must be a nested array of rows");
  const long rows = static_cast<long>(j.size());
  const long cols = static_cast<long>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (long r = 0; r < rows; ++r) {
    if (static_cast<long>(j[r].size()) != cols)
      throw ParseError(what + " has ragged rows");
    for (long c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ParseError(what + " has a non-numeric entry");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

inline Eigen::VectorXd parse_vector(const json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + " must be an array");
  Eigen::VectorXd v(static_cast<long>(j.size()));
  for (long i = 0; i < v.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(what + " has a non-numeric entry");
    v(i) = j[i].get<double>();
  }
  return v;
}

inline std::vector<int> parse_steps(const json& j, const std::string& what) {
  std::vector<int> steps;
  for (const auto& e : j) steps.push_back(e.get<int>());
  if (steps.empty()) throw ParseError(what + " must not be empty");
  return steps;
}

constexpr double kDegToRad = M_PI / 180.0;

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what());
  }
  using detail::parse_matrix;
  using detail::parse_vector;

  RunConfig cfg;
  cfg.config_hash = fnv1a_hash(text);
  ScenarioSpec& spec = cfg.spec;

  try {
    const json& sys = root.at("system");
    double chief_incl = 0.0, chief_arg_lat = 0.0, orbital_rate = 0.0, chief_radius_m = 0.0;
    const bool cwh = sys.value("preset", "") == std::string("cwh");
    if (cwh) {
      const double radius_km = sys.at("radius_km").get<double>();
      const double mu = sys.at("mu_km3_s2").get<double>();
      spec.system = cwh_system(radius_km, mu, sys.at("dt_s").get<double>());
      orbital_rate = std::sqrt(mu / std::pow(radius_km, 3));
      chief_radius_m = radius_km * 1e3;
      if (root.contains("chief")) {
        chief_incl = root["chief"].value("incl_deg", 0.0) * detail::kDegToRad;
        chief_arg_lat = root["chief"].value("arg_latitude_deg", 0.0) * detail::kDegToRad;
      }
    } else {
      spec.system = LtiSystem(parse_matrix(sys.at("A"), "system.A"),
                              parse_matrix(sys.at("B"), "system.B"), sys.value("dt_s", 0.0));
    }

    spec.horizon = root.at("horizon").get<int>();

    for (const auto& vj : root.at("vehicles")) {
      VehicleState v;
      v.id = vj.at("id").get<int>();
      if (vj.contains("x0")) {
        v.x0 = parse_vector(vj["x0"], "vehicle x0");
      } else if (vj.contains("elements")) {
        if (!cwh) throw ParseError("orbital elements require the cwh system preset");
        const json& el = vj["elements"];
        v.x0 = cwh_state_from_elements(
            chief_radius_m, orbital_rate, el.at("delta_radius_m").get<double>(),
            el.value("delta_incl_deg", 0.0) * detail::kDegToRad,
            el.value("delta_raan_deg", 0.0) * detail::kDegToRad,
            el.value("delta_anomaly_deg", 0.0) * detail::kDegToRad, chief_incl, chief_arg_lat);
      } else {
        throw ParseError("vehicle needs x0 or elements");
      }
      spec.vehicles.push_back(std::move(v));
    }

    const json& cb = root.at("control_bounds");
    spec.u_min = parse_vector(cb.at("min"), "control_bounds.min");
    spec.u_max = parse_vector(cb.at("max"), "control_bounds.max");
    if (root.contains("objective"))
      spec.control_weight = root["objective"].value("control_weight", 1.0);

    for (const auto& gj : root.value("targets", json::array())) {
      TargetGroup group;
      group.alpha = gj.at("alpha").get<double>();
      for (const auto& ij : gj.at("items")) {
        TargetItem item;
        item.vehicle = ij.at("vehicle").get<int>();
        item.k = ij.at("k").get<int>();
        if (ij.contains("box")) {
          const Eigen::VectorXd center = parse_vector(ij["box"].at("center"), "box.center");
          const Eigen::VectorXd hw = parse_vector(ij["box"].at("half_width"), "box.half_width");
          if (center.size() != hw.size()) throw ParseError("box center/half_width mismatch");
          const long d = center.size();
          item.G = Eigen::MatrixXd::Zero(2 * d, d);
          item.h.resize(2 * d);
          for (long i = 0; i < d; ++i) {
            item.G(2 * i, i) = 1.0;
            item.h(2 * i) = center(i) + hw(i);
            item.G(2 * i + 1, i) = -1.0;
            item.h(2 * i + 1) = -(center(i) - hw(i));
          }
        } else {
          item.G = parse_matrix(ij.at("G"), "target G");
          item.h = parse_vector(ij.at("h"), "target h");
        }
        group.items.push_back(std::move(item));
      }
      spec.targets.push_back(std::move(group));
    }

    for (const auto& oj : root.value("obstacles", json::array())) {
      ObstacleAvoidance o;
      o.beta = oj.at("beta").get<double>();
      o.S = parse_matrix(oj.at("S"), "obstacle S");
      o.radius = oj.at("r").get<double>();
      for (const auto& v : oj.at("vehicles")) o.vehicles.push_back(v.get<int>());
      o.steps = detail::parse_steps(oj.at("steps"), "obstacle steps");
      for (const auto& c : oj.value("center", json::array()))
        o.center.push_back(parse_vector(c, "obstacle center"));
      spec.obstacles.push_back(std::move(o));
    }

    for (const auto& pj : root.value("pairwise", json::array())) {
      PairwiseAvoidance p;
      p.gamma = pj.at("gamma").get<double>();
      p.S = parse_matrix(pj.at("S"), "pairwise S");
      p.radius = pj.at("r").get<double>();
      for (const auto& pr : pj.at("pairs")) p.pairs.emplace_back(pr[0].get<int>(), pr[1].get<int>());
      p.steps = detail::parse_steps(pj.at("steps"), "pairwise steps");
      spec.pairwise.push_back(std::move(p));
    }

    if (root.contains("risk")) {
      const std::string mode = root["risk"].value("mode", "uniform");
      if (mode == "uniform") spec.risk_mode = RiskMode::UniformFixed;
      else if (mode == "pwl") spec.risk_mode = RiskMode::PwlTargetOptimized;
      else throw ParseError("risk.mode must be uniform or pwl");
      spec.pwl.knots = root["risk"].value("knots", 8);
      spec.pwl.lambda_max = root["risk"].value("lambda_max", 50.0);
    }

    const json& sj = root.at("samples");
    const std::string source = sj.value("source", "generator");
    if (source == "generator") {
      cfg.samples.kind = SampleSourceConfig::Kind::Generator;
      cfg.samples.count = sj.at("count").get<long>();
      cfg.samples.seed = sj.value("seed", 0ULL);
      const json& gj = sj.at("generator");
      const std::string kind = gj.at("kind").get<std::string>();
      if (kind == "gaussian") cfg.samples.generator.kind = DisturbanceKind::Gaussian;
      else if (kind == "mixture") cfg.samples.generator.kind = DisturbanceKind::Mixture;
      else if (kind == "skewed") cfg.samples.generator.kind = DisturbanceKind::Skewed;
      else if (kind == "uniform") cfg.samples.generator.kind = DisturbanceKind::Uniform;
      else throw ParseError("unknown generator kind: " + kind);
      cfg.samples.generator.scale = parse_vector(gj.at("scale"), "generator scale");
      cfg.samples.generator.mixture_weight = gj.value("mixture_weight", 0.5);
      if (gj.contains("mixture_offset"))
        cfg.samples.generator.mixture_offset =
            parse_vector(gj["mixture_offset"], "mixture offset");
    } else if (source == "csv") {
      cfg.samples.kind = SampleSourceConfig::Kind::Csv;
      for (const auto& p : sj.at("paths")) cfg.samples.csv_paths.push_back(p.get<std::string>());
      if (cfg.samples.csv_paths.size() != spec.vehicles.size())
        throw ParseError("need one sample csv per vehicle");
    } else {
      throw ParseError("samples.source must be generator or csv");
    }

    if (root.contains("ccp")) {
      const json& cj = root["ccp"];
      cfg.ccp.max_iterations = cj.value("max_iterations", 100);
      cfg.ccp.objective_tol = cj.value("objective_tol", 1e-6);
      cfg.ccp.slack_tol = cj.value("slack_tol", 1e-8);
      cfg.ccp.penalty_initial = cj.value("penalty_initial", 10.0);
      cfg.ccp.penalty_growth = cj.value("penalty_growth", 5.0);
      cfg.ccp.penalty_cap = cj.value("penalty_cap", 1e6);
    }
    if (root.contains("validation")) {
      cfg.validation_trials = root["validation"].value("trials", 10000L);
      cfg.validation_seed = root["validation"].value("seed", 1ULL);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("config schema error: ") + e.what());
  }

  spec.validate();
  cfg.ccp.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Materialize the per-vehicle disturbance sample sets from the configured
/// source (synthetic generator or CSV files).
inline std::vector<DisturbanceSampleSet> materialize_samples(const RunConfig& cfg) {
  std::vector<DisturbanceSampleSet> sets;
  const int n = cfg.spec.system.n();
  for (std::size_t v = 0; v < cfg.spec.vehicles.size(); ++v) {
    if (cfg.samples.kind == SampleSourceConfig::Kind::Generator) {
      if (cfg.samples.generator.scale.size() != n)
        throw DimensionError("generator scale must match the state dimension");
      sets.push_back(synth_disturbances(cfg.samples.generator, cfg.spec.horizon,
                                        cfg.samples.count, cfg.samples.seed,
                                        cfg.spec.vehicles[v].id));
    } else {
      sets.push_back(ingest_csv(cfg.samples.csv_paths[v], cfg.spec.horizon, n,
                                cfg.spec.vehicles[v].id));
    }
  }
  return sets;
}

/// Analytic disturbance moments for the known-moment baseline; only the
/// Gaussian generator admits them here.
inline void analytic_moments(const RunConfig& cfg, Eigen::VectorXd& w_mean,
                             Eigen::MatrixXd& w_cov) {
  if (cfg.samples.kind != SampleSourceConfig::Kind::Generator ||
      cfg.samples.generator.kind != DisturbanceKind::Gaussian)
    throw ParseError("analytic baseline requires a gaussian generator disturbance");
  const long d = static_cast<long>(cfg.spec.horizon) * cfg.spec.system.n();
  const long n = cfg.spec.system.n();
  w_mean = Eigen::VectorXd::Zero(d);
  w_cov = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k < cfg.spec.horizon; ++k)
    for (long i = 0; i < n; ++i) {
      const double s = cfg.samples.generator.scale(i);
      w_cov(k * n + i, k * n + i) = s * s;
    }
}

// ---------------------------------------------------------------------------
// Output serialization
// ---------------------------------------------------------------------------

inline json solution_to_json(const Solution& sol, std::uint64_t config_hash) {
  json j;
  j["method"] = sol.method;
  j["status"] = to_string(sol.status);
  j["objective"] = sol.objective;
  j["config_hash"] = config_hash;
  j["solve_seconds"] = sol.solve_seconds;
  j["controls"] = json::array();
  for (const auto& u : sol.U) {
    json uj = json::array();
    for (long i = 0; i < u.size(); ++i) uj.push_back(u(i));
    j["controls"].push_back(uj);
  }
  j["lambda"] = sol.lambda_values;
  j["risk_allocation"] = {{"target_omega", sol.alloc.target_omega},
                          {"obstacle_omega", sol.alloc.obstacle_omega},
                          {"pairwise_omega", sol.alloc.pairwise_omega}};
  j["ledger"] = json::array();
  for (const auto& it : sol.ledger)
    j["ledger"].push_back({{"objective", it.objective},
                           {"slack_sum", it.slack_sum},
                           {"penalty", it.penalty},
                           {"step_norm", it.step_norm},
                           {"subproblem_status", to_string(it.subproblem_status)}});
  return j;
}

inline Solution solution_from_json(const json& j, std::uint64_t* config_hash = nullptr) {
  Solution sol;
  sol.method = j.at("method").get<std::string>();
  sol.objective = j.at("objective").get<double>();
  const std::string st = j.at("status").get<std::string>();
  if (st == "converged") sol.status = CcpStatus::Converged;
  else if (st == "max_iterations") sol.status = CcpStatus::MaxIterations;
  else if (st == "infeasible_subproblem") sol.status = CcpStatus::InfeasibleSubproblem;
  else sol.status = CcpStatus::BackendFailure;
  for (const auto& uj : j.at("controls")) {
    Eigen::VectorXd u(static_cast<long>(uj.size()));
    for (long i = 0; i < u.size(); ++i) u(i) = uj[i].get<double>();
    sol.U.push_back(std::move(u));
  }
  if (j.contains("lambda")) sol.lambda_values = j["lambda"].get<std::vector<double>>();
  if (config_hash) *config_hash = j.at("config_hash").get<std::uint64_t>();
  return sol;
}

inline json validation_to_json(const ValidationReport& report, std::uint64_t config_hash) {
  json j;
  j["trials"] = report.trials;
  j["seed"] = report.seed;
  j["config_hash"] = config_hash;
  j["wall_seconds"] = report.wall_seconds;
  j["groups"] = json::array();
  for (const auto& g : report.groups)
    j["groups"].push_back({{"name", g.name},
                           {"threshold", g.threshold},
                           {"satisfied", g.satisfied},
                           {"ratio", g.ratio},
                           {"marginal_ratio", g.marginal_ratio}});
  return j;
}

/// Mean trajectory per vehicle per step; stable header for external plotting.
inline void write_trajectory_csv(const ScenarioSpec& spec, const std::vector<Eigen::VectorXd>& U,
                                 const Eigen::VectorXd& w_mean, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write trajectory file: " + path);
  ConcatenatedDynamics dyn = concatenate(spec.system, spec.horizon);
  out << "vehicle,k";
  for (int i = 1; i <= spec.system.n(); ++i) out << ",x" << i;
  out << '\n';
  out.precision(17);
  for (std::size_t v = 0; v < spec.vehicles.size(); ++v) {
    auto traj = mean_trajectory(dyn, spec.vehicles[v].x0, U[v], w_mean);
    for (int k = 1; k <= spec.horizon; ++k) {
      out << spec.vehicles[v].id << ',' << k;
      for (long i = 0; i < traj[k - 1].size(); ++i) out << ',' << traj[k - 1](i);
      out << '\n';
    }
  }
}

inline void write_validation_csv(const ValidationReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write validation table: " + path);
  out << "group,threshold,satisfied,trials,ratio\n";
  for (const auto& g : report.groups)
    out << g.name << ',' << g.threshold << ',' << g.satisfied << ',' << g.trials << ','
        << g.ratio << '\n';
}

}  // namespace ccsoc
