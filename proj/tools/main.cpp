// Command-line front end: solve / validate / bound-check / gen-samples.
//
// Exit codes: 0 success, 2 config or input error, 3 infeasible problem,
// 4 risk level unattainable with the sample count, 5 backend failure,
// 6 empirical validation below threshold.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ccsoc/config.hpp"
#include "ccsoc/solver.hpp"
#include "ccsoc/validation.hpp"

using namespace ccsoc;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kInfeasible = 3;
constexpr int kRiskTooSmall = 4;
constexpr int kBackendFailure = 5;
constexpr int kValidationFailure = 6;

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const RiskTooSmallForSampleSize& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRiskTooSmall;
  } catch (const InfeasibleSubproblem& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const BackendError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBackendFailure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write output file: " + path);
  out << j.dump(2) << '\n';
}

std::string strip_extension(const std::string& path) {
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
  return path.substr(0, dot);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chance-constrained stochastic optimal control"};
  app.require_subcommand(1);

  // ---- solve ----
  auto* solve = app.add_subcommand("solve", "solve a scenario and write the solution");
  std::string config_path, out_path = "solution.json", method = "proposed", risk_mode;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  solve->add_option("--config", config_path, "scenario config file")->required();
  solve->add_option("--out", out_path, "solution JSON output path");
  solve->add_option("--method", method, "proposed | scenario | cantelli")
      ->check(CLI::IsMember({"proposed", "scenario", "cantelli"}));
  solve->add_option("--risk-mode", risk_mode, "override config risk mode: uniform | pwl")
      ->check(CLI::IsMember({"uniform", "pwl"}));
  solve->add_option("--seed", seed_override, "override the sample generator seed")
      ->each([&](const std::string&) { seed_set = true; });

  // ---- validate ----
  auto* validate = app.add_subcommand("validate", "Monte Carlo check of a solution");
  std::string solution_path, val_out = "validation.json";
  long trials = 0;
  std::uint64_t val_seed = 0;
  bool val_seed_set = false, trials_set = false;
  validate->add_option("--config", config_path, "scenario config file")->required();
  validate->add_option("--solution", solution_path, "solution JSON from solve")->required();
  validate->add_option("--out", val_out, "report JSON output path");
  validate->add_option("--trials", trials, "number of Monte Carlo trials")
      ->each([&](const std::string&) { trials_set = true; });
  validate->add_option("--seed", val_seed, "Monte Carlo master seed")
      ->each([&](const std::string&) { val_seed_set = true; });

  // ---- bound-check ----
  auto* bound_check = app.add_subcommand("bound-check", "tabulate or empirically test the tail bound");
  std::vector<long> ns_list{10, 100, 1000};
  double lam_min = 0.1, lam_max = 20.0;
  int lam_points = 100;
  std::string bc_out;
  bool empirical = false;
  long bc_trials = 100000;
  std::uint64_t bc_seed = 20240601;
  bound_check->add_option("--ns", ns_list, "sample counts");
  bound_check->add_option("--lambda-min", lam_min, "grid start");
  bound_check->add_option("--lambda-max", lam_max, "grid end");
  bound_check->add_option("--points", lam_points, "grid size");
  bound_check->add_option("--out", bc_out, "CSV output (default stdout)");
  bound_check->add_flag("--empirical", empirical, "run the Monte Carlo tail test suite");
  bound_check->add_option("--trials", bc_trials, "trials per tail-test cell");
  bound_check->add_option("--seed", bc_seed, "tail-test master seed");

  // ---- gen-samples ----
  auto* gen = app.add_subcommand("gen-samples", "write synthetic disturbance sample CSVs");
  std::string gen_prefix = "samples";
  long gen_count = 0;
  std::uint64_t gen_seed = 0;
  bool gen_seed_set = false, gen_count_set = false;
  gen->add_option("--config", config_path, "scenario config file")->required();
  gen->add_option("--out-prefix", gen_prefix, "output prefix; files are <prefix>_v<id>.csv");
  gen->add_option("--count", gen_count, "override sample count")
      ->each([&](const std::string&) { gen_count_set = true; });
  gen->add_option("--seed", gen_seed, "override generator seed")
      ->each([&](const std::string&) { gen_seed_set = true; });

  CLI11_PARSE(app, argc, argv);

  if (solve->parsed()) {
    return run_guarded([&]() {
      RunConfig cfg = load_config(config_path);
      if (risk_mode == "uniform") cfg.spec.risk_mode = RiskMode::UniformFixed;
      if (risk_mode == "pwl") cfg.spec.risk_mode = RiskMode::PwlTargetOptimized;
      if (seed_set) cfg.samples.seed = seed_override;

      InteriorPointBackend backend;
      Solution sol;
      Eigen::VectorXd w_mean;
      if (method == "cantelli") {
        Eigen::MatrixXd w_cov;
        analytic_moments(cfg, w_mean, w_cov);
        sol = solve_cantelli_baseline(cfg.spec, w_mean, w_cov, cfg.ccp, backend);
      } else {
        auto samples = materialize_samples(cfg);
        w_mean = MomentCache::from(samples.front()).w_mean;
        if (method == "scenario") {
          sol = solve_scenario_baseline(cfg.spec, samples, backend);
        } else {
          sol = solve_ccp(cfg.spec, samples, cfg.ccp, backend);
        }
      }

      write_json(solution_to_json(sol, cfg.config_hash), out_path);
      write_trajectory_csv(cfg.spec, sol.U, w_mean, strip_extension(out_path) + "_trajectory.csv");
      std::cout << "status: " << to_string(sol.status) << "  objective: " << sol.objective
                << "  iterations: " << sol.ledger.size() << "\n";
      if (sol.status == CcpStatus::MaxIterations) return kInfeasible;
      return kOk;
    });
  }

  if (validate->parsed()) {
    return run_guarded([&]() {
      RunConfig cfg = load_config(config_path);
      std::ifstream in(solution_path);
      if (!in) throw ParseError("cannot open solution file: " + solution_path);
      json sj = json::parse(in, nullptr, true, true);
      std::uint64_t sol_hash = 0;
      Solution sol = solution_from_json(sj, &sol_hash);
      if (sol_hash != cfg.config_hash)
        throw ParseError("solution was produced from a different config (hash mismatch)");

      if (cfg.samples.kind != SampleSourceConfig::Kind::Generator)
        throw ParseError("validation needs a generator sample source for fresh draws");
      const long M = trials_set ? trials : cfg.validation_trials;
      const std::uint64_t seed = val_seed_set ? val_seed : cfg.validation_seed;
      auto report = validate_solution(cfg.spec, sol.U,
                                      generator_sampler(cfg.samples.generator, cfg.spec.horizon),
                                      M, seed);
      write_json(validation_to_json(report, cfg.config_hash), val_out);
      write_validation_csv(report, strip_extension(val_out) + "_table.csv");
      for (const auto& g : report.groups)
        std::cout << g.name << ": " << g.ratio << " (threshold " << 1.0 - g.threshold << ")\n";
      return report.all_within_thresholds() ? kOk : kValidationFailure;
    });
  }

  if (bound_check->parsed()) {
    return run_guarded([&]() {
      std::ostringstream table;
      table << "n_samples,lambda,bound,theta,asymptote\n";
      for (long ns : ns_list) {
        SampleBound b(ns);
        const double th = theta(b);
        for (int i = 0; i < lam_points; ++i) {
          const double lam = lam_min + (lam_max - lam_min) * i / std::max(1, lam_points - 1);
          table << ns << ',' << lam << ',' << f_lambda(b, lam) << ',' << th << ','
                << 1.0 / b.n_star() << '\n';
        }
      }
      if (bc_out.empty()) {
        std::cout << table.str();
      } else {
        std::ofstream out(bc_out);
        if (!out) throw ParseError("cannot write " + bc_out);
        out << table.str();
      }

      if (!empirical) return kOk;
      bool all_pass = true;
      const std::vector<double> lams{0.5, 1.0, 2.0, 4.0};
      for (auto kind : {DisturbanceKind::Gaussian, DisturbanceKind::Skewed,
                        DisturbanceKind::Uniform, DisturbanceKind::Mixture}) {
        for (long ns : ns_list) {
          auto rep = tail_test(kind, ns, lams, bc_trials, bc_seed);
          for (const auto& c : rep.cells)
            std::cout << "dist=" << static_cast<int>(kind) << " ns=" << ns
                      << " lambda=" << c.lambda << " empirical=" << c.empirical
                      << " bound=" << c.bound << (c.pass ? " ok" : " VIOLATION")
                      << " | member=" << c.in_empirical << " bound=" << c.in_bound
                      << (c.in_pass ? " ok" : " VIOLATION") << "\n";
          all_pass = all_pass && rep.all_pass;
        }
      }
      return all_pass ? kOk : kValidationFailure;
    });
  }

  if (gen->parsed()) {
    return run_guarded([&]() {
      RunConfig cfg = load_config(config_path);
      if (cfg.samples.kind != SampleSourceConfig::Kind::Generator)
        throw ParseError("config does not define a sample generator");
      if (gen_count_set) cfg.samples.count = gen_count;
      if (gen_seed_set) cfg.samples.seed = gen_seed;
      auto sets = materialize_samples(cfg);
      for (std::size_t v = 0; v < sets.size(); ++v) {
        const std::string path =
            gen_prefix + "_v" + std::to_string(cfg.spec.vehicles[v].id) + ".csv";
        write_csv(sets[v], cfg.spec.horizon, cfg.spec.system.n(), path);
        std::cout << "wrote " << path << " (" << sets[v].count() << " samples)\n";
      }
      return kOk;
    });
  }

  return kConfigError;
}
