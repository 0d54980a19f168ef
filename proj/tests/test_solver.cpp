#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "ccsoc/solver.hpp"

using namespace ccsoc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

LtiSystem integrator2d() {
  LtiSystem sys;
  sys.A = MatrixXd::Identity(4, 4);
  sys.A(0, 2) = sys.A(1, 3) = 1.0;
  sys.B = MatrixXd::Zero(4, 2);
  sys.B(0, 0) = sys.B(1, 1) = 0.5;
  sys.B(2, 0) = sys.B(3, 1) = 1.0;
  sys.dt = 1.0;
  return sys;
}

ScenarioSpec base_spec() {
  ScenarioSpec spec;
  spec.system = integrator2d();
  spec.horizon = 4;
  VehicleState a, b;
  a.id = 1;
  a.x0 = (VectorXd(4) << -10.0, 1.0, 0.0, 0.0).finished();
  b.id = 2;
  b.x0 = (VectorXd(4) << -10.0, -1.0, 0.0, 0.0).finished();
  spec.vehicles = {a, b};
  spec.u_min = VectorXd::Constant(2, -3.0);
  spec.u_max = VectorXd::Constant(2, 3.0);

  MatrixXd G(4, 4);
  G << 1, 0, 0, 0, -1, 0, 0, 0, 0, 1, 0, 0, 0, -1, 0, 0;
  TargetGroup grp;
  grp.alpha = 0.05;
  TargetItem ia;
  ia.vehicle = 1;
  ia.k = 4;
  ia.G = G;
  ia.h = (VectorXd(4) << 6.0, -4.0, 3.0, -1.0).finished();
  TargetItem ib = ia;
  ib.vehicle = 2;
  ib.h = (VectorXd(4) << 6.0, -4.0, -1.0, 3.0).finished();
  grp.items = {ia, ib};
  spec.targets = {grp};
  return spec;
}

ScenarioSpec spec_with_pairwise() {
  ScenarioSpec spec = base_spec();
  PairwiseAvoidance pw;
  pw.gamma = 0.05;
  pw.S = (MatrixXd(2, 4) << 1, 0, 0, 0, 0, 1, 0, 0).finished();
  pw.radius = 1.0;
  pw.pairs = {{1, 2}};
  pw.steps = {1, 2, 3, 4};
  spec.pairwise = {pw};
  return spec;
}

std::vector<DisturbanceSampleSet> draw_sets(const ScenarioSpec& spec, long ns,
                                            std::uint64_t seed, double scale = 0.005) {
  GeneratorSpec gen;
  gen.kind = DisturbanceKind::Gaussian;
  gen.scale = (VectorXd(4) << scale, scale, 0.4 * scale, 0.4 * scale).finished();
  std::vector<DisturbanceSampleSet> sets;
  for (const auto& v : spec.vehicles)
    sets.push_back(synth_disturbances(gen, spec.horizon, ns, seed, v.id));
  return sets;
}

}  // namespace

TEST_CASE("target-only problems converge in a single iteration") {
  ScenarioSpec spec = base_spec();
  auto sets = draw_sets(spec, 400, 11);
  InteriorPointBackend backend;
  auto sol = solve_ccp(spec, sets, {}, backend);

  CHECK(sol.status == CcpStatus::Converged);
  CHECK(sol.ledger.size() == 1);
  CHECK(sol.objective > 0.0);
  CHECK(sol.method == "proposed");
  REQUIRE(sol.U.size() == 2);
  CHECK(sol.lambda_values.size() == 8);

  auto alloc = allocate_uniform(spec, 400);
  auto data = build_problem_data(spec, sets, alloc);
  auto rep = verify_feasibility(spec, data, sol.U, sol.lambda_values);
  CHECK(rep.pass);
}

TEST_CASE("coupled collision problem converges with vanishing slack") {
  ScenarioSpec spec = spec_with_pairwise();
  auto sets = draw_sets(spec, 400, 23);
  InteriorPointBackend backend;
  CcpConfig cfg;
  auto sol = solve_ccp(spec, sets, cfg, backend);

  CHECK(sol.status == CcpStatus::Converged);
  CHECK(sol.ledger.size() >= 2);
  CHECK(sol.ledger.back().slack_sum < cfg.slack_tol);
  // converged means both criteria held at the same iteration
  const auto& last = sol.ledger.back();
  const auto& prev = sol.ledger[sol.ledger.size() - 2];
  CHECK(std::abs(last.objective - prev.objective) < cfg.objective_tol);

  auto alloc = allocate_uniform(spec, 400);
  auto data = build_problem_data(spec, sets, alloc);
  auto rep = verify_feasibility(spec, data, sol.U, sol.lambda_values);
  CHECK(rep.pass);

  // gross perturbation must fail the independent re-check
  auto bad = sol.U;
  bad[0].array() += 2.0;
  auto rep2 = verify_feasibility(spec, data, bad, sol.lambda_values);
  CHECK_FALSE(rep2.pass);
}

TEST_CASE("repeated solves are bit-identical") {
  ScenarioSpec spec = spec_with_pairwise();
  auto sets = draw_sets(spec, 300, 555);
  InteriorPointBackend backend;
  auto s1 = solve_ccp(spec, sets, {}, backend);
  auto s2 = solve_ccp(spec, sets, {}, backend);

  REQUIRE(s1.ledger.size() == s2.ledger.size());
  for (std::size_t i = 0; i < s1.ledger.size(); ++i) {
    CHECK(s1.ledger[i].objective == s2.ledger[i].objective);
    CHECK(s1.ledger[i].slack_sum == s2.ledger[i].slack_sum);
    CHECK(s1.ledger[i].step_norm == s2.ledger[i].step_norm);
  }
  for (std::size_t v = 0; v < s1.U.size(); ++v)
    CHECK((s1.U[v] - s2.U[v]).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("unreachable target reports infeasibility, never convergence") {
  ScenarioSpec spec = base_spec();
  spec.u_min = VectorXd::Constant(2, -0.05);
  spec.u_max = VectorXd::Constant(2, 0.05);  // cannot cross 14 units in 4 steps
  auto sets = draw_sets(spec, 400, 7);
  InteriorPointBackend backend;
  CHECK_THROWS_AS(solve_ccp(spec, sets, {}, backend), InfeasibleSubproblem);
}

TEST_CASE("risk tightening wider than the target set is infeasible, not converged") {
  ScenarioSpec spec = base_spec();
  // multiplier ~34 at this share/sample count; std ~0.05 exceeds the
  // half-width-1 box, so no control can satisfy the tightened halfspaces
  auto sets = draw_sets(spec, 400, 11, 0.02);
  InteriorPointBackend backend;
  CHECK_THROWS_AS(solve_ccp(spec, sets, {}, backend), InfeasibleSubproblem);
}

TEST_CASE("risk below the sample floor surfaces before any solve") {
  ScenarioSpec spec = base_spec();
  spec.targets[0].alpha = 0.001;  // share 1.25e-4, needs N_s >= 8000
  auto sets = draw_sets(spec, 400, 7);
  InteriorPointBackend backend;
  CHECK_THROWS_AS(solve_ccp(spec, sets, {}, backend), RiskTooSmallForSampleSize);
}

TEST_CASE("gaussian 2-norm moment identities match a Monte Carlo oracle") {
  // identities used by the analytic baseline:
  //   E||z||^2 = ||mu||^2 + tr(S),  Var(z'z) = 4 mu'S mu + 2 tr(S^2),
  //   Cov(z, z'z) = 2 S mu
  Rng rng(2024);
  VectorXd mu(3);
  mu << 0.4, -0.7, 0.2;
  MatrixXd Araw(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) Araw(i, j) = rng.normal();
  MatrixXd S = Araw * Araw.transpose() / 3.0 + 0.2 * MatrixXd::Identity(3, 3);
  Eigen::LLT<MatrixXd> llt(S);
  MatrixXd L = llt.matrixL();

  const long M = 2'000'000;
  double sum_zz = 0.0, sum_zz2 = 0.0;
  VectorXd sum_z = VectorXd::Zero(3), sum_z_zz = VectorXd::Zero(3);
  for (long i = 0; i < M; ++i) {
    VectorXd g(3);
    g << rng.normal(), rng.normal(), rng.normal();
    VectorXd z = mu + L * g;
    const double zz = z.squaredNorm();
    sum_zz += zz;
    sum_zz2 += zz * zz;
    sum_z += z;
    sum_z_zz += z * zz;
  }
  const double mc_mean = sum_zz / M;
  const double mc_var = sum_zz2 / M - mc_mean * mc_mean;
  VectorXd mc_cov = sum_z_zz / M - (sum_z / M) * mc_mean;

  const double an_mean = mu.squaredNorm() + S.trace();
  const double an_var = 4.0 * mu.dot(S * mu) + 2.0 * (S * S).trace();
  VectorXd an_cov = 2.0 * S * mu;

  CHECK(mc_mean == Catch::Approx(an_mean).epsilon(0.005));
  CHECK(mc_var == Catch::Approx(an_var).epsilon(0.02));
  for (int i = 0; i < 3; ++i) CHECK(mc_cov(i) == Catch::Approx(an_cov(i)).margin(0.02));
}

TEST_CASE("analytic baseline is cheaper than the sampled reformulation") {
  // the Cantelli multiplier uses exact moments and is far smaller than the
  // sample-statistics multiplier at moderate N_s, so its feasible set is wider
  ScenarioSpec spec = spec_with_pairwise();
  auto sets = draw_sets(spec, 400, 88);
  InteriorPointBackend backend;
  auto proposed = solve_ccp(spec, sets, {}, backend);

  GeneratorSpec gen;
  gen.scale = (VectorXd(4) << 0.005, 0.005, 0.002, 0.002).finished();
  const long d = spec.horizon * 4;
  VectorXd w_mean = VectorXd::Zero(d);
  MatrixXd w_cov = MatrixXd::Zero(d, d);
  for (long i = 0; i < d; ++i) w_cov(i, i) = gen.scale(i % 4) * gen.scale(i % 4);
  auto cant = solve_cantelli_baseline(spec, w_mean, w_cov, {}, backend);

  CHECK(proposed.status == CcpStatus::Converged);
  CHECK(cant.status == CcpStatus::Converged);
  CHECK(cant.method == "cantelli");
  CHECK(cant.objective <= proposed.objective + 1e-9);
}

TEST_CASE("cantelli baseline rejects a degenerate disturbance") {
  ScenarioSpec spec = base_spec();
  const long d = spec.horizon * 4;
  InteriorPointBackend backend;
  CHECK_THROWS_AS(solve_cantelli_baseline(spec, VectorXd::Zero(d), MatrixXd::Zero(d, d),
                                          {}, backend),
                  DegenerateSampleError);
}

TEST_CASE("scenario baseline satisfies every sampled constraint exactly") {
  ScenarioSpec spec = base_spec();
  auto sets = draw_sets(spec, 250, 404);
  InteriorPointBackend backend;
  auto sol = solve_scenario_baseline(spec, sets, backend);
  CHECK(sol.status == CcpStatus::Converged);
  CHECK(sol.method == "scenario");

  auto dyn = concatenate(spec.system, spec.horizon);
  for (const auto& grp : spec.targets)
    for (const auto& it : grp.items) {
      const int v = spec.vehicle_index(it.vehicle);
      for (long s = 0; s < sets[v].count(); ++s) {
        const VectorXd xk = dyn.A_pow(it.k) * spec.vehicles[v].x0 + dyn.C(it.k) * sol.U[v] +
                            dyn.D(it.k) * sets[v].samples.row(s).transpose();
        const VectorXd gx = it.G * xk;
        for (long r = 0; r < gx.size(); ++r) CHECK(gx(r) <= it.h(r) + 1e-7);
      }
    }

  // collision constraints are outside the scenario baseline's contract
  CHECK_THROWS_AS(solve_scenario_baseline(spec_with_pairwise(),
                                          draw_sets(spec_with_pairwise(), 250, 1), backend),
                  DimensionError);
}
