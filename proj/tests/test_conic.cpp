#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "ccsoc/conic.hpp"
#include "ccsoc/rng.hpp"

using namespace ccsoc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ConicProgram lp_min_x_geq_1() {
  ConicProgram p;
  p.P = MatrixXd::Zero(1, 1);
  p.q = VectorXd::Ones(1);
  p.G = -MatrixXd::Ones(1, 1);
  p.h = -VectorXd::Ones(1);
  p.cones.nonneg = 1;
  return p;
}

}  // namespace

TEST_CASE("ipm solves a one-variable LP") {
  InteriorPointBackend backend;
  auto sol = backend.solve(lp_min_x_geq_1());
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.x(0) == Catch::Approx(1.0).margin(1e-8));
  CHECK(sol.objective == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("ipm solves a box-constrained QP") {
  // min 1/2 ||x - a||^2 over [-1, 1]^3; solution clamps a
  const VectorXd a = (VectorXd(3) << 2.0, -0.3, -5.0).finished();
  ConicProgram p;
  p.P = MatrixXd::Identity(3, 3);
  p.q = -a;
  p.G.resize(6, 3);
  p.G << MatrixXd::Identity(3, 3), -MatrixXd::Identity(3, 3);
  p.h = VectorXd::Ones(6);
  p.cones.nonneg = 6;

  InteriorPointBackend backend;
  auto sol = backend.solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  const VectorXd expected = a.cwiseMin(1.0).cwiseMax(-1.0);
  CHECK((sol.x - expected).lpNorm<Eigen::Infinity>() < 1e-7);
}

TEST_CASE("ipm solves a linear objective over a ball") {
  // min c'x s.t. ||x - p|| <= r  ->  x* = p - r c/||c||
  const VectorXd c = (VectorXd(3) << 1.0, -2.0, 0.5).finished();
  const VectorXd center = (VectorXd(3) << 0.3, 0.1, -0.7).finished();
  const double r = 2.0;

  ConicProgram p;
  p.P = MatrixXd::Zero(3, 3);
  p.q = c;
  // cone row block: s = h - Gx = (r, x - center) in Q^4
  p.G.resize(4, 3);
  p.G.row(0).setZero();
  p.G.bottomRows(3) = -MatrixXd::Identity(3, 3);
  p.h.resize(4);
  p.h << r, -center;
  p.cones.soc = {4};

  InteriorPointBackend backend;
  auto sol = backend.solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  const VectorXd expected = center - r * c / c.norm();
  CHECK((sol.x - expected).lpNorm<Eigen::Infinity>() < 1e-7);
  CHECK(sol.objective == Catch::Approx(c.dot(center) - r * c.norm()).margin(1e-7));
}

TEST_CASE("ipm solves a QP with a second-order cone constraint") {
  // min ||x||^2 s.t. ||x - p|| <= r with ||p|| > r  ->  x* = p (1 - r/||p||)
  const VectorXd center = (VectorXd(3) << 3.0, 4.0, 0.0).finished();
  const double r = 2.0;

  ConicProgram p;
  p.P = 2.0 * MatrixXd::Identity(3, 3);
  p.q = VectorXd::Zero(3);
  p.G.resize(4, 3);
  p.G.row(0).setZero();
  p.G.bottomRows(3) = -MatrixXd::Identity(3, 3);
  p.h.resize(4);
  p.h << r, -center;
  p.cones.soc = {4};

  InteriorPointBackend backend;
  auto sol = backend.solve(p);
  REQUIRE(sol.status == SolveStatus::Optimal);
  const VectorXd expected = center * (1.0 - r / center.norm());
  CHECK((sol.x - expected).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("ipm reports primal infeasibility") {
  // x <= 0 and x >= 1
  ConicProgram p;
  p.P = MatrixXd::Zero(1, 1);
  p.q = VectorXd::Zero(1);
  p.G.resize(2, 1);
  p.G << 1.0, -1.0;
  p.h.resize(2);
  p.h << 0.0, -1.0;
  p.cones.nonneg = 2;

  InteriorPointBackend backend;
  auto sol = backend.solve(p);
  CHECK(sol.status == SolveStatus::PrimalInfeasible);
}

TEST_CASE("ipm satisfies KKT conditions on random mixed cone programs") {
  Rng rng(20240817);
  InteriorPointBackend backend;

  for (int trial = 0; trial < 20; ++trial) {
    const int n = 6;
    MatrixXd root(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) root(i, j) = rng.normal();

    ConicProgram p;
    p.P = root.transpose() * root / n + 0.1 * MatrixXd::Identity(n, n);
    p.q.resize(n);
    for (int i = 0; i < n; ++i) p.q(i) = rng.normal();

    // box plus two ball constraints around random interior points
    const long m = 2 * n + 8;
    p.G.resize(m, n);
    p.h.resize(m);
    p.G.topRows(n) = MatrixXd::Identity(n, n);
    p.G.middleRows(n, n) = -MatrixXd::Identity(n, n);
    p.h.head(2 * n).setConstant(3.0);
    p.cones.nonneg = 2 * n;
    p.cones.soc = {4, 4};
    long off = 2 * n;
    for (int cone = 0; cone < 2; ++cone) {
      p.G.row(off).setZero();
      p.G.block(off + 1, 0, 3, n).setZero();
      p.G.block(off + 1, cone, 3, 3) = -MatrixXd::Identity(3, 3);
      p.h(off) = 2.5;
      for (int i = 0; i < 3; ++i) p.h(off + 1 + i) = 0.3 * rng.normal();
      off += 4;
    }

    auto sol = backend.solve(p);
    REQUIRE(sol.status == SolveStatus::Optimal);

    // stationarity, primal feasibility, complementarity
    const VectorXd grad = p.P * sol.x + p.q + p.G.transpose() * sol.z;
    CHECK(grad.lpNorm<Eigen::Infinity>() < 1e-6);
    const VectorXd slack = p.h - p.G * sol.x;
    CHECK((slack - sol.s).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK(std::abs(sol.s.dot(sol.z)) < 1e-6);
  }
}
