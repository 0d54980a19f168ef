#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ccsoc/bounds.hpp"
#include "ccsoc/conic.hpp"
#include "ccsoc/sampling.hpp"
#include "ccsoc/scenario.hpp"

namespace ccsoc {

// ---------------------------------------------------------------------------
// Risk allocation
// ---------------------------------------------------------------------------

/// Per-group uniform shares of the violation budgets. Collision shares are
/// always fixed (the norm constraint is only difference-of-convex for a known
/// share); target shares are fixed in UniformFixed mode and become lower
/// bounds on attainable risk in the piecewise-linear mode.
struct RiskAllocation {
  RiskMode mode = RiskMode::UniformFixed;
  std::vector<double> target_omega;    // one per target group
  std::vector<double> obstacle_omega;  // one per obstacle group
  std::vector<double> pairwise_omega;  // one per pairwise group
};

/// Split every group budget evenly among its members and verify each share is
/// attainable with N_s samples (the budget floor is count/(N_s+1) per group).
inline RiskAllocation allocate_uniform(const ScenarioSpec& spec, long n_samples) {
  SampleBound bound(n_samples);
  RiskAllocation alloc;
  alloc.mode = spec.risk_mode;
  auto check = [&](double share) {
    lambda_of_omega(bound, share);  // throws RiskTooSmallForSampleSize below the floor
    return share;
  };
  for (const auto& g : spec.targets)
    alloc.target_omega.push_back(check(g.alpha / static_cast<double>(g.halfspace_count())));
  for (const auto& o : spec.obstacles)
    alloc.obstacle_omega.push_back(check(o.beta / static_cast<double>(o.term_count())));
  for (const auto& p : spec.pairwise)
    alloc.pairwise_omega.push_back(check(p.gamma / static_cast<double>(p.term_count())));
  return alloc;
}

// ---------------------------------------------------------------------------
// Precomputed, control-independent constraint data
// ---------------------------------------------------------------------------

/// One target halfspace: sample mean of G x(k) is affine in the vehicle's U,
/// the sample standard deviation is a constant.
struct TargetTermData {
  int group = 0;
  int vehicle = 0;  // vehicle index (not id)
  int k = 0;
  Eigen::RowVectorXd mean_u_coeff;  // over that vehicle's U block
  double mean_const = 0.0;
  double std_dev = 0.0;
  double rhs = 0.0;
  double fixed_lambda = 0.0;  // used in UniformFixed mode
};

/// One linearizable collision term ||zbar(U) + z|| >= r at time k.
struct CollisionTermData {
  int vehicle_i = 0;
  int vehicle_j = -1;  // -1 for obstacle terms
  int k = 0;
  QuadraticFormMoments qm;
  double lambda = 0.0;    // fixed multiplier for this term's risk share
  Eigen::MatrixXd SC;     // S * C(k), applied to U_i (and -U_j for pairs)
  Eigen::VectorXd zbar0;  // S * A^k dx0 (- obstacle center), constant part
  double radius = 0.0;
  std::string tag;
};

/// Everything the convex-concave iterations reuse unchanged: concatenated
/// dynamics, per-term moments, and multipliers. Building this is the only
/// place sample data is touched.
struct ProblemData {
  ConcatenatedDynamics dyn;
  std::vector<TargetTermData> targets;
  std::vector<CollisionTermData> collisions;
  RiskAllocation alloc;
  long n_samples = 0;       // 0 for the analytic-moment pipeline
  double theta_value = 0.0; // convexity threshold for the PWL mode
  double lambda_max = 0.0;
};

namespace detail {

/// Moment provider abstraction so the sample-statistics pipeline and the
/// analytic (known-moment) baseline share the reformulation code.
struct MomentProvider {
  virtual ~MomentProvider() = default;
  virtual HalfspaceMoments halfspace(int vehicle, const Eigen::RowVectorXd& g, int k,
                                     const Eigen::VectorXd& x0) const = 0;
  virtual QuadraticFormMoments quadratic(int vehicle_i, int vehicle_j,  // -1 = obstacle
                                         const Eigen::MatrixXd& S, int k) const = 0;
  virtual double multiplier(double omega) const = 0;
  virtual Eigen::VectorXd w_mean(int vehicle) const = 0;
};

inline ProblemData build_problem_data(const ScenarioSpec& spec, const MomentProvider& mp,
                                      const RiskAllocation& alloc,
                                      const ConcatenatedDynamics& dyn) {
  ProblemData data;
  data.dyn = dyn;
  data.alloc = alloc;

  for (std::size_t gi = 0; gi < spec.targets.size(); ++gi) {
    const auto& group = spec.targets[gi];
    const double omega = alloc.target_omega[gi];
    const double lam = mp.multiplier(omega);
    for (const auto& item : group.items) {
      const int v = spec.vehicle_index(item.vehicle);
      for (long r = 0; r < item.G.rows(); ++r) {
        TargetTermData t;
        t.group = static_cast<int>(gi);
        t.vehicle = v;
        t.k = item.k;
        auto hm = mp.halfspace(v, item.G.row(r), item.k, spec.vehicles[v].x0);
        t.mean_u_coeff = hm.mean_u_coeff;
        t.mean_const = hm.mean_const;
        t.std_dev = hm.std_dev;
        t.rhs = item.h(r);
        t.fixed_lambda = lam;
        data.targets.push_back(std::move(t));
      }
    }
  }

  for (std::size_t oi = 0; oi < spec.obstacles.size(); ++oi) {
    const auto& obs = spec.obstacles[oi];
    const double lam = mp.multiplier(alloc.obstacle_omega[oi]);
    for (int id : obs.vehicles) {
      const int v = spec.vehicle_index(id);
      for (int k : obs.steps) {
        CollisionTermData c;
        c.vehicle_i = v;
        c.k = k;
        c.qm = mp.quadratic(v, -1, obs.S, k);
        c.lambda = lam;
        c.SC = obs.S * dyn.C(k);
        c.zbar0 = obs.S * (dyn.A_pow(k) * spec.vehicles[v].x0);
        if (!obs.center.empty()) c.zbar0 -= obs.center[k - 1];
        c.radius = obs.radius;
        c.tag = "obstacle v" + std::to_string(id) + " k" + std::to_string(k);
        data.collisions.push_back(std::move(c));
      }
    }
  }

  for (std::size_t pi = 0; pi < spec.pairwise.size(); ++pi) {
    const auto& pw = spec.pairwise[pi];
    const double lam = mp.multiplier(alloc.pairwise_omega[pi]);
    for (const auto& pr : pw.pairs) {
      const int vi = spec.vehicle_index(pr.first);
      const int vj = spec.vehicle_index(pr.second);
      for (int k : pw.steps) {
        CollisionTermData c;
        c.vehicle_i = vi;
        c.vehicle_j = vj;
        c.k = k;
        c.qm = mp.quadratic(vi, vj, pw.S, k);
        c.lambda = lam;
        c.SC = pw.S * dyn.C(k);
        c.zbar0 = pw.S * (dyn.A_pow(k) * (spec.vehicles[vi].x0 - spec.vehicles[vj].x0));
        c.radius = pw.radius;
        c.tag = "pair v" + std::to_string(pr.first) + "/v" + std::to_string(pr.second) +
                " k" + std::to_string(k);
        data.collisions.push_back(std::move(c));
      }
    }
  }
  return data;
}

/// Sample-statistics provider (the proposed method).
struct SampleMomentProvider final : MomentProvider {
  const ScenarioSpec& spec;
  const std::vector<DisturbanceSampleSet>& samples;
  const ConcatenatedDynamics& dyn;
  std::vector<MomentCache> caches;
  SampleBound bound;

  SampleMomentProvider(const ScenarioSpec& spec_, const std::vector<DisturbanceSampleSet>& s,
                       const ConcatenatedDynamics& dyn_)
      : spec(spec_), samples(s), dyn(dyn_), bound(s.empty() ? 2 : s.front().count()) {
    if (samples.size() != spec.vehicles.size())
      throw DimensionError("one disturbance sample set per vehicle required");
    for (const auto& set : samples) {
      if (set.count() != samples.front().count())
        throw DimensionError("all vehicles must use the same N_s");
      caches.push_back(MomentCache::from(set));
    }
  }

  HalfspaceMoments halfspace(int vehicle, const Eigen::RowVectorXd& g, int k,
                             const Eigen::VectorXd& x0) const override {
    return halfspace_moments(caches[vehicle], dyn, g, k, x0);
  }
  QuadraticFormMoments quadratic(int vi, int vj, const Eigen::MatrixXd& S, int k) const override {
    return quadratic_form_moments(samples[vi], vj >= 0 ? &samples[vj] : nullptr, dyn, S, k);
  }
  double multiplier(double omega) const override { return lambda_of_omega(bound, omega); }
  Eigen::VectorXd w_mean(int vehicle) const override { return caches[vehicle].w_mean; }
};

}  // namespace detail

inline ProblemData build_problem_data(const ScenarioSpec& spec,
                                      const std::vector<DisturbanceSampleSet>& samples,
                                      const RiskAllocation& alloc) {
  spec.validate();
  ConcatenatedDynamics dyn = concatenate(spec.system, spec.horizon);
  detail::SampleMomentProvider mp(spec, samples, dyn);
  ProblemData data = detail::build_problem_data(spec, mp, alloc, dyn);
  data.n_samples = samples.front().count();
  data.theta_value = theta(SampleBound(data.n_samples));
  data.lambda_max = spec.pwl.lambda_max;
  return data;
}

// ---------------------------------------------------------------------------
// Subproblem assembly
// ---------------------------------------------------------------------------

/// Decision vector layout: [ U_1 .. U_Nv | lambda_1..lambda_T t_1..t_T | slacks ].
/// The lambda/t block exists only in the piecewise-linear target mode.
struct VariableLayout {
  int n_vehicles = 0;
  long nu = 0;        // controls per vehicle
  long n_targets = 0; // target terms (for lambda/t sizing)
  bool pwl = false;
  long n_slack = 0;

  long u_offset(int v) const { return static_cast<long>(v) * nu; }
  long lambda_offset(long term) const { return n_vehicles * nu + term; }
  long t_offset(long term) const { return n_vehicles * nu + n_targets + term; }
  long slack_offset(long c) const {
    return n_vehicles * nu + (pwl ? 2 * n_targets : 0) + c;
  }
  long total() const { return n_vehicles * nu + (pwl ? 2 * n_targets : 0) + n_slack; }
};

struct LinearConstraint {
  Eigen::RowVectorXd a;  // a x <= b
  double b = 0.0;
  std::string tag;
};

struct SocConstraint {
  Eigen::MatrixXd F;  // ||F x + g|| <= c x + d
  Eigen::VectorXd g;
  Eigen::RowVectorXd c;
  double d = 0.0;
  std::string tag;
};

struct ReformulatedProgram {
  VariableLayout layout;
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  std::vector<LinearConstraint> linear;
  std::vector<SocConstraint> socs;
  double slack_penalty = 0.0;

  ConicProgram assemble() const {
    const long n = layout.total();
    long m = static_cast<long>(linear.size());
    for (const auto& s : socs) m += s.F.rows() + 1;

    ConicProgram prog;
    prog.P = P;
    prog.q = q;
    prog.G = Eigen::MatrixXd::Zero(m, n);
    prog.h.resize(m);
    long row = 0;
    for (const auto& lc : linear) {
      prog.G.row(row) = lc.a;
      prog.h(row) = lc.b;
      ++row;
    }
    prog.cones.nonneg = row;
    for (const auto& sc : socs) {
      prog.G.row(row) = -sc.c;
      prog.h(row) = sc.d;
      prog.G.middleRows(row + 1, sc.F.rows()) = -sc.F;
      prog.h.segment(row + 1, sc.F.rows()) = sc.g;
      prog.cones.soc.push_back(sc.F.rows() + 1);
      row += sc.F.rows() + 1;
    }
    return prog;
  }
};

/// Chord over-estimate of the tail bound f on [theta, lambda_max]: each chord
/// line lies above f on its own segment (f is convex there) and below the
/// interpolant elsewhere, so the interpolant equals the max of the chord
/// lines — an epigraph variable above all chords is above f.
struct PwlChord {
  double slope, intercept;  // line slope * lambda + intercept
};

inline std::vector<PwlChord> pwl_chords(const SampleBound& bound, double theta_value,
                                        double lambda_max, int knots) {
  if (knots < 2) throw DimensionError("need >= 2 knots");
  if (!(lambda_max > theta_value)) throw DimensionError("lambda_max must exceed theta");
  std::vector<PwlChord> chords;
  for (int i = 0; i + 1 < knots; ++i) {
    const double a = theta_value + (lambda_max - theta_value) * i / (knots - 1);
    const double b = theta_value + (lambda_max - theta_value) * (i + 1) / (knots - 1);
    const double fa = f_lambda(bound, a);
    const double fb = f_lambda(bound, b);
    const double slope = (fb - fa) / (b - a);
    chords.push_back({slope, fa - slope * a});
  }
  return chords;
}

inline double pwl_value(const std::vector<PwlChord>& chords, double lambda) {
  double v = -std::numeric_limits<double>::infinity();
  for (const auto& c : chords) v = std::max(v, c.slope * lambda + c.intercept);
  return v;
}

/// Build the convex subproblem at linearization point prev_U (one stacked
/// control vector per vehicle; all zeros at the first iteration).
inline ReformulatedProgram build_subproblem(const ProblemData& data, const ScenarioSpec& spec,
                                            const std::vector<Eigen::VectorXd>& prev_U,
                                            double slack_penalty) {
  const int nv = static_cast<int>(spec.vehicles.size());
  const long nu = spec.control_dim();
  const int m = spec.system.m();
  if (static_cast<int>(prev_U.size()) != nv) throw DimensionError("one prev_U per vehicle");
  for (const auto& u : prev_U)
    if (u.size() != nu) throw DimensionError("prev_U dimension mismatch");

  ReformulatedProgram rp;
  rp.layout.n_vehicles = nv;
  rp.layout.nu = nu;
  rp.layout.n_targets = static_cast<long>(data.targets.size());
  rp.layout.pwl = data.alloc.mode == RiskMode::PwlTargetOptimized;
  rp.layout.n_slack = static_cast<long>(data.collisions.size());
  rp.slack_penalty = slack_penalty;
  const long n = rp.layout.total();

  rp.P = Eigen::MatrixXd::Zero(n, n);
  for (int v = 0; v < nv; ++v)
    rp.P.block(rp.layout.u_offset(v), rp.layout.u_offset(v), nu, nu) =
        2.0 * spec.control_weight * Eigen::MatrixXd::Identity(nu, nu);
  rp.q = Eigen::VectorXd::Zero(n);
  for (long c = 0; c < rp.layout.n_slack; ++c) rp.q(rp.layout.slack_offset(c)) = slack_penalty;

  // control bounds
  for (int v = 0; v < nv; ++v)
    for (long i = 0; i < nu; ++i) {
      LinearConstraint up, lo;
      up.a = Eigen::RowVectorXd::Zero(n);
      up.a(rp.layout.u_offset(v) + i) = 1.0;
      up.b = spec.u_max(i % m);
      up.tag = "u upper";
      lo.a = Eigen::RowVectorXd::Zero(n);
      lo.a(rp.layout.u_offset(v) + i) = -1.0;
      lo.b = -spec.u_min(i % m);
      lo.tag = "u lower";
      rp.linear.push_back(std::move(up));
      rp.linear.push_back(std::move(lo));
    }

  // target halfspaces: mean(U) + lambda * std <= h
  for (long t = 0; t < rp.layout.n_targets; ++t) {
    const auto& term = data.targets[t];
    LinearConstraint lc;
    lc.a = Eigen::RowVectorXd::Zero(n);
    lc.a.segment(rp.layout.u_offset(term.vehicle), nu) = term.mean_u_coeff;
    lc.tag = "target g" + std::to_string(term.group) + " k" + std::to_string(term.k);
    if (rp.layout.pwl) {
      lc.a(rp.layout.lambda_offset(t)) = term.std_dev;
      lc.b = term.rhs - term.mean_const;
    } else {
      lc.b = term.rhs - term.mean_const - term.fixed_lambda * term.std_dev;
    }
    rp.linear.push_back(std::move(lc));
  }

  if (rp.layout.pwl) {
    SampleBound bound(data.n_samples);
    const auto chords = pwl_chords(bound, data.theta_value, data.lambda_max, spec.pwl.knots);
    for (long t = 0; t < rp.layout.n_targets; ++t) {
      // theta <= lambda <= lambda_max
      LinearConstraint lo, hi;
      lo.a = Eigen::RowVectorXd::Zero(n);
      lo.a(rp.layout.lambda_offset(t)) = -1.0;
      lo.b = -data.theta_value;
      lo.tag = "lambda lower";
      hi.a = Eigen::RowVectorXd::Zero(n);
      hi.a(rp.layout.lambda_offset(t)) = 1.0;
      hi.b = data.lambda_max;
      hi.tag = "lambda upper";
      rp.linear.push_back(std::move(lo));
      rp.linear.push_back(std::move(hi));
      // epigraph above every chord
      for (const auto& c : chords) {
        LinearConstraint e;
        e.a = Eigen::RowVectorXd::Zero(n);
        e.a(rp.layout.lambda_offset(t)) = c.slope;
        e.a(rp.layout.t_offset(t)) = -1.0;
        e.b = -c.intercept;
        e.tag = "chord";
        rp.linear.push_back(std::move(e));
      }
    }
    // per-group budget: sum of epigraph variables <= alpha
    for (std::size_t gi = 0; gi < spec.targets.size(); ++gi) {
      LinearConstraint budget;
      budget.a = Eigen::RowVectorXd::Zero(n);
      for (long t = 0; t < rp.layout.n_targets; ++t)
        if (data.targets[t].group == static_cast<int>(gi)) budget.a(rp.layout.t_offset(t)) = 1.0;
      budget.b = spec.targets[gi].alpha;
      budget.tag = "risk budget g" + std::to_string(gi);
      rp.linear.push_back(std::move(budget));
    }
  }

  // linearized collision terms: one second-order cone + slack each.
  //   lambda * ||R_std [zbar(U); 1]|| <= -r^2 + slack + mean_lin(U)
  // with the concave sample-mean quadratic replaced by its tangent at prev_U.
  for (long c = 0; c < rp.layout.n_slack; ++c) {
    const auto& term = data.collisions[c];
    const long q1 = term.zbar0.size() + 1;

    // zbar(U) = zbar0 + SC * dU, with dU = U_i (- U_j)
    Eigen::VectorXd dU_prev = prev_U[term.vehicle_i];
    if (term.vehicle_j >= 0) dU_prev -= prev_U[term.vehicle_j];
    const Eigen::VectorXd zbar_prev = term.zbar0 + term.SC * dU_prev;
    Eigen::VectorXd v_prev(q1);
    v_prev << zbar_prev, 1.0;

    // gradient of the mean quadratic at the base point
    const Eigen::RowVectorXd grad_u =
        2.0 * (zbar_prev + term.qm.z_mean).transpose() * term.SC;
    const double mean_at_prev = term.qm.mean_quadratic(zbar_prev);

    SocConstraint sc;
    sc.F = Eigen::MatrixXd::Zero(q1, n);
    Eigen::MatrixXd FU = term.lambda * term.qm.R_std.leftCols(q1 - 1) * term.SC;
    sc.F.middleCols(rp.layout.u_offset(term.vehicle_i), nu) = FU;
    if (term.vehicle_j >= 0) sc.F.middleCols(rp.layout.u_offset(term.vehicle_j), nu) = -FU;
    Eigen::VectorXd v0(q1);
    v0 << term.zbar0, 1.0;
    sc.g = term.lambda * (term.qm.R_std * v0);
    sc.c = Eigen::RowVectorXd::Zero(n);
    sc.c.segment(rp.layout.u_offset(term.vehicle_i), nu) = grad_u;
    if (term.vehicle_j >= 0) sc.c.segment(rp.layout.u_offset(term.vehicle_j), nu) = -grad_u;
    sc.c(rp.layout.slack_offset(c)) = 1.0;
    sc.d = -term.radius * term.radius + mean_at_prev - grad_u.dot(dU_prev);
    sc.tag = term.tag;
    rp.socs.push_back(std::move(sc));

    LinearConstraint nn;
    nn.a = Eigen::RowVectorXd::Zero(n);
    nn.a(rp.layout.slack_offset(c)) = -1.0;
    nn.b = 0.0;
    nn.tag = "slack nonneg";
    rp.linear.push_back(std::move(nn));
  }

  return rp;
}

}  // namespace ccsoc
