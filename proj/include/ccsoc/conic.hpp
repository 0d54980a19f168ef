#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>
#ifdef CCSOC_IPM_TRACE
#include <cstdio>
#endif

#include "ccsoc/errors.hpp"

namespace ccsoc {

// ---------------------------------------------------------------------------
// Conic program in standard form:
//
//   minimize    (1/2) x' P x + q' x
//   subject to  h - G x  in  K,   K = R+^l  x  Q^{d_1}  x ... x  Q^{d_nc}
//
// where Q^d = { (t, y) : ||y|| <= t } is the second-order cone of dimension d.
// The first `nonneg` rows of G encode affine inequalities G x <= h; each
// subsequent block of d_i rows encodes one second-order cone constraint.
// ---------------------------------------------------------------------------

struct ConeDims {
  long nonneg = 0;
  std::vector<long> soc;

  long total() const {
    long t = nonneg;
    for (long d : soc) t += d;
    return t;
  }
  // barrier degree: 1 per linear row, 1 per second-order cone
  long degree() const { return nonneg + static_cast<long>(soc.size()); }
};

struct ConicProgram {
  Eigen::MatrixXd P;  // n x n, symmetric PSD (may be zero)
  Eigen::VectorXd q;  // n
  Eigen::MatrixXd G;  // m x n
  Eigen::VectorXd h;  // m
  ConeDims cones;

  long num_vars() const { return q.size(); }

  void validate() const {
    const long n = q.size();
    if (P.rows() != n || P.cols() != n) throw DimensionError("P must be n x n");
    if (G.cols() != n) throw DimensionError("G column count must equal n");
    if (G.rows() != h.size()) throw DimensionError("G and h row counts differ");
    if (cones.total() != G.rows()) throw DimensionError("cone dimensions do not sum to row count");
    for (long d : cones.soc)
      if (d < 2) throw DimensionError("second-order cones must have dimension >= 2");
  }
};

enum class SolveStatus {
  Optimal,
  PrimalInfeasible,
  DualInfeasible,
  MaxIterations,
  NumericalError,
};

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::PrimalInfeasible: return "primal_infeasible";
    case SolveStatus::DualInfeasible: return "dual_infeasible";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::NumericalError: return "numerical_error";
  }
  return "unknown";
}

struct ConicSolution {
  SolveStatus status = SolveStatus::NumericalError;
  Eigen::VectorXd x;
  Eigen::VectorXd s;
  Eigen::VectorXd z;
  double objective = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double primal_residual = std::numeric_limits<double>::infinity();
  double dual_residual = std::numeric_limits<double>::infinity();
  double duality_gap = std::numeric_limits<double>::infinity();
};

struct BackendCapabilities {
  bool affine = false;
  bool second_order_cone = false;
  bool quadratic_objective = false;
};

/// Contract for the convex subproblem engine used by the convex-concave loop.
class SubproblemBackend {
 public:
  virtual ~SubproblemBackend() = default;
  virtual BackendCapabilities capabilities() const = 0;
  virtual ConicSolution solve(const ConicProgram& prog) const = 0;
};

// ---------------------------------------------------------------------------
// Built-in primal-dual interior-point method with Nesterov-Todd scaling and
// a Mehrotra predictor-corrector step. Dense linear algebra on the normal
// equations P + G' W^-2 G, which stays small because the decision vector is.
// ---------------------------------------------------------------------------

struct IpmSettings {
  int max_iterations = 200;
  double feas_tol = 1e-8;
  double abs_gap_tol = 1e-8;
  double rel_gap_tol = 1e-8;
  double infeas_tol = 1e-7;
  double step_fraction = 0.99;
  double static_reg = 1e-11;
};

namespace ipm_detail {

inline double soc_residual(const Eigen::Ref<const Eigen::VectorXd>& u) {
  return u(0) * u(0) - u.tail(u.size() - 1).squaredNorm();
}

inline bool in_cone(const Eigen::VectorXd& u, const ConeDims& cones, double margin = 0.0) {
  for (long i = 0; i < cones.nonneg; ++i)
    if (!(u(i) > margin)) return false;
  long off = cones.nonneg;
  for (long d : cones.soc) {
    if (!(u(off) > margin) || !(soc_residual(u.segment(off, d)) > margin)) return false;
    off += d;
  }
  return true;
}

/// Largest step alpha such that u + alpha * du stays in the cone, capped.
inline double max_step(const Eigen::VectorXd& u, const Eigen::VectorXd& du,
                       const ConeDims& cones, double cap = 1.0) {
  double alpha = cap;
  for (long i = 0; i < cones.nonneg; ++i)
    if (du(i) < 0.0) alpha = std::min(alpha, -u(i) / du(i));
  long off = cones.nonneg;
  for (long d : cones.soc) {
    const auto uu = u.segment(off, d);
    const auto dd = du.segment(off, d);
    // roots of (u0 + a d0)^2 - ||u1 + a d1||^2 = 0
    const double a = dd(0) * dd(0) - dd.tail(d - 1).squaredNorm();
    const double b = 2.0 * (uu(0) * dd(0) - uu.tail(d - 1).dot(dd.tail(d - 1)));
    const double c = soc_residual(uu);
    double bound = std::numeric_limits<double>::infinity();
    const double disc = b * b - 4.0 * a * c;
    if (std::abs(a) < 1e-300) {
      if (b < 0.0) bound = -c / b;
    } else if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double r1 = (-b - sq) / (2.0 * a);
      const double r2 = (-b + sq) / (2.0 * a);
      for (double r : {std::min(r1, r2), std::max(r1, r2)})
        if (r > 0.0 && uu(0) + r * dd(0) >= 0.0) {
          bound = r;
          break;
        }
    }
    if (dd(0) < 0.0) bound = std::min(bound, -uu(0) / dd(0));
    alpha = std::min(alpha, bound);
    off += d;
  }
  return std::max(alpha, 0.0);
}

/// Nesterov-Todd scaling for one iterate. For the linear block W is the
/// diagonal sqrt(s/z); for each second-order cone W = beta (2 v v' - J) with
/// v'Jv = 1, which satisfies W z = W^-1 s.
struct Scaling {
  Eigen::VectorXd lp_w;                // sqrt(s_i / z_i)
  std::vector<Eigen::MatrixXd> soc_w;  // dense per-cone W
  std::vector<Eigen::MatrixXd> soc_winv;
  Eigen::VectorXd lambda;              // scaled point, = W z = W^-1 s

  static Scaling compute(const Eigen::VectorXd& s, const Eigen::VectorXd& z,
                         const ConeDims& cones) {
    Scaling sc;
    sc.lambda.resize(s.size());
    sc.lp_w.resize(cones.nonneg);
    for (long i = 0; i < cones.nonneg; ++i) {
      sc.lp_w(i) = std::sqrt(s(i) / z(i));
      sc.lambda(i) = std::sqrt(s(i) * z(i));
    }
    long off = cones.nonneg;
    for (long d : cones.soc) {
      const Eigen::VectorXd sb = s.segment(off, d);
      const Eigen::VectorXd zb = z.segment(off, d);
      const double rs = std::sqrt(soc_residual(sb));
      const double rz = std::sqrt(soc_residual(zb));
      Eigen::VectorXd sn = sb / rs, zn = zb / rz;
      const double gamma = std::sqrt((1.0 + sn.dot(zn)) / 2.0);
      Eigen::VectorXd wbar = zn;
      wbar.tail(d - 1) *= -1.0;  // J z
      wbar += sn;
      wbar /= 2.0 * gamma;
      Eigen::VectorXd v = wbar;
      v(0) += 1.0;
      v /= std::sqrt(2.0 * v(0));
      const double beta = std::sqrt(rs / rz);

      Eigen::MatrixXd J = -Eigen::MatrixXd::Identity(d, d);
      J(0, 0) = 1.0;
      Eigen::VectorXd jv = J * v;
      Eigen::MatrixXd W = beta * (2.0 * v * v.transpose() - J);
      Eigen::MatrixXd Winv = (2.0 * jv * jv.transpose() - J) / beta;
      sc.lambda.segment(off, d) = W * zb;
      sc.soc_w.push_back(std::move(W));
      sc.soc_winv.push_back(std::move(Winv));
      off += d;
    }
    return sc;
  }

  Eigen::VectorXd apply_w(const Eigen::VectorXd& u, const ConeDims& cones) const {
    Eigen::VectorXd out(u.size());
    out.head(cones.nonneg) = lp_w.cwiseProduct(u.head(cones.nonneg));
    long off = cones.nonneg;
    for (std::size_t i = 0; i < cones.soc.size(); ++i) {
      const long d = cones.soc[i];
      out.segment(off, d) = soc_w[i] * u.segment(off, d);
      off += d;
    }
    return out;
  }

  Eigen::VectorXd apply_winv(const Eigen::VectorXd& u, const ConeDims& cones) const {
    Eigen::VectorXd out(u.size());
    out.head(cones.nonneg) = u.head(cones.nonneg).cwiseQuotient(lp_w);
    long off = cones.nonneg;
    for (std::size_t i = 0; i < cones.soc.size(); ++i) {
      const long d = cones.soc[i];
      out.segment(off, d) = soc_winv[i] * u.segment(off, d);
      off += d;
    }
    return out;
  }
};

/// Jordan product u o v.
inline Eigen::VectorXd jordan_product(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                                      const ConeDims& cones) {
  Eigen::VectorXd out(u.size());
  out.head(cones.nonneg) = u.head(cones.nonneg).cwiseProduct(v.head(cones.nonneg));
  long off = cones.nonneg;
  for (long d : cones.soc) {
    const auto ub = u.segment(off, d);
    const auto vb = v.segment(off, d);
    out(off) = ub.dot(vb);
    out.segment(off + 1, d - 1) = ub(0) * vb.tail(d - 1) + vb(0) * ub.tail(d - 1);
    off += d;
  }
  return out;
}

/// Jordan division: solve lambda o y = d for y.
inline Eigen::VectorXd jordan_solve(const Eigen::VectorXd& lambda, const Eigen::VectorXd& d,
                                    const ConeDims& cones) {
  Eigen::VectorXd out(d.size());
  out.head(cones.nonneg) = d.head(cones.nonneg).cwiseQuotient(lambda.head(cones.nonneg));
  long off = cones.nonneg;
  for (long dim : cones.soc) {
    const auto lb = lambda.segment(off, dim);
    const auto db = d.segment(off, dim);
    // Arrow(lambda)^-1 d, closed form
    const double nu = soc_residual(lb);
    const double l0 = lb(0);
    const auto l1 = lb.tail(dim - 1);
    const double d0 = db(0);
    const auto d1 = db.tail(dim - 1);
    out(off) = (l0 * d0 - l1.dot(d1)) / nu;
    out.segment(off + 1, dim - 1) = (d1 - out(off) * l1) / l0;
    off += dim;
  }
  return out;
}

inline Eigen::VectorXd cone_identity(const ConeDims& cones) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(cones.total());
  e.head(cones.nonneg).setOnes();
  long off = cones.nonneg;
  for (long d : cones.soc) {
    e(off) = 1.0;
    off += d;
  }
  return e;
}

/// Shift a vector into the interior of the cone.
inline Eigen::VectorXd shift_into_cone(Eigen::VectorXd u, const ConeDims& cones) {
  if (cones.nonneg > 0) {
    const double deficit = -u.head(cones.nonneg).minCoeff();
    if (deficit >= -1e-8)
      u.head(cones.nonneg).array() += deficit + 1.0;
  }
  long off = cones.nonneg;
  for (long d : cones.soc) {
    const double deficit = u.segment(off + 1, d - 1).norm() - u(off);
    if (deficit >= -1e-8) u(off) += deficit + 1.0;
    off += d;
  }
  return u;
}

}  // namespace ipm_detail

class InteriorPointBackend final : public SubproblemBackend {
 public:
  explicit InteriorPointBackend(IpmSettings settings = {}) : settings_(settings) {}

  BackendCapabilities capabilities() const override {
    return BackendCapabilities{true, true, true};
  }

  ConicSolution solve(const ConicProgram& prog) const override {
    prog.validate();
    const long n = prog.num_vars();
    const long m = prog.G.rows();
    if (m == 0) return solve_core(prog);

    // Ruiz equilibration. Problem data produced by the reformulation mixes
    // unit-scale bound rows with rows whose coefficients span several orders
    // of magnitude, which floors the attainable dual accuracy; equilibrate
    // first and solve the scaled problem. Rows of one second-order cone share
    // a scale so each scaled block still describes the same cone.
    Eigen::VectorXd col_scale = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd row_scale = Eigen::VectorXd::Ones(m);
    ConicProgram sp = prog;
    for (int pass = 0; pass < 15; ++pass) {
      Eigen::VectorXd rnorm(m);
      for (long i = 0; i < m; ++i) rnorm(i) = sp.G.row(i).lpNorm<Eigen::Infinity>();
      long off = sp.cones.nonneg;
      for (long dsz : sp.cones.soc) {
        rnorm.segment(off, dsz).setConstant(rnorm.segment(off, dsz).maxCoeff());
        off += dsz;
      }
      for (long i = 0; i < m; ++i) {
        const double f = rnorm(i) > 0 ? 1.0 / std::sqrt(rnorm(i)) : 1.0;
        sp.G.row(i) *= f;
        sp.h(i) *= f;
        row_scale(i) *= f;
      }
      for (long j = 0; j < n; ++j) {
        const double cn =
            std::max(sp.P.col(j).lpNorm<Eigen::Infinity>(), sp.G.col(j).lpNorm<Eigen::Infinity>());
        const double f = cn > 0 ? 1.0 / std::sqrt(cn) : 1.0;
        sp.P.col(j) *= f;
        sp.P.row(j) *= f;
        sp.q(j) *= f;
        sp.G.col(j) *= f;
        col_scale(j) *= f;
      }
    }
    const double cost_scale =
        1.0 / std::max({1.0, sp.q.lpNorm<Eigen::Infinity>(), sp.P.lpNorm<Eigen::Infinity>()});
    sp.P *= cost_scale;
    sp.q *= cost_scale;

    ConicSolution sol = solve_core(sp);
    sol.x = col_scale.cwiseProduct(sol.x);
    sol.s = sol.s.cwiseQuotient(row_scale);
    sol.z = sol.z.cwiseProduct(row_scale) / cost_scale;
    sol.objective = 0.5 * sol.x.dot(prog.P * sol.x) + prog.q.dot(sol.x);
    const Eigen::VectorXd px = prog.P * sol.x;
    const Eigen::VectorXd gtz = prog.G.transpose() * sol.z;
    const double rp_scale =
        std::max({1.0, prog.h.lpNorm<Eigen::Infinity>(),
                  (prog.G * sol.x).lpNorm<Eigen::Infinity>(), sol.s.lpNorm<Eigen::Infinity>()});
    const double rd_scale = std::max({1.0, prog.q.lpNorm<Eigen::Infinity>(),
                                      px.lpNorm<Eigen::Infinity>(), gtz.lpNorm<Eigen::Infinity>()});
    sol.primal_residual = (prog.G * sol.x + sol.s - prog.h).lpNorm<Eigen::Infinity>() / rp_scale;
    sol.dual_residual = (px + prog.q + gtz).lpNorm<Eigen::Infinity>() / rd_scale;
    sol.duality_gap = sol.s.dot(sol.z);
    return sol;
  }

 private:
  ConicSolution solve_core(const ConicProgram& prog) const {
    using namespace ipm_detail;

    const long n = prog.num_vars();
    const long m = prog.G.rows();
    const ConeDims& cones = prog.cones;
    const double m_deg = static_cast<double>(cones.degree());

    ConicSolution sol;
    if (m == 0) {
      // unconstrained QP
      Eigen::LDLT<Eigen::MatrixXd> ldlt(
          prog.P + settings_.static_reg * Eigen::MatrixXd::Identity(n, n));
      sol.x = ldlt.solve(-prog.q);
      sol.s.resize(0);
      sol.z.resize(0);
      sol.status = SolveStatus::Optimal;
      sol.objective = 0.5 * sol.x.dot(prog.P * sol.x) + prog.q.dot(sol.x);
      sol.primal_residual = sol.dual_residual = sol.duality_gap = 0.0;
      return sol;
    }

    // initial point: one regularized least-squares solve, then shift into cone
    Eigen::MatrixXd M0 = prog.P + prog.G.transpose() * prog.G;
    M0.diagonal().array() += 1e-8;
    Eigen::VectorXd x = M0.ldlt().solve(prog.G.transpose() * prog.h - prog.q);
    Eigen::VectorXd y = prog.G * x - prog.h;
    Eigen::VectorXd s = shift_into_cone(-y, cones);
    Eigen::VectorXd z = shift_into_cone(y, cones);

    const double h_scale = std::max(1.0, prog.h.lpNorm<Eigen::Infinity>());
    const double q_scale = std::max(1.0, prog.q.lpNorm<Eigen::Infinity>());

    // Near the boundary the scaled system is ill-conditioned and residuals can
    // bounce after the iterate has effectively converged, so remember the best
    // iterate seen and fall back to it on any non-optimal exit.
    double best_metric = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_x = x, best_s = s, best_z = z;
    int stall = 0;

    auto finish_with_best = [&](SolveStatus fallback) {
      sol.x = best_x;
      sol.s = best_s;
      sol.z = best_z;
      sol.objective = 0.5 * best_x.dot(prog.P * best_x) + prog.q.dot(best_x);
      const Eigen::VectorXd px = prog.P * best_x;
      const Eigen::VectorXd gtz = prog.G.transpose() * best_z;
      const double rp_scale = std::max({h_scale, (prog.G * best_x).lpNorm<Eigen::Infinity>(),
                                        best_s.lpNorm<Eigen::Infinity>()});
      const double rd_scale =
          std::max({q_scale, px.lpNorm<Eigen::Infinity>(), gtz.lpNorm<Eigen::Infinity>()});
      sol.primal_residual =
          (prog.G * best_x + best_s - prog.h).lpNorm<Eigen::Infinity>() / rp_scale;
      sol.dual_residual = (px + prog.q + gtz).lpNorm<Eigen::Infinity>() / rd_scale;
      sol.duality_gap = best_s.dot(best_z);
      sol.status = best_metric < 10.0 * settings_.feas_tol ? SolveStatus::Optimal : fallback;
      return sol;
    };

    for (int iter = 1; iter <= settings_.max_iterations; ++iter) {
      sol.iterations = iter;

      const Eigen::VectorXd px = prog.P * x;
      const Eigen::VectorXd gtz = prog.G.transpose() * z;
      Eigen::VectorXd r_dual = px + prog.q + gtz;
      Eigen::VectorXd r_prim = prog.G * x + s - prog.h;
      const double gap = s.dot(z);
      const double pobj = 0.5 * x.dot(px) + prog.q.dot(x);

      // residuals are measured relative to the size of the terms that form
      // them, so convergence is scale-invariant
      const double rp_scale = std::max(
          {h_scale, (prog.G * x).lpNorm<Eigen::Infinity>(), s.lpNorm<Eigen::Infinity>()});
      const double rd_scale = std::max(
          {q_scale, px.lpNorm<Eigen::Infinity>(), gtz.lpNorm<Eigen::Infinity>()});
      sol.primal_residual = r_prim.lpNorm<Eigen::Infinity>() / rp_scale;
      sol.dual_residual = r_dual.lpNorm<Eigen::Infinity>() / rd_scale;
      sol.duality_gap = gap;
#ifdef CCSOC_IPM_TRACE
      std::fprintf(stderr, "iter %3d rp=%.3e rd=%.3e gap=%.3e obj=%.6e\n", iter,
                   sol.primal_residual, sol.dual_residual, gap, pobj);
#endif

      if (sol.primal_residual < settings_.feas_tol && sol.dual_residual < settings_.feas_tol &&
          (gap < settings_.abs_gap_tol || gap < settings_.rel_gap_tol * std::max(1.0, std::abs(pobj)))) {
        sol.status = SolveStatus::Optimal;
        sol.x = x;
        sol.s = s;
        sol.z = z;
        sol.objective = pobj;
        return sol;
      }

      const double metric =
          std::max({sol.primal_residual, sol.dual_residual,
                    std::min(gap, gap / std::max(1.0, std::abs(pobj)))});
      if (metric < best_metric) {
        best_metric = metric;
        best_x = x;
        best_s = s;
        best_z = z;
        stall = 0;
      } else if (++stall >= 10) {
        return finish_with_best(SolveStatus::MaxIterations);
      }

      // primal infeasibility certificate: z in K*, G'z ~ 0, h'z < 0
      {
        const double znorm = z.lpNorm<Eigen::Infinity>();
        if (znorm > 0) {
          const double gtz = (prog.G.transpose() * z).lpNorm<Eigen::Infinity>();
          const double htz = prog.h.dot(z);
#ifdef CCSOC_IPM_TRACE
          std::fprintf(stderr, "         cert: gtz/|z|=%.3e htz/|z|=%.3e\n", gtz / znorm,
                       htz / znorm);
#endif
          if (gtz < settings_.infeas_tol * znorm *
                        std::max(1.0, prog.G.lpNorm<Eigen::Infinity>()) &&
              htz < -1e-6 * znorm) {
            sol.status = SolveStatus::PrimalInfeasible;
            sol.x = x;
            sol.s = s;
            sol.z = z / std::abs(htz);
            return sol;
          }
        }
      }

      const double mu = gap / m_deg;
      Scaling sc = Scaling::compute(s, z, cones);

      // Small systems: factor the full symmetric-indefinite KKT matrix
      //   [ P   G' ]
      //   [ G  -W^2 ]
      // with iterative refinement; solving the normal equations instead
      // squares the conditioning and floors the attainable dual accuracy.
      // Large systems (many constraint rows, few variables): fall back to
      // the n x n normal equations P + G' W^-2 G.
      const bool use_augmented = n + m <= 2000;
      Eigen::PartialPivLU<Eigen::MatrixXd> kkt_aug;
      Eigen::MatrixXd K;
      Eigen::LDLT<Eigen::MatrixXd> kkt_ne;
      if (use_augmented) {
        K = Eigen::MatrixXd::Zero(n + m, n + m);
        K.topLeftCorner(n, n) = prog.P;
        K.topRightCorner(n, m) = prog.G.transpose();
        K.bottomLeftCorner(m, n) = prog.G;
        for (long i = 0; i < cones.nonneg; ++i) K(n + i, n + i) = -sc.lp_w(i) * sc.lp_w(i);
        long off = cones.nonneg;
        for (std::size_t i = 0; i < cones.soc.size(); ++i) {
          const long d = cones.soc[i];
          K.block(n + off, n + off, d, d) = -(sc.soc_w[i] * sc.soc_w[i]);
          off += d;
        }
        K.diagonal().head(n).array() += settings_.static_reg;
        K.diagonal().tail(m).array() -= settings_.static_reg;
        kkt_aug.compute(K);
      } else {
        Eigen::MatrixXd M = prog.P;
        M.diagonal().array() += settings_.static_reg;
        if (cones.nonneg > 0) {
          const auto Glp = prog.G.topRows(cones.nonneg);
          Eigen::VectorXd dinv2 =
              z.head(cones.nonneg).cwiseQuotient(s.head(cones.nonneg));
          M.noalias() += Glp.transpose() * dinv2.asDiagonal() * Glp;
        }
        long off = cones.nonneg;
        for (std::size_t i = 0; i < cones.soc.size(); ++i) {
          const long d = cones.soc[i];
          const auto Gb = prog.G.middleRows(off, d);
          Eigen::MatrixXd Winv2 = sc.soc_winv[i] * sc.soc_winv[i];
          M.noalias() += Gb.transpose() * Winv2 * Gb;
          off += d;
        }
        kkt_ne.compute(M);
        if (kkt_ne.info() != Eigen::Success) return finish_with_best(SolveStatus::NumericalError);
      }

      bool solve_failed = false;
      auto kkt_solve = [&](const Eigen::VectorXd& d_comp, Eigen::VectorXd& dx,
                           Eigen::VectorXd& ds, Eigen::VectorXd& dz) {
        // lambda o (W dz + W^-1 ds) = d_comp
        Eigen::VectorXd g = jordan_solve(sc.lambda, d_comp, cones);
        Eigen::VectorXd wg = sc.apply_w(g, cones);
        if (use_augmented) {
          Eigen::VectorXd rhs(n + m);
          rhs.head(n) = -r_dual;
          rhs.tail(m) = -r_prim - wg;
          Eigen::VectorXd sv = kkt_aug.solve(rhs);
          for (int refine = 0; refine < 2; ++refine) sv += kkt_aug.solve(rhs - K * sv);
          if (!sv.allFinite()) solve_failed = true;
          dx = sv.head(n);
          dz = sv.tail(m);
        } else {
          Eigen::VectorXd rhs = -r_dual - prog.G.transpose() *
                                              sc.apply_winv(sc.apply_winv(wg + r_prim, cones), cones);
          dx = kkt_ne.solve(rhs);
          if (!dx.allFinite()) solve_failed = true;
          dz = sc.apply_winv(sc.apply_winv(prog.G * dx + wg + r_prim, cones), cones);
        }
        ds = -r_prim - prog.G * dx;
      };

      // predictor
      Eigen::VectorXd d_aff = -jordan_product(sc.lambda, sc.lambda, cones);
      Eigen::VectorXd dx_a, ds_a, dz_a;
      kkt_solve(d_aff, dx_a, ds_a, dz_a);
      if (solve_failed) return finish_with_best(SolveStatus::NumericalError);
      const double alpha_s = max_step(s, ds_a, cones);
      const double alpha_z = max_step(z, dz_a, cones);
      const double alpha_aff = std::min(alpha_s, alpha_z);
      const double mu_aff =
          (s + alpha_aff * ds_a).dot(z + alpha_aff * dz_a) / m_deg;
      double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
      sigma = std::min(1.0, sigma);

      // corrector
      Eigen::VectorXd wds = sc.apply_winv(ds_a, cones);
      Eigen::VectorXd wdz = sc.apply_w(dz_a, cones);
      Eigen::VectorXd d_comb = d_aff - jordan_product(wds, wdz, cones) +
                               sigma * mu * cone_identity(cones);
      Eigen::VectorXd dx, ds, dz;
      kkt_solve(d_comb, dx, ds, dz);
      if (solve_failed) return finish_with_best(SolveStatus::NumericalError);

      double alpha = settings_.step_fraction *
                     std::min(max_step(s, ds, cones), max_step(z, dz, cones));
      alpha = std::min(alpha, 1.0);
      // safeguard against roundoff in the boundary computation
      for (int guard = 0; guard < 64; ++guard) {
        if (in_cone(s + alpha * ds, cones) && in_cone(z + alpha * dz, cones)) break;
        alpha *= 0.5;
      }
      if (!(alpha > 1e-13)) return finish_with_best(SolveStatus::NumericalError);

#ifdef CCSOC_IPM_TRACE
      std::fprintf(stderr, "         alpha=%.3e sigma=%.3e |dx|=%.3e |ds|=%.3e |dz|=%.3e\n",
                   alpha, sigma, dx.norm(), ds.norm(), dz.norm());
#endif
      x += alpha * dx;
      s += alpha * ds;
      z += alpha * dz;
    }

    return finish_with_best(SolveStatus::MaxIterations);
  }

  IpmSettings settings_;
};

}  // namespace ccsoc
