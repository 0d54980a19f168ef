#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ccsoc/dynamics.hpp"
#include "ccsoc/errors.hpp"
#include "ccsoc/rng.hpp"

namespace ccsoc {

/// Sample mean and standard deviation with divisor N_s (no Bessel
/// correction, matching the tail-bound convention). Throws on degenerate
/// (all-equal) input.
inline std::pair<double, double> sample_mean_std_scalar(const std::vector<double>& values) {
  const long n = static_cast<long>(values.size());
  if (n < 2) throw DimensionError("sample statistics require N_s >= 2");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  if (var == 0.0) throw DegenerateSampleError("all samples are equal");
  return {mean, std::sqrt(var)};
}

/// N_s concatenated disturbance samples for one vehicle, one sample per row,
/// each of dimension N*n. The sole source of stochastic information.
struct DisturbanceSampleSet {
  int vehicle_id = 0;
  Eigen::MatrixXd samples;  // N_s x (N*n)
  std::string provenance;
  std::uint64_t seed = 0;

  long count() const { return samples.rows(); }
  long dim() const { return samples.cols(); }

  void validate() const {
    if (samples.rows() < 2)
      throw DimensionError("disturbance sample set requires N_s >= 2");
    bool all_equal = true;
    for (long i = 1; i < samples.rows() && all_equal; ++i)
      all_equal = samples.row(i) == samples.row(0);
    if (all_equal)
      throw DegenerateSampleError("disturbance samples are all identical");
  }
};

/// Sample mean and variance-covariance of the concatenated disturbance.
struct MomentCache {
  Eigen::VectorXd w_mean;  // N*n
  Eigen::MatrixXd w_cov;   // N*n x N*n, divisor N_s

  static MomentCache from(const DisturbanceSampleSet& set) {
    set.validate();
    const double ns = static_cast<double>(set.count());
    MomentCache cache;
    cache.w_mean = set.samples.colwise().mean();
    Eigen::MatrixXd centered = set.samples.rowwise() - cache.w_mean.transpose();
    cache.w_cov = centered.transpose() * centered / ns;
    return cache;
  }
};

namespace detail {

/// Symmetric PSD square root by eigendecomposition; eigenvalues in
/// [-tol*scale, 0) are clamped to zero, anything more negative is a hard
/// error (genuine non-PSD input, not roundoff).
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& M, double rel_tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
  const double scale = std::max(1e-300, eig.eigenvalues().cwiseAbs().maxCoeff());
  Eigen::VectorXd vals = eig.eigenvalues();
  for (long i = 0; i < vals.size(); ++i) {
    if (vals(i) < -rel_tol * scale)
      throw Error("matrix is not positive semidefinite beyond numerical tolerance");
    if (vals(i) < 0.0) vals(i) = 0.0;
  }
  return eig.eigenvectors() * vals.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace detail

/// Sample moments of the stochastic part z of a 2-norm constraint, together
/// with the two (q+1)x(q+1) matrices whose quadratic forms give the sample
/// mean and variance of ||zbar + z||^2 for any deterministic zbar, and their
/// symmetric square roots.
struct QuadraticFormMoments {
  Eigen::VectorXd z_mean;     // q
  Eigen::MatrixXd z_cov;      // q x q
  double zz_mean = 0.0;       // mean of z'z
  double zz_var = 0.0;        // variance of z'z
  Eigen::VectorXd z_zz_cov;   // covariance of z with z'z, q
  Eigen::MatrixXd M_mean;     // [[I, z_mean],[z_mean', zz_mean]]
  Eigen::MatrixXd M_std;      // [[4 z_cov, 2 c],[2 c', zz_var]]
  Eigen::MatrixXd R_mean;     // symmetric sqrt of M_mean
  Eigen::MatrixXd R_std;      // symmetric sqrt of M_std

  int q() const { return static_cast<int>(z_mean.size()); }

  /// Build from per-sample realizations of z, one per row (N_s x q).
  static QuadraticFormMoments from_samples(const Eigen::MatrixXd& z) {
    if (z.rows() < 2) throw DimensionError("quadratic-form moments require N_s >= 2");
    const double ns = static_cast<double>(z.rows());
    const long q = z.cols();

    QuadraticFormMoments m;
    m.z_mean = z.colwise().mean();
    Eigen::MatrixXd centered = z.rowwise() - m.z_mean.transpose();
    m.z_cov = centered.transpose() * centered / ns;

    Eigen::VectorXd zz = z.rowwise().squaredNorm();
    m.zz_mean = zz.mean();
    Eigen::VectorXd zz_centered = zz.array() - m.zz_mean;
    m.zz_var = zz_centered.squaredNorm() / ns;
    m.z_zz_cov = centered.transpose() * zz_centered / ns;

    if (m.zz_var <= 1e-20 * std::max(1.0, m.zz_mean * m.zz_mean))
      throw DegenerateSampleError("z'z is constant across samples");

    m.assemble();
    return m;
  }

  /// Build from known moments (analytic baseline path).
  static QuadraticFormMoments from_moments(Eigen::VectorXd z_mean, Eigen::MatrixXd z_cov,
                                           double zz_mean, double zz_var,
                                           Eigen::VectorXd z_zz_cov) {
    QuadraticFormMoments m;
    m.z_mean = std::move(z_mean);
    m.z_cov = std::move(z_cov);
    m.zz_mean = zz_mean;
    m.zz_var = zz_var;
    m.z_zz_cov = std::move(z_zz_cov);
    if (m.zz_var <= 0.0) throw DegenerateSampleError("z'z has zero variance");
    m.assemble();
    return m;
  }

  double mean_quadratic(const Eigen::VectorXd& zbar) const {
    Eigen::VectorXd v(zbar.size() + 1);
    v << zbar, 1.0;
    return (R_mean * v).squaredNorm();
  }

  double std_quadratic(const Eigen::VectorXd& zbar) const {
    Eigen::VectorXd v(zbar.size() + 1);
    v << zbar, 1.0;
    return (R_std * v).norm();
  }

 private:
  void assemble() {
    const long q = z_mean.size();
    M_mean.resize(q + 1, q + 1);
    M_mean.topLeftCorner(q, q) = Eigen::MatrixXd::Identity(q, q);
    M_mean.topRightCorner(q, 1) = z_mean;
    M_mean.bottomLeftCorner(1, q) = z_mean.transpose();
    M_mean(q, q) = zz_mean;

    M_std.resize(q + 1, q + 1);
    M_std.topLeftCorner(q, q) = 4.0 * z_cov;
    M_std.topRightCorner(q, 1) = 2.0 * z_zz_cov;
    M_std.bottomLeftCorner(1, q) = 2.0 * z_zz_cov.transpose();
    M_std(q, q) = zz_var;

    R_mean = detail::psd_sqrt(M_mean);
    R_std = detail::psd_sqrt(M_std);
  }
};

/// Affine sample mean and constant sample standard deviation of a half-space
/// functional G x(k): the mean is linear in U, the std does not depend on U.
struct HalfspaceMoments {
  Eigen::RowVectorXd mean_u_coeff;  // coefficient of U in the mean
  double mean_const = 0.0;          // G (A^k x0 + D(k) w_mean)
  double std_dev = 0.0;
};

inline HalfspaceMoments halfspace_moments(const MomentCache& cache,
                                          const ConcatenatedDynamics& dyn,
                                          const Eigen::RowVectorXd& g_row, int k,
                                          const Eigen::VectorXd& x0) {
  if (g_row.size() != dyn.n) throw DimensionError("half-space row dimension mismatch");
  if (k < 1 || k > dyn.horizon) throw DimensionError("time step outside horizon");

  HalfspaceMoments hm;
  hm.mean_u_coeff = g_row * dyn.C(k);
  hm.mean_const = g_row * (dyn.A_pow(k) * x0 + dyn.D(k) * cache.w_mean);
  Eigen::RowVectorXd gd = g_row * dyn.D(k);
  const double quad = gd * cache.w_cov * gd.transpose();
  if (quad < -1e-12 * std::max(1.0, cache.w_cov.norm()))
    throw Error("sample covariance quadratic form is negative");
  hm.std_dev = std::sqrt(std::max(0.0, quad));
  return hm;
}

/// Per-sample realizations of the stochastic part of a 2-norm constraint:
/// z^[j] = S D(k) W_i^[j] for obstacle constraints, and
/// z^[j] = S D(k) (W_i^[j] - W_j^[j]) for pairwise constraints (samples
/// paired by index; both sets must have equal N_s).
inline QuadraticFormMoments quadratic_form_moments(const DisturbanceSampleSet& samples_i,
                                                   const DisturbanceSampleSet* samples_j,
                                                   const ConcatenatedDynamics& dyn,
                                                   const Eigen::MatrixXd& S, int k) {
  if (S.cols() != dyn.n) throw DimensionError("extraction matrix column count mismatch");
  Eigen::MatrixXd diff = samples_i.samples;
  if (samples_j) {
    if (samples_j->count() != samples_i.count())
      throw DimensionError("paired sample sets must have equal N_s");
    diff -= samples_j->samples;
  }
  // z rows: (S D(k) W^[j])' = W^[j]' D(k)' S'
  Eigen::MatrixXd z = diff * (S * dyn.D(k)).transpose();
  return QuadraticFormMoments::from_samples(z);
}

// ---------------------------------------------------------------------------
// CSV ingestion / emission. One file per vehicle; header columns are
// w_t{k}_d{dim} for k in 0..N-1 and dim in 1..n; one sample per row.
// ---------------------------------------------------------------------------

inline std::string sample_csv_header(int horizon, int n) {
  std::string header;
  for (int k = 0; k < horizon; ++k)
    for (int d = 1; d <= n; ++d) {
      if (!header.empty()) header += ',';
      header += "w_t" + std::to_string(k) + "_d" + std::to_string(d);
    }
  return header;
}

inline DisturbanceSampleSet ingest_csv(const std::string& path, int horizon, int n,
                                       int vehicle_id = 0) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open sample file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty sample file: " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != sample_csv_header(horizon, n))
    throw ParseError("unexpected sample header in " + path + "; expected \"" +
                     sample_csv_header(horizon, n) + "\"");

  const long dim = static_cast<long>(horizon) * n;
  std::vector<Eigen::VectorXd> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Eigen::VectorXd row(dim);
    std::stringstream ss(line);
    std::string field;
    long col = 0;
    while (std::getline(ss, field, ',')) {
      if (col >= dim)
        throw DimensionError("too many columns at line " + std::to_string(line_no) + " of " + path);
      try {
        std::size_t used = 0;
        row(col) = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError("bad numeric field \"" + field + "\" at line " +
                         std::to_string(line_no) + " of " + path);
      }
      ++col;
    }
    if (col != dim)
      throw DimensionError("expected " + std::to_string(dim) + " columns, got " +
                           std::to_string(col) + " at line " + std::to_string(line_no) +
                           " of " + path);
    rows.push_back(std::move(row));
  }

  if (rows.size() < 2) throw DimensionError("sample file must contain N_s >= 2 rows: " + path);

  DisturbanceSampleSet set;
  set.vehicle_id = vehicle_id;
  set.samples.resize(static_cast<long>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) set.samples.row(static_cast<long>(i)) = rows[i];
  set.provenance = "csv:" + path;
  set.validate();
  return set;
}

inline void write_csv(const DisturbanceSampleSet& set, int horizon, int n,
                      const std::string& path) {
  if (set.dim() != static_cast<long>(horizon) * n)
    throw DimensionError("sample dimension does not match horizon * n");
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write sample file: " + path);
  out << sample_csv_header(horizon, n) << '\n';
  out.precision(17);
  for (long i = 0; i < set.count(); ++i) {
    for (long j = 0; j < set.dim(); ++j) {
      if (j) out << ',';
      out << set.samples(i, j);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic disturbance generators.
// ---------------------------------------------------------------------------

enum class DisturbanceKind { Gaussian, Mixture, Skewed, Uniform };

/// Parameters of a synthetic per-step disturbance; the same marginal is used
/// at every time step, independently across steps and vehicles.
struct GeneratorSpec {
  DisturbanceKind kind = DisturbanceKind::Gaussian;
  Eigen::VectorXd scale;          // per-dimension scale (std for gaussian, half-width
                                  // for uniform, rate-normalized scale otherwise)
  double mixture_weight = 0.5;    // weight of the offset component
  Eigen::VectorXd mixture_offset; // mean offset of the second component (units of scale)
};

/// Draw one N*n concatenated disturbance vector.
inline Eigen::VectorXd draw_disturbance(const GeneratorSpec& spec, int horizon, Rng& rng) {
  const long n = spec.scale.size();
  Eigen::VectorXd w(horizon * n);
  for (int k = 0; k < horizon; ++k) {
    for (long d = 0; d < n; ++d) {
      double v = 0.0;
      switch (spec.kind) {
        case DisturbanceKind::Gaussian:
          v = rng.normal();
          break;
        case DisturbanceKind::Uniform:
          v = rng.uniform(-1.0, 1.0);
          break;
        case DisturbanceKind::Skewed:
          // zero-mean shifted exponential, skewness 2
          v = rng.exponential() - 1.0;
          break;
        case DisturbanceKind::Mixture: {
          const double offset =
              spec.mixture_offset.size() > d ? spec.mixture_offset(d) : 0.0;
          if (rng.uniform01() < spec.mixture_weight)
            v = offset + 0.5 * rng.normal();
          else
            v = rng.normal() - spec.mixture_weight / (1.0 - spec.mixture_weight) * offset;
          break;
        }
      }
      w(k * n + d) = v * spec.scale(d);
    }
  }
  return w;
}

inline DisturbanceSampleSet synth_disturbances(const GeneratorSpec& spec, int horizon,
                                               long n_samples, std::uint64_t seed,
                                               int vehicle_id = 0) {
  if (n_samples < 2) throw DimensionError("N_s must be >= 2");
  if (spec.scale.size() < 1) throw DimensionError("generator needs at least one dimension");
  if (!(spec.mixture_weight > 0.0 && spec.mixture_weight < 1.0) &&
      spec.kind == DisturbanceKind::Mixture)
    throw DimensionError("mixture weight must lie in (0,1)");

  const long n = spec.scale.size();
  DisturbanceSampleSet set;
  set.vehicle_id = vehicle_id;
  set.seed = seed;
  set.provenance = "synthetic";
  set.samples.resize(n_samples, horizon * n);
  // per-sample derived streams keep the set independent of draw order
  for (long j = 0; j < n_samples; ++j) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(vehicle_id) << 32 |
                                  static_cast<std::uint64_t>(j)));
    set.samples.row(j) = draw_disturbance(spec, horizon, rng).transpose();
  }
  set.validate();
  return set;
}

}  // namespace ccsoc
