#pragma once

#include <isopoints/field.hpp>
#include <isopoints/spatial.hpp>
#include <isopoints/types.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace iso {

/// Iso-point sampler settings. Entries left unset are derived from the
/// domain diagonal D and the current point count n when used.
struct SamplerConfig {
  double diagonal = 2.0 * std::sqrt(3.0);  // D
  std::optional<double> tau0;              // default D / 20
  double eps_start = 1e-4;
  double eps_end = 1e-5;
  int max_newton_iters = 10;
  int K = 8;
  std::optional<double> sigma_p;           // default D^2 / (2 n)
  std::optional<double> alpha;             // default sqrt(D / n)
  int resample_rounds = 10;
  double resample_stop_frac = 0.01;
  double resample_cv_target = 0.2;         // skip resampling once the NN-distance CV is this low
  double insert_cap_frac = 0.1;
  double edge_lambda = 1.0;
  double normal_sigma_deg = 60.0;          // angular bandwidth of the bilateral normal filter

  void validate() const;
  double tau0_for(std::size_t n) const;
  double sigma_p_for(std::size_t n) const;
  double alpha_for(std::size_t n) const;
};

/// Points on the zero level set with unit normals (normalized Jacobians).
struct IsoPointSet {
  std::vector<Point3> points;
  std::vector<Vec3> normals;
  double residual_bound = 0.0;
  int origin_iteration = 0;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// v / ||v|| * min(||v||, tau0); the zero vector maps to itself.
Vec3 clip(const Vec3& v, double tau0);

struct ProjectionResult {
  std::vector<Point3> points;
  std::vector<Vec3> normals;     // normalized Jacobians at the final positions
  std::vector<double> residuals; // |f| at the final positions
  std::vector<bool> converged;
  int rounds = 0;                // update rounds in which at least one point moved
  double max_step = 0.0;         // longest single update applied

  std::size_t converged_count() const;
  /// The converged points as an IsoPointSet with residual_bound = eps.
  IsoPointSet converged_set(double eps, int origin_iteration = 0) const;
};

/// Clipped Newton projection. Points move only while |f| >= eps; points that
/// meet a singular gradient stop and stay unconverged.
ProjectionResult project(const ImplicitField& field, std::span<const Point3> seeds,
                         const SamplerConfig& cfg, double eps);

/// exp(-d2 / sigma_p)
inline double spatial_weight(double d2, double sigma_p) { return std::exp(-d2 / sigma_p); }

/// One Jacobi repulsion step q <- q - tau(alpha * r), r the w-weighted mean of
/// the unit directions to the K nearest points in `index` (which must hold
/// `points`). Coincident neighbors are skipped.
std::vector<Point3> resample_step(std::span<const Point3> points, const KnnIndex& index,
                                  const SamplerConfig& cfg);

struct ResampleStats {
  int rounds = 0;
  double last_max_displacement = 0.0;
};

/// Repulsion rounds, each followed by projection. Unconverged points are dropped.
IsoPointSet resample(const ImplicitField& field, const IsoPointSet& iso, const SamplerConfig& cfg,
                     double eps, ResampleStats* stats = nullptr);

/// One bilateral pass over the K nearest neighbors of every point.
std::vector<Vec3> bilateral_normal_filter(std::span<const Point3> points, std::span<const Vec3> normals,
                                          const KnnIndex& index, const SamplerConfig& cfg);

/// Attraction/repulsion push; each term is clipped separately to tau0.
std::vector<Point3> ear_push_step(std::span<const Point3> points, std::span<const Vec3> normals,
                                  const KnnIndex& index, const SamplerConfig& cfg);

/// B(p, p_i) = ||p - p_i|| * (1 + edge_lambda * (1 - n_p . n_i))
double insertion_distance(const Point3& p, const Vec3& np, const Point3& q, const Vec3& nq,
                          double edge_lambda);

/// Priority-driven insertion at (p*_i + 2 p*) / 3, at most
/// max(1, floor(n * insert_cap_frac)) per step, until exactly target_count.
OrientedPoints insert_points(std::span<const Point3> points, std::span<const Vec3> normals,
                             const KnnIndex& index, std::size_t target_count, const SamplerConfig& cfg,
                             int* steps = nullptr);

struct UpsampleStats {
  int insert_steps = 0;
  int relax_rounds = 0;
};

/// Normal filter, one push step, insertion up to target_count, projection,
/// then repulsion rounds on the grown set. Points lost on the way are refilled.

IsoPointSet upsample(const ImplicitField& field, const IsoPointSet& iso, std::size_t target_count,
                     const SamplerConfig& cfg, double eps, UpsampleStats* stats = nullptr);

struct ExtractionStats {
  std::size_t seeds = 0;
  std::size_t converged_after_projection = 0;
  int projection_rounds = 0;
  int resample_rounds = 0;
  int insert_steps = 0;
  int relax_rounds = 0;
};

/// Projection -> uniform resampling -> upsampling -> projection. Seeds are
/// `prev` when given, otherwise n_target uniform samples of the domain.
IsoPointSet extract_iso_points(const ImplicitField& field, std::optional<std::span<const Point3>> prev,
                               std::size_t n_target, const SamplerConfig& cfg, std::uint64_t seed,
                               std::optional<double> eps = std::nullopt, ExtractionStats* stats = nullptr);

}  // namespace iso
