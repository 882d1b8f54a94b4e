#pragma once

#include <isopoints/field.hpp>
#include <isopoints/types.hpp>

#include <cstdint>
#include <span>

namespace iso {

enum class ChamferNorm { Squared, L1 };

struct ChamferResult {
  double pos = 0.0;
  double normal = 0.0;
};

/// Two-way chamfer: pos = 1/2 [mean_a min_b d + mean_b min_a d] with d the
/// squared (or plain, for L1) distance; normal = same average of 1 - cos over
/// the matched nearest pairs. Throws MissingNormals if with_normals is set and
/// either side lacks normals.
ChamferResult chamfer(const OrientedPoints& a, const OrientedPoints& b, bool with_normals = true,
                      ChamferNorm norm = ChamferNorm::Squared);

/// Mean |1 - ||J||| over seeded uniform samples of the field's domain.
double eikonal_residual(const ImplicitField& field, std::size_t n_samples, std::uint64_t seed);

struct Uniformity {
  double nn_mean = 0.0;
  double nn_cv = 0.0;
};

/// Mean and coefficient of variation of nearest-neighbor distances.
Uniformity uniformity(std::span<const Point3> points);

struct MetricsReport {
  double chamfer_pos = 0.0;
  double chamfer_normal = 0.0;
  double eikonal_residual = 0.0;
  double residual_max = 0.0;
  double nn_mean = 0.0;
  double nn_cv = 0.0;
  std::size_t sample_count = 0;
};

/// Area-uniform samples of an analytic surface with outward normals:
/// sphere by normalized Gaussians, torus by rejection on the angle Jacobian,
/// box by area-weighted faces.
OrientedPoints sample_surface(const AnalyticField& shape, std::size_t n, std::uint64_t seed);

}  // namespace iso
