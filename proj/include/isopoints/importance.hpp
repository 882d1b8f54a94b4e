#pragma once

#include <isopoints/field.hpp>
#include <isopoints/isoextract.hpp>
#include <isopoints/spatial.hpp>

#include <span>
#include <vector>

namespace iso {

enum class SaliencyKind { Curvature, Loss };

struct SaliencyField {
  std::vector<double> values;
  SaliencyKind kind = SaliencyKind::Curvature;
  double high_set_quantile = 0.85;
};

/// ||p - mean of its K nearest iso-points||. With literal_sum the neighbor
/// sum is subtracted instead of the mean.
SaliencyField curvature_metric(const IsoPointSet& iso, const KnnIndex& index, std::size_t K,
                               bool literal_sum = false);

/// Mean residual of the training points within `radius` of each iso-point,
/// 0 where there are none. `training_index` holds the training positions.
SaliencyField loss_metric(const IsoPointSet& iso, const KnnIndex& training_index,
                          std::span<const double> residuals, double radius);

/// Linear-interpolated quantile of the saliency values.
double saliency_threshold(const SaliencyField& saliency);

/// New points (2p + p_i)/3 for every K-neighbor p_i of every iso-point within
/// sigma = sqrt(sigma_p) of a high-saliency point (value strictly above the
/// quantile). Candidates within 1e-6 D of an existing or earlier candidate are
/// dropped. Nothing is projected here.
std::vector<Point3> metric_insert_candidates(const IsoPointSet& iso, const SaliencyField& saliency,
                                             const KnnIndex& index, const SamplerConfig& cfg);

/// The iso set plus the projected candidates that converge to |f| < eps.
IsoPointSet metric_insert(const ImplicitField& field, const IsoPointSet& iso, const SaliencyField& saliency,
                          const KnnIndex& index, const SamplerConfig& cfg, double eps);

}  // namespace iso
