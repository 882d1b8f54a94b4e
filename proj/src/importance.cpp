#include <isopoints/importance.hpp>

#include <algorithm>

namespace iso {

SaliencyField curvature_metric(const IsoPointSet& iso, const KnnIndex& index, std::size_t K, bool literal_sum) {
  if (K < 3) throw PreconditionError("curvature_metric needs K >= 3");
  if (index.size() != iso.size()) throw PreconditionError("index does not match the iso set");
  const std::size_t k = std::min(K, iso.size() - 1);
  SaliencyField out;
  out.kind = SaliencyKind::Curvature;
  out.values.resize(iso.size());
  for (std::size_t i = 0; i < iso.size(); ++i) {
    Vec3 acc = Vec3::Zero();
    const auto nbrs = index.neighbors_of(i, k);
    for (const auto& nb : nbrs) acc += index.point(nb.id);
    if (!literal_sum) acc /= static_cast<double>(nbrs.size());
    out.values[i] = (iso.points[i] - acc).norm();
  }
  return out;
}

SaliencyField loss_metric(const IsoPointSet& iso, const KnnIndex& training_index, std::span<const double> residuals,
                          double radius) {
  if (!(radius > 0.0)) throw PreconditionError("loss_metric radius must be positive");
  if (residuals.size() != training_index.size()) throw PreconditionError("one residual per training point");
  SaliencyField out;
  out.kind = SaliencyKind::Loss;
  out.values.resize(iso.size(), 0.0);
  for (std::size_t i = 0; i < iso.size(); ++i) {
    const auto hits = training_index.radius_search(iso.points[i], radius);
    if (hits.empty()) continue;
    double sum = 0.0;
    for (const auto& h : hits) sum += residuals[h.id];
    out.values[i] = sum / static_cast<double>(hits.size());
  }
  return out;
}

double saliency_threshold(const SaliencyField& saliency) {
  if (saliency.values.empty()) return 0.0;
  std::vector<double> v = saliency.values;
  std::sort(v.begin(), v.end());
  const double pos = saliency.high_set_quantile * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return v[lo] + t * (v[hi] - v[lo]);
}

std::vector<Point3> metric_insert_candidates(const IsoPointSet& iso, const SaliencyField& saliency,
                                             const KnnIndex& index, const SamplerConfig& cfg) {
  if (saliency.values.size() != iso.size()) throw PreconditionError("saliency does not match the iso set");
  if (index.size() != iso.size()) throw PreconditionError("index does not match the iso set");
  if (iso.size() < 2) return {};

  const double threshold = saliency_threshold(saliency);
  std::vector<Point3> marked;
  for (std::size_t i = 0; i < iso.size(); ++i)
    if (saliency.values[i] > threshold) marked.push_back(iso.points[i]);
  if (marked.empty()) return {};

  const KnnIndex marked_index(marked);
  const double sigma = std::sqrt(cfg.sigma_p_for(iso.size()));
  const double min_gap = 1e-6 * cfg.diagonal;
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.K), iso.size() - 1);

  std::vector<Point3> raw;
  for (std::size_t i = 0; i < iso.size(); ++i) {
    if (marked_index.knn(iso.points[i], 1).front().distance > sigma) continue;
    for (const auto& nb : index.neighbors_of(i, k)) raw.push_back((2.0 * iso.points[i] + index.point(nb.id)) / 3.0);
  }
  if (raw.empty()) return {};

  // First occurrence wins among near-duplicates.
  const KnnIndex raw_index(raw);
  std::vector<bool> keep(raw.size(), true);
  for (std::size_t c = 0; c < raw.size(); ++c) {
    if (!keep[c]) continue;
    if (index.knn(raw[c], 1).front().distance < min_gap) {
      keep[c] = false;
      continue;
    }
    for (const auto& h : raw_index.radius_search(raw[c], min_gap))
      if (h.id > c && h.distance < min_gap) keep[h.id] = false;
  }
  std::vector<Point3> out;
  for (std::size_t c = 0; c < raw.size(); ++c)
    if (keep[c]) out.push_back(raw[c]);
  return out;
}

IsoPointSet metric_insert(const ImplicitField& field, const IsoPointSet& iso, const SaliencyField& saliency,
                          const KnnIndex& index, const SamplerConfig& cfg, double eps) {
  IsoPointSet out = iso;
  const auto candidates = metric_insert_candidates(iso, saliency, index, cfg);
  if (candidates.empty()) return out;
  const ProjectionResult proj = project(field, candidates, cfg, eps);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!proj.converged[i]) continue;
    out.points.push_back(proj.points[i]);
    out.normals.push_back(proj.normals[i]);
  }
  out.residual_bound = std::max(iso.residual_bound, eps);
  return out;
}

}  // namespace iso
