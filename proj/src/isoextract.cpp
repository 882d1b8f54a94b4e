#include <isopoints/isoextract.hpp>

#include <algorithm>
#include <numeric>
#include <random>

namespace iso {

namespace {

constexpr double kSingularNorm = 1e-12;

std::size_t neighbor_count(const SamplerConfig& cfg, std::size_t n) {
  return std::min<std::size_t>(static_cast<std::size_t>(cfg.K), n - 1);
}

// Coefficient of variation of 1-NN distances.
double nn_cv(const KnnIndex& index) {
  const std::size_t n = index.size();
  if (n < 2) return 0.0;
  std::vector<double> d(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = index.neighbors_of(i, 1).front().distance;
    mean += d[i];
  }
  mean /= static_cast<double>(n);
  if (mean == 0.0) return 0.0;
  double var = 0.0;
  for (double x : d) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(n)) / mean;
}

// Exact duplicates cannot be separated by repulsion; the first copy is kept.
IsoPointSet drop_duplicates(IsoPointSet iso) {
  if (iso.size() < 2) return iso;
  const KnnIndex index(iso.points);
  IsoPointSet out;
  out.residual_bound = iso.residual_bound;
  out.origin_iteration = iso.origin_iteration;
  for (std::size_t i = 0; i < iso.size(); ++i) {
    bool dup = false;
    for (const auto& h : index.radius_search(iso.points[i], 0.0))
      if (h.id < i) dup = true;
    if (dup) continue;
    out.points.push_back(iso.points[i]);
    out.normals.push_back(iso.normals[i]);
  }
  return out;
}

}  // namespace

void SamplerConfig::validate() const {
  auto positive = [](double x) { return x > 0.0; };
  if (!positive(diagonal) || !positive(eps_start) || !positive(eps_end) || max_newton_iters < 1 || K < 1 ||
      resample_rounds < 0 || !positive(resample_stop_frac) || !positive(edge_lambda) ||
      !(resample_cv_target >= 0.0) || !positive(normal_sigma_deg))
    throw PreconditionError("sampler settings must be positive");
  if (tau0 && !positive(*tau0)) throw PreconditionError("tau0 must be positive");
  if (sigma_p && !positive(*sigma_p)) throw PreconditionError("sigma_p must be positive");
  if (alpha && !positive(*alpha)) throw PreconditionError("alpha must be positive");
  if (eps_end > eps_start) throw PreconditionError("eps_end must not exceed eps_start");
  if (!(insert_cap_frac > 0.0 && insert_cap_frac <= 1.0))
    throw PreconditionError("insert_cap_frac must lie in (0, 1]");
}

double SamplerConfig::tau0_for(std::size_t) const { return tau0.value_or(diagonal / 20.0); }

double SamplerConfig::sigma_p_for(std::size_t n) const {
  return sigma_p.value_or(diagonal * diagonal / (2.0 * static_cast<double>(std::max<std::size_t>(n, 1))));
}

double SamplerConfig::alpha_for(std::size_t n) const {
  return alpha.value_or(std::sqrt(diagonal / static_cast<double>(std::max<std::size_t>(n, 1))));
}

Vec3 clip(const Vec3& v, double tau0) {
  const double len = v.norm();
  if (len == 0.0 || len <= tau0) return v;
  return v * (tau0 / len);
}

std::size_t ProjectionResult::converged_count() const {
  return static_cast<std::size_t>(std::count(converged.begin(), converged.end(), true));
}

IsoPointSet ProjectionResult::converged_set(double eps, int origin_iteration) const {
  IsoPointSet out;
  out.residual_bound = eps;
  out.origin_iteration = origin_iteration;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!converged[i]) continue;
    out.points.push_back(points[i]);
    out.normals.push_back(normals[i]);
  }
  return out;
}

ProjectionResult project(const ImplicitField& field, std::span<const Point3> seeds, const SamplerConfig& cfg,
                         double eps) {
  if (seeds.empty()) throw PreconditionError("project needs at least one seed");
  if (!(eps > 0.0)) throw PreconditionError("eps must be positive");
  const std::size_t n = seeds.size();
  const double tau0 = cfg.tau0_for(n);

  ProjectionResult res;
  res.points.assign(seeds.begin(), seeds.end());
  res.converged.assign(n, false);
  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), 0);

  std::vector<Point3> batch;
  std::vector<double> values;
  std::vector<RowJacobian> jac;
  auto evaluate_active = [&] {
    batch.resize(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) batch[a] = res.points[active[a]];
    values.resize(active.size());
    jac.resize(active.size());
    field.evaluate(batch, values, jac);
  };

  for (int round = 0; round < cfg.max_newton_iters && !active.empty(); ++round) {
    evaluate_active();
    std::vector<std::size_t> still;
    bool moved = false;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const std::size_t i = active[a];
      if (std::abs(values[a]) < eps) {
        res.converged[i] = true;
        continue;
      }
      const double jn2 = jac[a].squaredNorm();
      if (std::sqrt(jn2) < kSingularNorm) continue;  // dead seed, stays unconverged
      const Vec3 step = clip(jac[a] * (values[a] / jn2), tau0);
      res.points[i] -= step;
      res.max_step = std::max(res.max_step, step.norm());
      moved = true;
      still.push_back(i);
    }
    if (moved) ++res.rounds;
    active = std::move(still);
  }

  // Final state of every point.
  values.resize(n);
  jac.resize(n);
  field.evaluate(res.points, values, jac);
  res.normals.resize(n);
  res.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    res.residuals[i] = std::abs(values[i]);
    const double jn = jac[i].norm();
    res.normals[i] = jn < kSingularNorm ? Vec3::Zero() : Vec3(jac[i] / jn);
    res.converged[i] = res.residuals[i] < eps && jn >= kSingularNorm && is_finite(res.points[i]);
  }
  return res;
}

std::vector<Point3> resample_step(std::span<const Point3> points, const KnnIndex& index,
                                  const SamplerConfig& cfg) {
  const std::size_t n = points.size();
  if (n != index.size()) throw PreconditionError("index does not match the point set");
  if (n < 2) throw InsufficientPoints("resample_step needs at least two points");
  const std::size_t k = neighbor_count(cfg, n);
  const double sigma_p = cfg.sigma_p_for(n);
  const double alpha = cfg.alpha_for(n);
  const double tau0 = cfg.tau0_for(n);

  std::vector<Point3> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 r = Vec3::Zero();
    double wsum = 0.0;
    for (const auto& nb : index.neighbors_of(i, k)) {
      if (nb.distance == 0.0) continue;
      const Vec3 d = points[nb.id] - points[i];
      const double w = spatial_weight(nb.distance * nb.distance, sigma_p);
      r += w * (d / nb.distance);
      wsum += w;
    }
    if (wsum > 0.0) r /= wsum;
    out[i] = points[i] - clip(alpha * r, tau0);
  }
  return out;
}

IsoPointSet resample(const ImplicitField& field, const IsoPointSet& iso, const SamplerConfig& cfg, double eps,
                     ResampleStats* stats) {
  if (iso.size() < 2) throw InsufficientPoints("resample needs at least two iso-points");
  std::vector<Point3> pts = iso.points;
  ResampleStats local;
  const double threshold = cfg.resample_stop_frac * cfg.alpha_for(pts.size());
  for (int round = 0; round < cfg.resample_rounds; ++round) {
    const KnnIndex index(pts);
    if (nn_cv(index) <= cfg.resample_cv_target) break;
    std::vector<Point3> next = resample_step(pts, index, cfg);
    double max_disp = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) max_disp = std::max(max_disp, (next[i] - pts[i]).norm());
    local.last_max_displacement = max_disp;
    if (max_disp < threshold) break;
    pts = project(field, next, cfg, eps).points;
    ++local.rounds;
  }
  if (stats) *stats = local;
  const ProjectionResult proj = project(field, pts, cfg, eps);
  return drop_duplicates(proj.converged_set(eps, iso.origin_iteration));
}

std::vector<Vec3> bilateral_normal_filter(std::span<const Point3> points, std::span<const Vec3> normals,
                                          const KnnIndex& index, const SamplerConfig& cfg) {
  const std::size_t n = points.size();
  if (normals.size() != n || index.size() != n) throw PreconditionError("points, normals and index disagree");
  if (n < 2) return std::vector<Vec3>(normals.begin(), normals.end());
  const std::size_t k = neighbor_count(cfg, n);
  const double sigma_p = cfg.sigma_p_for(n);
  const double angular = 1.0 - std::cos(cfg.normal_sigma_deg * M_PI / 180.0);

  std::vector<Vec3> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 acc = Vec3::Zero();
    for (const auto& nb : index.neighbors_of(i, k)) {
      const double t = (1.0 - normals[i].dot(normals[nb.id])) / angular;
      acc += spatial_weight(nb.distance * nb.distance, sigma_p) * std::exp(-t * t) * normals[nb.id];
    }
    const double len = acc.norm();
    out[i] = len > 0.0 ? Vec3(acc / len) : normals[i];
  }
  return out;
}

std::vector<Point3> ear_push_step(std::span<const Point3> points, std::span<const Vec3> normals,
                                  const KnnIndex& index, const SamplerConfig& cfg) {
  const std::size_t n = points.size();
  if (normals.size() != n || index.size() != n) throw PreconditionError("points, normals and index disagree");
  if (n < 2) return std::vector<Point3>(points.begin(), points.end());
  const std::size_t k = neighbor_count(cfg, n);
  const double sigma_p = cfg.sigma_p_for(n);
  const double tau0 = cfg.tau0_for(n);

  std::vector<Point3> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point3& p = points[i];
    Vec3 attr = Vec3::Zero();
    Vec3 rep = Vec3::Zero();
    double attr_w = 0.0;
    double rep_w = 0.0;
    for (const auto& nb : index.neighbors_of(i, k)) {
      const Vec3 d = p - points[nb.id];
      const double along = normals[nb.id].dot(d);
      const double phi = std::exp(-along * along / sigma_p);
      const double w = spatial_weight(nb.distance * nb.distance, sigma_p);
      attr += phi * d;
      attr_w += phi;
      rep -= w * d;
      rep_w += w;
    }
    attr = attr_w > 0.0 ? Vec3(attr / attr_w) : Vec3::Zero();
    rep = rep_w > 0.0 ? Vec3(0.5 * rep / rep_w) : Vec3::Zero();
    out[i] = p - clip(rep, tau0) - clip(attr, tau0);
  }
  return out;
}

double insertion_distance(const Point3& p, const Vec3& np, const Point3& q, const Vec3& nq,
                          double edge_lambda) {
  return (p - q).norm() * (1.0 + edge_lambda * (1.0 - np.dot(nq)));
}

OrientedPoints insert_points(std::span<const Point3> points, std::span<const Vec3> normals,
                             const KnnIndex& index, std::size_t target_count, const SamplerConfig& cfg,
                             int* steps) {
  if (normals.size() != points.size() || index.size() != points.size())
    throw PreconditionError("points, normals and index disagree");
  if (target_count < points.size()) throw PreconditionError("target_count below current count");
  OrientedPoints cur{std::vector<Point3>(points.begin(), points.end()),
                     std::vector<Vec3>(normals.begin(), normals.end())};
  if (steps) *steps = 0;
  if (cur.points.size() == target_count) return cur;
  if (cur.points.size() < 2) throw InsufficientPoints("insertion needs at least two points");

  std::optional<KnnIndex> rebuilt;
  while (cur.points.size() < target_count) {
    const KnnIndex& idx = rebuilt ? *rebuilt : index;
    const std::size_t n = cur.points.size();
    const std::size_t k = neighbor_count(cfg, n);

    std::vector<double> priority(n);
    std::vector<std::size_t> partner(n);
    for (std::size_t i = 0; i < n; ++i) {
      double best = -1.0;
      for (const auto& nb : idx.neighbors_of(i, k)) {
        const double b = insertion_distance(cur.points[i], cur.normals[i], cur.points[nb.id], cur.normals[nb.id],
                                            cfg.edge_lambda);
        if (b > best) {
          best = b;
          partner[i] = nb.id;
        }
      }
      priority[i] = best;
    }

    const auto cap = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(n * cfg.insert_cap_frac)));
    const std::size_t count = std::min(cap, target_count - n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return priority[a] > priority[b]; });
    for (std::size_t s = 0; s < count; ++s) {
      const std::size_t i = order[s];
      const std::size_t j = partner[i];
      cur.points.push_back((cur.points[j] + 2.0 * cur.points[i]) / 3.0);
      Vec3 nrm = cur.normals[j] + 2.0 * cur.normals[i];
      cur.normals.push_back(nrm.norm() > 0.0 ? Vec3(nrm.normalized()) : cur.normals[i]);
    }
    if (steps) ++*steps;
    if (cur.points.size() < target_count) rebuilt.emplace(cur.points);
  }
  return cur;
}

IsoPointSet upsample(const ImplicitField& field, const IsoPointSet& iso, std::size_t target_count,
                     const SamplerConfig& cfg, double eps, UpsampleStats* stats) {
  if (target_count < iso.size()) throw PreconditionError("upsample target below current count");
  if (iso.size() < 2) throw InsufficientPoints("upsample needs at least two iso-points");

  const KnnIndex index(iso.points);
  std::vector<Vec3> normals = bilateral_normal_filter(iso.points, iso.normals, index, cfg);
  std::vector<Point3> points = ear_push_step(iso.points, normals, index, cfg);

  UpsampleStats local;
  IsoPointSet out;
  // Points lost in the final projection are refilled by another insertion pass.
  for (int attempt = 0; attempt < 4; ++attempt) {
    int steps = 0;
    OrientedPoints grown = insert_points(points, normals, KnnIndex(points), target_count, cfg, &steps);
    local.insert_steps += steps;
    const ProjectionResult proj = project(field, grown.points, cfg, eps);
    out = proj.converged_set(eps, iso.origin_iteration);
    if (out.size() < 2) break;
    // Insertion at one third of a gap leaves clumps; relax them.
    ResampleStats rs;
    out = resample(field, out, cfg, eps, &rs);
    local.relax_rounds += rs.rounds;
    if (out.size() == target_count || out.size() < 2) break;
    points = out.points;
    normals = out.normals;
  }
  if (stats) *stats = local;
  return out;
}

IsoPointSet extract_iso_points(const ImplicitField& field, std::optional<std::span<const Point3>> prev,
                               std::size_t n_target, const SamplerConfig& cfg, std::uint64_t seed,
                               std::optional<double> eps_override, ExtractionStats* stats) {
  if (n_target < 16) throw PreconditionError("n_target must be at least 16");
  cfg.validate();
  const double eps = eps_override.value_or(cfg.eps_end);

  std::vector<Point3> seeds;
  if (prev && !prev->empty()) {
    seeds.assign(prev->begin(), prev->end());
  } else {
    const FieldDomain dom = field.domain();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(dom.bbox_min.x(), dom.bbox_max.x());
    std::uniform_real_distribution<double> uy(dom.bbox_min.y(), dom.bbox_max.y());
    std::uniform_real_distribution<double> uz(dom.bbox_min.z(), dom.bbox_max.z());
    seeds.reserve(n_target);
    for (std::size_t i = 0; i < n_target; ++i) {
      const double x = ux(rng);
      const double y = uy(rng);
      const double z = uz(rng);
      seeds.emplace_back(x, y, z);
    }
  }

  ExtractionStats local;
  local.seeds = seeds.size();
  const ProjectionResult proj = project(field, seeds, cfg, eps);
  local.projection_rounds = proj.rounds;
  local.converged_after_projection = proj.converged_count();
  if (2 * local.converged_after_projection < seeds.size() || local.converged_after_projection < 2)
    throw ExtractionFailed("only " + std::to_string(local.converged_after_projection) + " of " +
                           std::to_string(seeds.size()) + " seeds converged");

  IsoPointSet base = drop_duplicates(proj.converged_set(eps));
  if (base.size() > n_target) {
    IsoPointSet thinned;
    thinned.residual_bound = base.residual_bound;
    for (std::size_t s = 0; s < n_target; ++s) {
      const std::size_t i = s * base.size() / n_target;
      thinned.points.push_back(base.points[i]);
      thinned.normals.push_back(base.normals[i]);
    }
    base = std::move(thinned);
  }

  ResampleStats rs;
  IsoPointSet uniform = resample(field, base, cfg, eps, &rs);
  local.resample_rounds = rs.rounds;
  if (uniform.size() < 2) throw ExtractionFailed("resampling lost the point set");

  UpsampleStats us;
  IsoPointSet out = upsample(field, uniform, n_target, cfg, eps, &us);
  local.insert_steps = us.insert_steps;
  local.relax_rounds = us.relax_rounds;
  if (stats) *stats = local;
  return out;
}

}  // namespace iso
