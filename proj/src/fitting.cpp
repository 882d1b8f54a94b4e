#include <isopoints/fitting.hpp>
#include <isopoints/importance.hpp>

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

namespace iso {

void FitConfig::validate() const {
  if (gamma_on < 0 || gamma_normal < 0 || gamma_off < 0 || gamma_eik < 0)
    throw PreconditionError("loss weights must be non-negative");
  if (!(iso_init_subsample > 0.0 && iso_init_subsample <= 1.0))
    throw PreconditionError("iso_init_subsample must lie in (0, 1]");
  if (!(sigma_n > 0.0 && sigma_n < 180.0)) throw PreconditionError("sigma_n must lie in (0, 180) degrees");
  if (iters < 0 || batch_size < 1 || warmup_iters < 0 || iso_update_period < 1 || log_every < 1)
    throw PreconditionError("iteration counts must be positive");
  if (!(learning_rate > 0.0) || !(alpha_off > 0.0)) throw PreconditionError("learning_rate and alpha_off must be positive");
  if (width < 1 || hidden_layers < 1 || !(omega > 0.0)) throw PreconditionError("invalid network shape");
  if (pca_k < 3 || iso_batch < 0) throw PreconditionError("pca_k must be >= 3 and iso_batch >= 0");
}

double psi(const Vec3& n_p, const Vec3& n_q, double sigma_n_deg, bool literal) {
  const double t = (1.0 - n_p.dot(n_q)) / (1.0 - std::cos(sigma_n_deg * M_PI / 180.0));
  const double e = literal ? 1.0 - t : t;
  return std::exp(-e * e);
}

double outlier_weight(const Point3& q, const Vec3& n_q, const IsoPointSet& iso, const KnnIndex& iso_index,
                      const SamplerConfig& sampler, const FitConfig& cfg) {
  if (iso.empty()) throw PreconditionError("outlier_weight needs iso-points");
  const double sigma_p = sampler.sigma_p_for(iso.size());
  auto term = [&](std::size_t id) {
    return anisotropic_weight(iso.normals[id], iso.points[id] - q, sigma_p) *
           psi(iso.normals[id], n_q, cfg.sigma_n, cfg.psi_literal);
  };
  if (cfg.outlier_literal_min) {
    double v = 1.0;
    for (std::size_t i = 0; i < iso.size(); ++i) v = std::min(v, term(i));
    return v;
  }
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(sampler.K), iso.size());
  double v = 0.0;
  for (const auto& nb : iso_index.knn(q, k)) v = std::max(v, term(nb.id));
  return v;
}

namespace {

LossTerm make_term(std::string name, LossPrimitive primitive, double weight, std::size_t begin, std::size_t end,
                   double normalizer) {
  LossTerm t;
  t.name = std::move(name);
  t.primitive = primitive;
  t.weight = weight;
  t.begin = begin;
  t.end = end;
  t.normalizer = normalizer;
  return t;
}

}  // namespace

std::vector<LossTerm> baseline_terms(const TrainBatch& batch, const FitConfig& cfg,
                                     const std::vector<double>& weights, std::size_t offset) {
  const std::size_t ns = batch.surface_points.size();
  const std::size_t no = batch.off_points.size();
  if (!weights.empty() && weights.size() != ns) throw PreconditionError("one weight per surface sample");
  if (batch.surface_normals.size() != ns) throw PreconditionError("one normal per surface sample");
  std::vector<LossTerm> terms;

  LossTerm on = make_term("L_onSDF", LossPrimitive::AbsValue, cfg.gamma_on, offset, offset + ns, double(std::max<std::size_t>(ns, 1)));
  on.point_weights = weights;
  LossTerm normal = make_term("L_normal", LossPrimitive::OneMinusCos, cfg.gamma_normal, offset, offset + ns, on.normalizer);
  normal.point_weights = weights;
  normal.directions = batch.surface_normals;
  LossTerm off = make_term("L_offSDF", LossPrimitive::ExpAbsValue, cfg.gamma_off, offset + ns, offset + ns + no,
               double(std::max<std::size_t>(no, 1)));
  off.alpha = cfg.alpha_off;
  LossTerm eik = make_term("L_eikonal", LossPrimitive::EikonalResidual, cfg.gamma_eik, offset, offset + ns + no,
               double(std::max<std::size_t>(ns + no, 1)));
  terms.push_back(std::move(on));
  terms.push_back(std::move(normal));
  terms.push_back(std::move(off));
  terms.push_back(std::move(eik));
  return terms;
}

namespace {

std::vector<Point3> stacked_points(const TrainBatch& batch) {
  std::vector<Point3> rows = batch.surface_points;
  rows.insert(rows.end(), batch.off_points.begin(), batch.off_points.end());
  return rows;
}

}  // namespace

BaselineLosses baseline_losses(const SirenNetwork& net, const TrainBatch& batch, const FitConfig& cfg,
                               const std::vector<double>& weights) {
  const auto rows = stacked_points(batch);
  const LossResult r = evaluate_loss(net, rows, CompositeLoss{baseline_terms(batch, cfg, weights)}, false);
  return {r.term_values[0], r.term_values[1], r.term_values[2], r.term_values[3]};
}

IsoLosses iso_losses(const SirenNetwork& net, const IsoPointSet& iso, const std::vector<Vec3>& pca_normals) {
  if (iso.empty()) throw PreconditionError("iso_losses needs iso-points");
  if (pca_normals.size() != iso.size()) throw PreconditionError("one PCA normal per iso-point");
  const double n = static_cast<double>(iso.size());
  CompositeLoss loss;
  loss.terms.push_back(make_term("L_isoSDF", LossPrimitive::AbsValue, 1.0, 0, iso.size(), n));
  LossTerm normal = make_term("L_isoNormal", LossPrimitive::OneMinusAbsCos, 1.0, 0, iso.size(), n);
  normal.directions = pca_normals;
  loss.terms.push_back(std::move(normal));
  const LossResult r = evaluate_loss(net, iso.points, loss, false);
  return {r.term_values[0], r.term_values[1]};
}

std::vector<Vec3> iso_pca_normals(const IsoPointSet& iso, const KnnIndex& index, int k, const SamplerConfig& sampler,
                                  bool filter) {
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), iso.size());
  std::vector<Vec3> out(iso.size());
  for (std::size_t i = 0; i < iso.size(); ++i) {
    try {
      out[i] = kk >= 3 ? pca_normal(index, iso.points[i], kk, iso.normals[i]).normal : iso.normals[i];
    } catch (const DegenerateNeighborhood&) {
      out[i] = iso.normals[i];
    }
  }
  if (filter) out = bilateral_normal_filter(iso.points, out, index, sampler);
  return out;
}

std::vector<int> iso_schedule(const FitConfig& cfg) {
  std::vector<int> s;
  for (long t = cfg.warmup_iters; t < cfg.iters; t += cfg.iso_update_period) s.push_back(static_cast<int>(t));
  return s;
}

namespace {

struct Adam {
  Eigen::VectorXd m, v;
  long t = 0;
  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& g, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (m.size() == 0) {
      m = Eigen::VectorXd::Zero(theta.size());
      v = Eigen::VectorXd::Zero(theta.size());
    }
    ++t;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

// Iso-point state carried across updates.
struct IsoState {
  IsoPointSet uniform;  // warm-start seeds for the next update
  IsoPointSet train;    // what the losses see (uniform plus importance insertions)
  std::optional<KnnIndex> train_index;
  std::vector<Vec3> pca_normals;
  std::vector<double> target_values;
  std::vector<Vec3> target_normals;
};

}  // namespace

FitResult fit(const OrientedPoints& cloud, const FitConfig& cfg, const SamplerConfig& sampler, const FitHooks& hooks) {
  cfg.validate();
  sampler.validate();
  if (cloud.size() < 100) throw PreconditionError("fit needs at least 100 points");
  if (!cloud.has_normals()) throw PreconditionError("fit needs one normal per point");
  const FieldDomain domain = FieldDomain::unit_cube();
  for (const auto& p : cloud.points)
    if (!domain.contains(p)) throw PreconditionError("cloud must lie inside [-1,1]^3");

  using clock = std::chrono::steady_clock;
  const bool supervised = hooks.supervisor != nullptr;
  const bool iso_active = supervised ? hooks.strategy != IsoStrategy::None : cfg.uses_iso_points();
  const bool weighting = !supervised && cfg.outlier_weighting;
  const std::size_t n_iso =
      std::max<std::size_t>(16, static_cast<std::size_t>(std::lround(cloud.size() * cfg.iso_init_subsample)));
  const std::size_t bsz = static_cast<std::size_t>(cfg.batch_size);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
  std::uniform_real_distribution<double> cube(-1.0, 1.0);

  FitResult result;
  result.net = SirenNetwork::init(cfg.width, cfg.hidden_layers, cfg.omega, cfg.seed);
  Eigen::VectorXd theta = result.net.parameters();
  Adam adam;

  const std::vector<int> schedule = iso_active ? iso_schedule(cfg) : std::vector<int>{};
  std::size_t next_update = 0;
  IsoState iso;
  double train_seconds = 0.0;

  auto update_iso = [&](int t) {
    const double frac = cfg.iters > 1 ? static_cast<double>(t) / (cfg.iters - 1) : 1.0;
    const double eps = sampler.eps_start + (sampler.eps_end - sampler.eps_start) * frac;
    const SirenField field(result.net);
    const std::uint64_t extract_seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(t);
    auto cloud_seeds = [&] {
      std::vector<std::size_t> ids(cloud.size());
      std::iota(ids.begin(), ids.end(), 0);
      std::shuffle(ids.begin(), ids.end(), rng);
      std::vector<Point3> seeds;
      for (std::size_t i = 0; i < n_iso; ++i) seeds.push_back(cloud.points[ids[i]]);
      return seeds;
    };
    IsoPointSet fresh;
    try {
      if (!iso.uniform.empty()) {
        fresh = extract_iso_points(field, std::span<const Point3>(iso.uniform.points), n_iso, sampler, extract_seed, eps);
      } else if (supervised) {
        try {
          fresh = extract_iso_points(field, std::nullopt, n_iso, sampler, extract_seed, eps);
        } catch (const ExtractionFailed&) {
          fresh = extract_iso_points(field, cloud_seeds(), n_iso, sampler, extract_seed, eps);
        }
      } else {
        fresh = extract_iso_points(field, cloud_seeds(), n_iso, sampler, extract_seed, eps);
      }
    } catch (const ExtractionFailed&) {
      if (iso.uniform.empty()) throw;
      ++result.iso_failures;
      return;
    }
    fresh.origin_iteration = t;
    iso.uniform = std::move(fresh);
    iso.train = iso.uniform;

    if (supervised && (hooks.strategy == IsoStrategy::Curvature || hooks.strategy == IsoStrategy::Loss)) {
      const KnnIndex uindex(iso.uniform.points);
      SaliencyField sal;
      if (hooks.strategy == IsoStrategy::Curvature) {
        sal = curvature_metric(iso.uniform, uindex, static_cast<std::size_t>(sampler.K));
      } else {
        std::vector<double> residuals(iso.uniform.size());
        for (std::size_t i = 0; i < iso.uniform.size(); ++i) {
          const Point3& p = iso.uniform.points[i];
          const auto g = hooks.supervisor->try_jacobian(p).value_or(Vec3::Zero());
          const double gn = g.norm();
          const double cosv = gn > 0.0 ? iso.uniform.normals[i].dot(g) / gn : 0.0;
          residuals[i] = cfg.gamma_on * std::abs(hooks.supervisor->eval(p)) + cfg.gamma_normal * (1.0 - cosv);
        }
        sal = loss_metric(iso.uniform, uindex, residuals, std::sqrt(sampler.sigma_p_for(iso.uniform.size())));
      }
      iso.train = metric_insert(field, iso.uniform, sal, uindex, sampler, eps);
    }
    iso.train_index.emplace(iso.train.points);

    if (supervised) {
      iso.target_values.resize(iso.train.size());
      iso.target_normals.resize(iso.train.size());
      for (std::size_t i = 0; i < iso.train.size(); ++i) {
        iso.target_values[i] = hooks.supervisor->eval(iso.train.points[i]);
        iso.target_normals[i] = hooks.supervisor->try_jacobian(iso.train.points[i]).value_or(Vec3::Zero());
      }
    } else {
      iso.pca_normals = iso_pca_normals(iso.train, *iso.train_index, cfg.pca_k, sampler, cfg.pca_filter);
    }
    result.iso_update_iters.push_back(t);

    if (hooks.on_iso_update) {
      std::vector<double> cloud_weights;
      if (weighting && hooks.report_cloud_weights) {
        cloud_weights.resize(cloud.size());
        for (std::size_t i = 0; i < cloud.size(); ++i)
          cloud_weights[i] = outlier_weight(cloud.points[i], cloud.normals[i], iso.train, *iso.train_index, sampler, cfg);
      }
      hooks.on_iso_update(t, iso.train, cloud_weights);
    }
  };

  TrainBatch batch;
  for (int t = 0; t < cfg.iters; ++t) {
    const auto step_start = clock::now();

    if (next_update < schedule.size() && schedule[next_update] == t) {
      ++next_update;
      update_iso(t);
    }
    const bool have_iso = iso_active && !iso.train.empty();
    const bool iso_terms = have_iso && (supervised || cfg.iso_losses);
    std::size_t n_iso_rows = 0;
    if (iso_terms)
      n_iso_rows = cfg.iso_batch > 0 ? std::min<std::size_t>(cfg.iso_batch, iso.train.size()) : iso.train.size();
    // Supervised iso-points stand in for part of the surface samples.
    const std::size_t n_surface = supervised ? bsz - std::min(bsz - 1, n_iso_rows) : bsz;

    batch.surface_points.resize(n_surface);
    batch.surface_normals.resize(n_surface);
    batch.off_points.resize(bsz);
    for (std::size_t i = 0; i < n_surface; ++i) {
      const std::size_t id = pick(rng);
      batch.surface_points[i] = cloud.points[id];
      batch.surface_normals[i] = cloud.normals[id];
    }
    for (auto& p : batch.off_points) {
      const double x = cube(rng);
      const double y = cube(rng);
      const double z = cube(rng);
      p = Point3(x, y, z);
    }

    std::vector<double> weights;
    if (weighting && have_iso) {
      weights.resize(n_surface);
      for (std::size_t i = 0; i < n_surface; ++i)
        weights[i] = outlier_weight(batch.surface_points[i], batch.surface_normals[i], iso.train, *iso.train_index,
                                    sampler, cfg);
    }

    std::vector<Point3> rows = stacked_points(batch);
    CompositeLoss loss{baseline_terms(batch, cfg, weights)};
    if (iso_terms) {
      std::vector<std::size_t> ids;
      if (cfg.iso_batch > 0 && static_cast<std::size_t>(cfg.iso_batch) < iso.train.size()) {
        std::uniform_int_distribution<std::size_t> pick_iso(0, iso.train.size() - 1);
        for (int i = 0; i < cfg.iso_batch; ++i) ids.push_back(pick_iso(rng));
      } else {
        ids.resize(iso.train.size());
        std::iota(ids.begin(), ids.end(), 0);
      }
      const std::size_t begin = rows.size();
      const std::size_t end = begin + ids.size();
      const double m = static_cast<double>(ids.size());
      LossTerm value = make_term("L_isoSDF", LossPrimitive::AbsValue, cfg.gamma_on, begin, end, m);
      LossTerm normal = make_term("L_isoNormal", supervised ? LossPrimitive::OneMinusCos : LossPrimitive::OneMinusAbsCos,
                      cfg.gamma_normal, begin, end, m);
      for (std::size_t id : ids) {
        rows.push_back(iso.train.points[id]);
        if (supervised) {
          value.value_targets.push_back(iso.target_values[id]);
          normal.directions.push_back(iso.target_normals[id]);
        } else {
          normal.directions.push_back(iso.pca_normals[id]);
        }
      }
      loss.terms.push_back(std::move(value));
      loss.terms.push_back(std::move(normal));
    }

    const LossResult r = evaluate_loss(result.net, rows, loss, true);
    if (!std::isfinite(r.total) || !r.gradient.allFinite()) throw NonFiniteLoss(t);
    adam.step(theta, r.gradient, cfg.learning_rate);
    result.net.set_parameters(theta);

    train_seconds += std::chrono::duration<double>(clock::now() - step_start).count();

    if (t % cfg.log_every == 0) {
      LogEntry e;
      e.iter = t;
      e.on_sdf = r.term_values[0];
      e.normal = r.term_values[1];
      e.off_sdf = r.term_values[2];
      e.eikonal = r.term_values[3];
      if (iso_terms) {
        e.iso_sdf = r.term_values[4];
        e.iso_normal = r.term_values[5];
      }
      e.total = r.total;
      if (!weights.empty()) {
        e.mean_weight = std::accumulate(weights.begin(), weights.end(), 0.0) / static_cast<double>(weights.size());
        e.min_weight = *std::min_element(weights.begin(), weights.end());
      }
      e.wall_seconds = train_seconds;
      result.log.push_back(e);
    }

    if (hooks.on_checkpoint && hooks.checkpoint_every > 0 && (t + 1) % hooks.checkpoint_every == 0)
      hooks.on_checkpoint(t + 1, result.net, train_seconds);
  }

  result.iso = iso.train;
  result.net.round_to_float();
  return result;
}

}  // namespace iso
