#include <isopoints/bench.hpp>
#include <isopoints/field.hpp>
#include <isopoints/io.hpp>
#include <isopoints/metrics.hpp>
#include <isopoints/siren.hpp>

#include <algorithm>
#include <chrono>
#include <limits>
#include <random>
#include <ostream>

namespace iso {

IsoStrategy parse_strategy(const std::string& name) {
  if (name == "none") return IsoStrategy::None;
  if (name == "uniform") return IsoStrategy::Uniform;
  if (name == "curvature") return IsoStrategy::Curvature;
  if (name == "loss") return IsoStrategy::Loss;
  throw PreconditionError("unknown strategy: " + name);
}

std::string to_string(IsoStrategy s) {
  switch (s) {
    case IsoStrategy::None: return "none";
    case IsoStrategy::Uniform: return "uniform";
    case IsoStrategy::Curvature: return "curvature";
    case IsoStrategy::Loss: return "loss";
  }
  return "?";
}

OrientedPoints sample_zero_set(const ImplicitField& field, std::size_t n, const SamplerConfig& sampler,
                               std::uint64_t seed) {
  const FieldDomain dom = field.domain();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point3> seeds(n);
  for (auto& p : seeds) {
    const double x = u(rng);
    const double y = u(rng);
    const double z = u(rng);
    p = dom.bbox_min + Vec3(x, y, z).cwiseProduct(dom.bbox_max - dom.bbox_min);
  }
  const double eps = sampler.eps_end;
  const IsoPointSet reached = project(field, seeds, sampler, eps).converged_set(eps);
  if (reached.size() < 16) return {reached.points, reached.normals};
  try {
    const IsoPointSet iso = extract_iso_points(field, std::span<const Point3>(reached.points), n, sampler, seed, eps);
    return {iso.points, iso.normals};
  } catch (const Error&) {
    return {reached.points, reached.normals};
  }
}

BenchConfig BenchConfig::desk_scale() {
  BenchConfig c;
  c.fit.width = 64;
  c.fit.hidden_layers = 3;
  c.fit.batch_size = 256;
  c.fit.omega = 5.0;
  c.fit.iters = 1000;
  c.fit.iso_update_period = 500;
  c.fit.iso_init_subsample = 0.025;
  c.fit.iso_batch = 128;
  c.fit.learning_rate = 5e-4;
  c.truth_size = 50000;
  c.eval_size = 10000;
  return c;
}

namespace {

ChamferResult evaluate_net(const SirenNetwork& net, const OrientedPoints& truth, const BenchConfig& cfg,
                           std::uint64_t seed) {
  const OrientedPoints found = sample_zero_set(SirenField(net), cfg.eval_size, cfg.sampler, seed);
  if (found.points.empty()) {
    const double inf = std::numeric_limits<double>::infinity();
    return {inf, inf};
  }
  return chamfer(found, truth);
}

}  // namespace

std::vector<BenchRow> run_sampling_benchmark(const BenchConfig& cfg) {
  cfg.fit.validate();
  cfg.sampler.validate();
  if (cfg.eval_every < 1) throw PreconditionError("eval_every must be positive");
  if (cfg.strategies.empty()) throw PreconditionError("no strategies given");
  const auto shape = make_named_shape(cfg.field);
  if (!shape) throw PreconditionError("unknown analytic field: " + cfg.field);

  const OrientedPoints cloud = sample_surface(*shape, cfg.cloud_size, cfg.fit.seed * 2 + 1);
  const OrientedPoints truth = sample_surface(*shape, cfg.truth_size, cfg.fit.seed * 2 + 2);

  std::vector<BenchRow> rows;
  for (IsoStrategy strategy : cfg.strategies) {
    FitConfig fc = cfg.fit;
    fc.outlier_weighting = false;
    fc.iso_losses = strategy != IsoStrategy::None;
    FitHooks hooks;
    hooks.supervisor = shape.get();
    hooks.strategy = strategy;
    hooks.checkpoint_every = cfg.eval_every;
    hooks.on_checkpoint = [&](int iter, const SirenNetwork& net, double train_seconds) {
      const ChamferResult c = evaluate_net(net, truth, cfg, cfg.fit.seed + 7919);
      rows.push_back({to_string(strategy), iter, train_seconds, c.pos, c.normal});
    };
    fit(cloud, fc, cfg.sampler, hooks);
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "strategy,iter,wall_seconds,chamfer_pos,chamfer_normal\n";
  for (const auto& r : rows)
    out << r.strategy << ',' << r.iter << ',' << format_real(r.wall_seconds) << ',' << format_real(r.chamfer_pos)
        << ',' << format_real(r.chamfer_normal) << '\n';
}

PerfReport measure_extraction_cost(std::size_t n_iso, int width, int batch_size, int pretrain_iters,
                                   std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  const auto shape = make_named_shape("sphere");
  const OrientedPoints cloud = sample_surface(*shape, 20000, seed + 1);
  SamplerConfig sampler;

  FitConfig pre;
  pre.width = width;
  pre.batch_size = 256;
  pre.iters = pretrain_iters;
  pre.learning_rate = 5e-4;
  pre.iso_losses = false;
  pre.outlier_weighting = false;
  pre.seed = seed;
  const SirenNetwork net = fit(cloud, pre, sampler).net;

  // One timed training step at full batch size, averaged over a few.
  FitConfig step = pre;
  step.batch_size = batch_size;
  step.iters = 3;
  step.log_every = 1;
  const FitResult timed = fit(cloud, step, sampler);
  PerfReport report;
  report.step_seconds = timed.log.back().wall_seconds / static_cast<double>(step.iters);

  const SirenField field(net);
  const std::size_t n_seed = std::min(n_iso, cloud.size());
  const IsoPointSet cold =
      extract_iso_points(field, std::span<const Point3>(cloud.points.data(), n_seed), n_iso, sampler, seed);
  const auto start = clock::now();
  const IsoPointSet warm =
      extract_iso_points(field, std::span<const Point3>(cold.points), n_iso, sampler, seed + 1);
  report.extract_seconds = std::chrono::duration<double>(clock::now() - start).count();
  report.iso_count = warm.size();
  report.ratio = report.extract_seconds / report.step_seconds;
  return report;
}

}  // namespace iso
