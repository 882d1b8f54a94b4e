#include "support.hpp"

#include <isopoints/fitting.hpp>
#include <isopoints/metrics.hpp>

#include <doctest.h>

using namespace iso;

namespace {

// f(p) = n . p - d as a one-layer network: an exact signed distance.
SirenNetwork plane_net(const Vec3& n, double d) {
  DenseLayer l;
  l.weight = n.normalized().transpose();
  l.bias = Eigen::VectorXd::Constant(1, -d);
  return SirenNetwork({l});
}

TrainBatch plane_batch(std::size_t ns, std::size_t no, std::uint64_t seed) {
  TrainBatch b;
  for (const auto& p : test::uniform_points(ns, seed)) {
    b.surface_points.emplace_back(p.x(), p.y(), 0.0);
    b.surface_normals.emplace_back(0, 0, 1);
  }
  b.off_points = test::uniform_points(no, seed + 1);
  return b;
}

OrientedPoints small_cloud() {
  return sample_surface(AnalyticField::sphere(0.5), 400, 12);
}

FitConfig tiny_config() {
  FitConfig cfg;
  cfg.width = 16;
  cfg.hidden_layers = 2;
  cfg.batch_size = 64;
  cfg.iters = 120;
  cfg.warmup_iters = 40;
  cfg.iso_update_period = 50;
  cfg.iso_init_subsample = 0.25;
  cfg.learning_rate = 5e-4;
  cfg.log_every = 10;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_SUITE("fitting") {

TEST_CASE("psi") {
  const Vec3 z(0, 0, 1);
  CHECK(psi(z, z, 60.0, false) == 1.0);
  CHECK(psi(z, -z, 60.0, false) == doctest::Approx(std::exp(-16.0)).epsilon(1e-9));
  CHECK(psi(z, -z, 60.0, false) == doctest::Approx(1.125e-7).epsilon(1e-3));
  CHECK(psi(z, z, 60.0, true) == doctest::Approx(0.367879).epsilon(1e-6));
  const Vec3 at60(std::sin(M_PI / 3), 0, std::cos(M_PI / 3));
  CHECK(psi(z, at60, 60.0, true) == doctest::Approx(1.0));
  CHECK(psi(z, at60, 60.0, false) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("outlier weight examples") {
  IsoPointSet iso;
  for (int i = -3; i <= 3; ++i)
    for (int j = -3; j <= 3; ++j) {
      iso.points.emplace_back(0.1 * i, 0.1 * j, 0.0);
      iso.normals.emplace_back(0, 0, 1);
    }
  const KnnIndex index(iso.points);
  SamplerConfig sampler;
  FitConfig cfg;
  CHECK(outlier_weight(iso.points[24], Vec3(0, 0, 1), iso, index, sampler, cfg) == 1.0);
  const double s = std::sqrt(sampler.sigma_p_for(iso.size()));
  const double v = outlier_weight(Point3(0, 0, 3 * s), Vec3(0, 0, 1), iso, index, sampler, cfg);
  CHECK(v <= 1.24e-4);
  CHECK(v == doctest::Approx(std::exp(-9.0)).epsilon(1e-9));
  CHECK(outlier_weight(iso.points[24], Vec3(0, 0, -1), iso, index, sampler, cfg) < 1e-6);

  // Over a curved set some far iso-point always disagrees.
  const auto sphere = sample_surface(AnalyticField::sphere(0.5), 500, 8);
  IsoPointSet round;
  round.points = sphere.points;
  round.normals = sphere.normals;
  const KnnIndex rindex(round.points);
  const double kept = outlier_weight(round.points[0], round.normals[0], round, rindex, sampler, cfg);
  cfg.outlier_literal_min = true;
  const double literal = outlier_weight(round.points[0], round.normals[0], round, rindex, sampler, cfg);
  CHECK(kept == 1.0);
  CHECK(literal < 1e-6);
  CHECK_THROWS_AS(outlier_weight(Point3::Zero(), Vec3(0, 0, 1), IsoPointSet{}, index, sampler, cfg),
                  PreconditionError);
}

TEST_CASE("baseline losses vanish on an exact distance field") {
  const auto net = plane_net(Vec3(0, 0, 1), 0.0);
  const TrainBatch b = plane_batch(50, 50, 1);
  const FitConfig cfg;
  const auto l = baseline_losses(net, b, cfg, {});
  CHECK(l.on_sdf == 0.0);
  CHECK(l.normal == doctest::Approx(0.0).scale(1.0));
  CHECK(l.normal < 1e-15);
  CHECK(l.eikonal < 1e-15);
  CHECK(l.off_sdf > 0.0);
}

TEST_CASE("an off-surface point on the zero set costs one") {
  const auto net = plane_net(Vec3(0, 0, 1), 0.0);
  TrainBatch b = plane_batch(4, 0, 2);
  b.off_points = {Point3(0.3, -0.2, 0.0)};
  const auto l = baseline_losses(net, b, FitConfig{}, {});
  CHECK(l.off_sdf == 1.0);
}

TEST_CASE("zero weights annihilate the surface terms") {
  const auto net = SirenNetwork::init(8, 2, 30.0, 4);
  const TrainBatch b = plane_batch(20, 20, 3);
  const auto weighted = baseline_losses(net, b, FitConfig{}, std::vector<double>(20, 0.0));
  CHECK(weighted.on_sdf == 0.0);
  CHECK(weighted.normal == 0.0);
  const auto plain = baseline_losses(net, b, FitConfig{}, {});
  CHECK(plain.on_sdf > 0.0);
  CHECK(weighted.off_sdf == plain.off_sdf);
  CHECK(weighted.eikonal == plain.eikonal);
  CHECK_THROWS_AS(baseline_losses(net, b, FitConfig{}, std::vector<double>(3, 1.0)), PreconditionError);
}

TEST_CASE("iso losses") {
  const auto net = plane_net(Vec3(0, 0, 1), 0.0);
  IsoPointSet iso;
  for (const auto& p : test::uniform_points(30, 5)) {
    iso.points.emplace_back(p.x(), p.y(), 1e-7 * p.z());
    iso.normals.emplace_back(0, 0, 1);
  }
  const auto along = iso_losses(net, iso, std::vector<Vec3>(30, Vec3(0, 0, -1)));
  CHECK(along.iso_sdf < 1e-6);
  CHECK(along.iso_normal < 1e-15);
  const auto across = iso_losses(net, iso, std::vector<Vec3>(30, Vec3(1, 0, 0)));
  CHECK(across.iso_normal == doctest::Approx(1.0));

  DenseLayer flat;
  flat.weight = Eigen::MatrixXd::Zero(1, 3);
  flat.bias = Eigen::VectorXd::Zero(1);
  const auto zero = iso_losses(SirenNetwork({flat}), iso, std::vector<Vec3>(30, Vec3(0, 0, 1)));
  CHECK(zero.iso_normal == 1.0);
}

TEST_CASE("pca normals of iso-points follow the iso orientation") {
  const auto s = sample_surface(AnalyticField::sphere(0.5), 800, 9);
  IsoPointSet iso;
  iso.points = s.points;
  iso.normals = s.normals;
  const KnnIndex index(iso.points);
  const auto n = iso_pca_normals(iso, index, 16, SamplerConfig{}, false);
  const auto f = iso_pca_normals(iso, index, 16, SamplerConfig{}, true);
  for (std::size_t i = 0; i < iso.size(); ++i) {
    CHECK(n[i].dot(iso.normals[i]) > 0.99);
    CHECK(f[i].dot(iso.normals[i]) > 0.95);
  }
}

TEST_CASE("full objective gradient matches finite differences") {
  const auto net = SirenNetwork::init(8, 2, 30.0, 21);
  const TrainBatch b = plane_batch(12, 12, 22);
  FitConfig cfg;
  cfg.alpha_off = 3.0;
  std::vector<double> w;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int i = 0; i < 12; ++i) w.push_back(u(rng));
  CompositeLoss loss{baseline_terms(b, cfg, w)};
  std::vector<Point3> rows = b.surface_points;
  rows.insert(rows.end(), b.off_points.begin(), b.off_points.end());
  LossTerm iso_normal;
  iso_normal.primitive = LossPrimitive::OneMinusAbsCos;
  iso_normal.weight = cfg.gamma_normal;
  iso_normal.begin = rows.size();
  for (const auto& p : test::uniform_points(8, 24, -0.5, 0.5)) {
    rows.push_back(p);
    iso_normal.directions.push_back(p.normalized());
  }
  iso_normal.end = rows.size();
  iso_normal.normalizer = 8;
  LossTerm iso_value = iso_normal;
  iso_value.primitive = LossPrimitive::AbsValue;
  iso_value.weight = cfg.gamma_on;
  iso_value.directions.clear();
  loss.terms.push_back(iso_value);
  loss.terms.push_back(iso_normal);

  const LossResult r = evaluate_loss(net, rows, loss, true);
  const Eigen::VectorXd theta = net.parameters();
  SirenNetwork probe = net;
  const double h = 1e-4;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd t = theta;
    t[i] += h;
    probe.set_parameters(t);
    const double up = evaluate_loss(probe, rows, loss, false).total;
    t[i] -= 2 * h;
    probe.set_parameters(t);
    const double down = evaluate_loss(probe, rows, loss, false).total;
    worst = std::max(worst, std::abs((up - down) / (2 * h) - r.gradient[i]));
  }
  CHECK(worst / r.gradient.cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("iso schedule") {
  FitConfig cfg;
  cfg.iters = 5000;
  CHECK(iso_schedule(cfg) == std::vector<int>{300, 2300, 4300});
  cfg.iters = 300;
  CHECK(iso_schedule(cfg).empty());
  cfg.iters = 301;
  CHECK(iso_schedule(cfg) == std::vector<int>{300});
}

TEST_CASE("config validation") {
  FitConfig cfg;
  cfg.iso_init_subsample = 0.0;
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg = FitConfig{};
  cfg.sigma_n = 180.0;
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg = FitConfig{};
  cfg.gamma_eik = -1.0;
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg = FitConfig{};
  CHECK_THROWS_AS(fit(OrientedPoints{test::uniform_points(50, 1), {}}, cfg, SamplerConfig{}), PreconditionError);
}

TEST_CASE("fit follows the schedule and is deterministic") {
  const auto cloud = small_cloud();
  const FitConfig cfg = tiny_config();
  const FitResult a = fit(cloud, cfg, SamplerConfig{});
  const FitResult b = fit(cloud, cfg, SamplerConfig{});
  CHECK((a.net.parameters().array() == b.net.parameters().array()).all());
  CHECK(a.iso_update_iters == iso_schedule(cfg));
  CHECK(a.log.size() == 12);
  for (const auto& e : a.log) {
    CHECK(e.on_sdf >= 0.0);
    CHECK(e.normal >= 0.0);
    CHECK(e.off_sdf >= 0.0);
    CHECK(e.eikonal >= 0.0);
    if (e.iter < cfg.warmup_iters) {
      CHECK_FALSE(e.iso_sdf.has_value());
      CHECK_FALSE(e.iso_normal.has_value());
      CHECK(e.mean_weight == 1.0);
      CHECK(e.min_weight == 1.0);
    } else {
      REQUIRE(e.iso_sdf.has_value());
      CHECK(*e.iso_sdf >= 0.0);
      CHECK(*e.iso_normal >= 0.0);
    }
  }
  const Eigen::VectorXd theta = a.net.parameters();
  for (Eigen::Index i = 0; i < theta.size(); ++i) CHECK(double(float(theta[i])) == theta[i]);
}

TEST_CASE("baseline fit never touches iso-points") {
  const auto cloud = small_cloud();
  FitConfig cfg = tiny_config();
  cfg.iso_losses = false;
  cfg.outlier_weighting = false;
  int updates = 0;
  FitHooks hooks;
  hooks.on_iso_update = [&](int, const IsoPointSet&, const std::vector<double>&) { ++updates; };
  const FitResult r = fit(cloud, cfg, SamplerConfig{}, hooks);
  CHECK(updates == 0);
  CHECK(r.iso_update_iters.empty());
  for (const auto& e : r.log) CHECK_FALSE(e.iso_sdf.has_value());
}

TEST_CASE("checkpoints report monotone training time") {
  const auto cloud = small_cloud();
  FitConfig cfg = tiny_config();
  FitHooks hooks;
  hooks.checkpoint_every = 30;
  std::vector<int> iters;
  std::vector<double> times;
  hooks.on_checkpoint = [&](int it, const SirenNetwork&, double s) {
    iters.push_back(it);
    times.push_back(s);
  };
  fit(cloud, cfg, SamplerConfig{}, hooks);
  CHECK(iters == std::vector<int>{30, 60, 90, 120});
  for (std::size_t i = 1; i < times.size(); ++i) CHECK(times[i] > times[i - 1]);
}

TEST_CASE("a diverging run reports the iteration") {
  const auto cloud = small_cloud();
  FitConfig cfg = tiny_config();
  cfg.iso_losses = false;
  cfg.outlier_weighting = false;
  cfg.learning_rate = 1e300;
  cfg.gamma_on = 1e300;
  try {
    fit(cloud, cfg, SamplerConfig{});
    FAIL("expected NonFiniteLoss");
  } catch (const NonFiniteLoss& e) {
    CHECK(e.iteration() >= 0);
    CHECK(e.iteration() < cfg.iters);
  }
}

}
