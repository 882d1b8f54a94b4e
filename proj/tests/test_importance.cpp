#include "support.hpp"

#include <isopoints/importance.hpp>
#include <isopoints/metrics.hpp>

#include <doctest.h>

using namespace iso;

namespace {

IsoPointSet as_iso(std::vector<Point3> pts) {
  IsoPointSet iso;
  iso.points = std::move(pts);
  for (const auto& p : iso.points) iso.normals.push_back(p.norm() > 0 ? Vec3(p.normalized()) : Vec3(0, 0, 1));
  return iso;
}

IsoPointSet sphere_iso(std::size_t n, std::uint64_t seed) {
  const auto s = sample_surface(AnalyticField::sphere(0.5), n, seed);
  IsoPointSet iso;
  iso.points = s.points;
  iso.normals = s.normals;
  return iso;
}

}  // namespace

TEST_SUITE("importance") {

TEST_CASE("curvature is zero at the neighbor centroid") {
  std::vector<Point3> pts{Point3::Zero()};
  for (int i = 0; i < 6; ++i) pts.emplace_back(0.1 * std::cos(i * M_PI / 3), 0.1 * std::sin(i * M_PI / 3), 0.0);
  const auto iso = as_iso(pts);
  const auto r = curvature_metric(iso, KnnIndex(iso.points), 6);
  CHECK(r.values[0] < 1e-16);
  CHECK(r.kind == SaliencyKind::Curvature);
  CHECK_THROWS_AS(curvature_metric(iso, KnnIndex(iso.points), 2), PreconditionError);
}

TEST_CASE("curvature vanishes inside a planar lattice") {
  std::vector<Point3> pts;
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) pts.emplace_back(0.05 * i, 0.05 * j, 0.3);
  const auto iso = as_iso(pts);
  const auto r = curvature_metric(iso, KnnIndex(iso.points), 8);
  const double D = 2.0 * std::sqrt(3.0);
  for (int i = 1; i < 11; ++i)
    for (int j = 1; j < 11; ++j) CHECK(r.values[std::size_t(i * 12 + j)] < 1e-6 * D);
}

TEST_CASE("curvature of a ring on the unit sphere") {
  for (double theta : {0.05, 0.1, 0.3}) {
    std::vector<Point3> pts{Point3(0, 0, 1)};
    for (int i = 0; i < 8; ++i) {
      const double phi = i * M_PI / 4;
      pts.emplace_back(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
    }
    const auto iso = as_iso(pts);
    const auto r = curvature_metric(iso, KnnIndex(iso.points), 8);
    CHECK(r.values[0] == doctest::Approx(1.0 - std::cos(theta)).epsilon(1e-9));
    const auto lit = curvature_metric(iso, KnnIndex(iso.points), 8, true);
    CHECK(lit.values[0] == doctest::Approx(8.0 * std::cos(theta) - 1.0).epsilon(1e-9));
  }
}

TEST_CASE("curvature is invariant under rigid motion") {
  const auto iso = sphere_iso(600, 3);
  const auto base = curvature_metric(iso, KnnIndex(iso.points), 8);
  const Eigen::Matrix3d R = test::random_rotation(4);
  IsoPointSet moved = iso;
  for (auto& p : moved.points) p = R * p + Vec3(0.3, -0.2, 0.1);
  const auto after = curvature_metric(moved, KnnIndex(moved.points), 8);
  double worst = 0.0;
  for (std::size_t i = 0; i < iso.size(); ++i) worst = std::max(worst, std::abs(after.values[i] - base.values[i]));
  CHECK(worst < 1e-9);
}

TEST_CASE("loss metric") {
  const auto iso = sphere_iso(400, 5);
  const auto train = sample_surface(AnalyticField::sphere(0.5), 3000, 6);
  const KnnIndex tindex(train.points);
  std::vector<double> zero(train.size(), 0.0);
  const auto z = loss_metric(iso, tindex, zero, 0.1);
  for (double v : z.values) CHECK(v == 0.0);

  std::vector<double> res(train.size(), 0.0);
  for (std::size_t i = 0; i < train.size(); ++i)
    if ((train.points[i].array() > 0.0).all()) res[i] = 1.0;
  const auto m = loss_metric(iso, tindex, res, 0.1);
  double in = 0.0, out = 0.0;
  int nin = 0, nout = 0;
  for (std::size_t i = 0; i < iso.size(); ++i) {
    if ((iso.points[i].array() > 0.0).all()) {
      in += m.values[i];
      ++nin;
    } else {
      out += m.values[i];
      ++nout;
    }
  }
  REQUIRE(nin > 0);
  CHECK(in / nin > 5.0 * (out / nout));

  IsoPointSet lonely = as_iso({Point3(0.9, 0.9, 0.9)});
  CHECK(loss_metric(lonely, tindex, res, 0.05).values[0] == 0.0);
  CHECK_THROWS_AS(loss_metric(iso, tindex, res, 0.0), PreconditionError);
  CHECK_THROWS_AS(loss_metric(iso, tindex, std::vector<double>(3, 0.0), 0.1), PreconditionError);
}

TEST_CASE("saliency threshold interpolates") {
  SaliencyField s;
  s.values = {0, 1, 2, 3, 4};
  s.high_set_quantile = 0.85;
  CHECK(saliency_threshold(s) == doctest::Approx(3.4));
  s.values = {2, 2, 2};
  CHECK(saliency_threshold(s) == 2.0);
}

TEST_CASE("uniform saliency inserts nothing") {
  const auto iso = sphere_iso(300, 7);
  const KnnIndex index(iso.points);
  SaliencyField s;
  s.values.assign(iso.size(), 0.4);
  SamplerConfig cfg;
  CHECK(metric_insert_candidates(iso, s, index, cfg).empty());
  const auto out = metric_insert(AnalyticField::sphere(0.5), iso, s, index, cfg, 1e-5);
  CHECK(out.size() == iso.size());
}

TEST_CASE("one marked point yields one candidate per neighbor") {
  std::vector<Point3> pts{Point3::Zero()};
  for (int i = 0; i < 8; ++i) pts.emplace_back(0.5 * std::cos(i * M_PI / 4), 0.5 * std::sin(i * M_PI / 4), 0.0);
  for (int i = 0; i < 8; ++i) pts.emplace_back(0.9 * std::cos(i * M_PI / 4 + 0.2), 0.9 * std::sin(i * M_PI / 4 + 0.2), 0.1);
  const auto iso = as_iso(pts);
  SaliencyField s;
  s.values.assign(iso.size(), 0.0);
  s.values[0] = 1.0;
  SamplerConfig cfg;
  cfg.sigma_p = 0.01;
  const KnnIndex index(iso.points);
  const auto c = metric_insert_candidates(iso, s, index, cfg);
  REQUIRE(c.size() == 8);
  for (std::size_t j = 0; j < 8; ++j) {
    const Point3 want = (2.0 * pts[0] + pts[1 + j]) / 3.0;
    double best = 1.0;
    for (const auto& q : c) best = std::min(best, (q - want).norm());
    CHECK(best < 1e-15);
  }
}

TEST_CASE("inserted points are projected and originals kept") {
  const auto f = AnalyticField::sphere(0.5);
  const auto iso = sphere_iso(500, 8);
  const KnnIndex index(iso.points);
  const auto s = curvature_metric(iso, index, 8);
  SamplerConfig cfg;
  const auto out = metric_insert(f, iso, s, index, cfg, cfg.eps_end);
  REQUIRE(out.size() > iso.size());
  for (std::size_t i = 0; i < iso.size(); ++i) CHECK(out.points[i] == iso.points[i]);
  for (std::size_t i = iso.size(); i < out.size(); ++i) CHECK(std::abs(f.eval(out.points[i])) < cfg.eps_end);

  // New points stay near the marked set.
  const double threshold = saliency_threshold(s);
  std::vector<Point3> marked;
  for (std::size_t i = 0; i < iso.size(); ++i)
    if (s.values[i] > threshold) marked.push_back(iso.points[i]);
  const KnnIndex mindex(marked);
  double max_nb = 0.0;
  for (std::size_t i = 0; i < iso.size(); ++i) max_nb = std::max(max_nb, index.neighbors_of(i, 8).back().distance);
  const double reach = std::sqrt(cfg.sigma_p_for(iso.size())) + max_nb;
  for (const auto& p : metric_insert_candidates(iso, s, index, cfg))
    CHECK(mindex.knn(p, 1).front().distance <= reach);
}

}
