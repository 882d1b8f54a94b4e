#include <isopoints/field.hpp>
#include <isopoints/metrics.hpp>
#include <isopoints/synth.hpp>

#include <random>

namespace iso {

SynthCloud synthesize(const SynthConfig& cfg) {
  const auto shape = make_named_shape(cfg.shape);
  if (!shape) throw PreconditionError("unknown shape: " + cfg.shape);
  if (cfg.n < 1) throw PreconditionError("synth needs n >= 1");
  if (!(cfg.noise >= 0.0) || !(cfg.outlier_frac >= 0.0 && cfg.outlier_frac <= 1.0) || !(cfg.outlier_offset >= 0.0))
    throw PreconditionError("bad synth settings");

  const auto n_out = static_cast<std::size_t>(std::llround(cfg.outlier_frac * static_cast<double>(cfg.n)));
  const std::size_t n_in = cfg.n - n_out;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> cube(-1.0, 1.0);

  SynthCloud out;
  out.cloud = sample_surface(*shape, n_in, rng());
  const double sigma = cfg.noise * cfg.diagonal;
  for (std::size_t i = 0; i < n_in; ++i) {
    Point3& p = out.cloud.points[i];
    p += gauss(rng) * sigma * out.cloud.normals[i];
    p = p.cwiseMax(-1.0).cwiseMin(1.0);
  }
  out.is_outlier.assign(n_in, false);

  const double min_offset = cfg.outlier_offset * cfg.diagonal;
  std::size_t added = 0;
  for (std::size_t tries = 0; added < n_out; ++tries) {
    if (tries > 1000 * (n_out + 1)) throw PreconditionError("outlier offset leaves no room in the domain");
    const double x = cube(rng);
    const double y = cube(rng);
    const double z = cube(rng);
    const Point3 p(x, y, z);
    if (std::abs(shape->eval(p)) < min_offset) continue;
    Vec3 n;
    do {
      const double a = gauss(rng);
      const double b = gauss(rng);
      const double c = gauss(rng);
      n = Vec3(a, b, c);
    } while (n.norm() == 0.0);
    out.cloud.points.push_back(p);
    out.cloud.normals.push_back(n.normalized());
    out.is_outlier.push_back(true);
    ++added;
  }
  return out;
}

}  // namespace iso
