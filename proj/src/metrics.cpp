#include <isopoints/metrics.hpp>
#include <isopoints/spatial.hpp>

#include <algorithm>
#include <random>

namespace iso {

namespace {

double one_minus_cos(const Vec3& a, const Vec3& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 1.0;
  if (a == b) return 0.0;
  return std::max(0.0, 1.0 - a.dot(b) / (na * nb));
}

// Mean over `from` of the nearest-point term against `to`.
void one_way(const OrientedPoints& from, const OrientedPoints& to, const KnnIndex& to_index, bool with_normals,
             ChamferNorm norm, double& pos, double& normal) {
  double pos_sum = 0.0;
  double normal_sum = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    const std::size_t j = to_index.knn(from.points[i], 1).front().id;
    const double d2 = squared_distance(from.points[i], to.points[j]);
    pos_sum += norm == ChamferNorm::Squared ? d2 : std::sqrt(d2);
    if (with_normals) normal_sum += one_minus_cos(from.normals[i], to.normals[j]);
  }
  pos = pos_sum / static_cast<double>(from.size());
  normal = with_normals ? normal_sum / static_cast<double>(from.size()) : 0.0;
}

}  // namespace

ChamferResult chamfer(const OrientedPoints& a, const OrientedPoints& b, bool with_normals, ChamferNorm norm) {
  if (a.points.empty() || b.points.empty()) throw EmptyInput();
  if (with_normals && (!a.has_normals() || !b.has_normals())) throw MissingNormals();
  const KnnIndex ia(a.points);
  const KnnIndex ib(b.points);
  double pos_ab = 0.0, normal_ab = 0.0, pos_ba = 0.0, normal_ba = 0.0;
  one_way(a, b, ib, with_normals, norm, pos_ab, normal_ab);
  one_way(b, a, ia, with_normals, norm, pos_ba, normal_ba);
  return {0.5 * (pos_ab + pos_ba), 0.5 * (normal_ab + normal_ba)};
}

double eikonal_residual(const ImplicitField& field, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw PreconditionError("eikonal_residual needs at least one sample");
  const FieldDomain dom = field.domain();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point3> pts(n_samples);
  for (auto& p : pts) {
    const double x = u(rng);
    const double y = u(rng);
    const double z = u(rng);
    p = dom.bbox_min + Vec3(x, y, z).cwiseProduct(dom.bbox_max - dom.bbox_min);
  }
  std::vector<double> values(n_samples);
  std::vector<RowJacobian> jac(n_samples);
  field.evaluate(pts, values, jac);
  double sum = 0.0;
  for (const auto& j : jac) sum += std::abs(1.0 - j.norm());
  return sum / static_cast<double>(n_samples);
}

Uniformity uniformity(std::span<const Point3> points) {
  if (points.size() < 2) throw InsufficientPoints("uniformity needs at least two points");
  const KnnIndex index(std::vector<Point3>(points.begin(), points.end()));
  const std::size_t n = points.size();
  std::vector<double> d(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = index.neighbors_of(i, 1).front().distance;
    mean += d[i];
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : d) var += (x - mean) * (x - mean);
  var /= static_cast<double>(n);
  return {mean, mean > 0.0 ? std::sqrt(var) / mean : 0.0};
}

OrientedPoints sample_surface(const AnalyticField& shape, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  OrientedPoints out;
  out.points.reserve(n);
  out.normals.reserve(n);
  switch (shape.kind()) {
    case ShapeKind::Sphere: {
      while (out.size() < n) {
        const double x = gauss(rng);
        const double y = gauss(rng);
        const double z = gauss(rng);
        const Vec3 d(x, y, z);
        if (d.norm() == 0.0) continue;
        const Vec3 nrm = d.normalized();
        out.points.push_back(shape.radius() * nrm);
        out.normals.push_back(nrm);
      }
      break;
    }
    case ShapeKind::Torus: {
      const double big = shape.major_radius();
      const double small = shape.minor_radius();
      while (out.size() < n) {
        const double u = 2.0 * M_PI * unit(rng);
        const double v = 2.0 * M_PI * unit(rng);
        const double accept = unit(rng);
        // Surface element is proportional to (R + r cos v).
        if (accept * (big + small) > big + small * std::cos(v)) continue;
        const Vec3 nrm(std::cos(v) * std::cos(u), std::cos(v) * std::sin(u), std::sin(v));
        const Vec3 center(big * std::cos(u), big * std::sin(u), 0.0);
        out.points.push_back(center + small * nrm);
        out.normals.push_back(nrm);
      }
      break;
    }
    case ShapeKind::Box: {
      const Vec3& h = shape.half_extents();
      const double areas[3] = {h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};  // face pair normal to axis k
      const double total = areas[0] + areas[1] + areas[2];
      while (out.size() < n) {
        const double pick = unit(rng) * total;
        const int axis = pick < areas[0] ? 0 : (pick < areas[0] + areas[1] ? 1 : 2);
        const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
        Vec3 p;
        for (int k = 0; k < 3; ++k) p[k] = (2.0 * unit(rng) - 1.0) * h[k];
        p[axis] = side * h[axis];
        Vec3 nrm = Vec3::Zero();
        nrm[axis] = side;
        out.points.push_back(p);
        out.normals.push_back(nrm);
      }
      break;
    }
  }
  return out;
}

}  // namespace iso
