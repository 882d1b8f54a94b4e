#pragma once

#include <isopoints/field.hpp>
#include <isopoints/types.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <random>
#include <utility>
#include <vector>

namespace test {

using iso::Point3;
using iso::Vec3;

inline std::vector<Point3> uniform_points(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Point3> out(n);
  for (auto& p : out) {
    const double x = u(rng);
    const double y = u(rng);
    const double z = u(rng);
    p = Point3(x, y, z);
  }
  return out;
}

inline Vec3 central_difference(const iso::ImplicitField& f, const Point3& p, double h) {
  Vec3 g;
  for (int k = 0; k < 3; ++k) {
    Point3 a = p, b = p;
    a[k] += h;
    b[k] -= h;
    g[k] = (f.eval(a) - f.eval(b)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(const Vec3& a, const Vec3& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

/// f(p) = n . p - d
class PlaneField final : public iso::ImplicitField {
 public:
  PlaneField(Vec3 n, double d) : n_(n.normalized()), d_(d) {}
  double eval(const Point3& p) const override { return n_.dot(p) - d_; }
  std::optional<iso::RowJacobian> try_jacobian(const Point3&) const override { return n_; }

 private:
  Vec3 n_;
  double d_;
};

inline Eigen::Matrix3d random_rotation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Vector4d q;
  for (int i = 0; i < 4; ++i) q[i] = g(rng);
  q.normalize();
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

/// O(n^2) scan returning (squared distance, id) pairs in result order.
inline std::vector<std::pair<double, std::size_t>> brute_knn(const std::vector<Point3>& pts, const Point3& q,
                                                            std::size_t k, std::size_t skip = SIZE_MAX) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i == skip) continue;
    const double dx = pts[i].x() - q.x();
    const double dy = pts[i].y() - q.y();
    const double dz = pts[i].z() - q.z();
    all.emplace_back(dx * dx + dy * dy + dz * dz, i);
  }
  std::sort(all.begin(), all.end());
  all.resize(std::min(k, all.size()));
  return all;
}

}  // namespace test
