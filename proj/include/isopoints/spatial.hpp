#pragma once

#include <isopoints/types.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace iso {

struct Neighbor {
  std::size_t id;
  double distance;
};

/// Exact k-nearest-neighbor index over an immutable copy of a point set.
/// Results are ordered by (squared distance, id); the squared distance is
/// accumulated as dx*dx + dy*dy + dz*dz so it agrees bitwise with a naive scan.
class KnnIndex {
 public:
  explicit KnnIndex(std::vector<Point3> points);

  std::size_t size() const { return points_.size(); }
  const Point3& point(std::size_t id) const { return points_[id]; }
  std::span<const Point3> points() const { return points_; }

  /// With exclude_self, the lowest-id indexed point equal to q is skipped.
  std::vector<Neighbor> knn(const Point3& q, std::size_t k, bool exclude_self = false) const;

  /// k nearest to q, never returning `excluded`.
  std::vector<Neighbor> knn_excluding(const Point3& q, std::size_t k, std::size_t excluded) const;

  /// k nearest to indexed point `id`, not counting the point itself.
  std::vector<Neighbor> neighbors_of(std::size_t id, std::size_t k) const {
    return knn_excluding(points_[id], k, id);
  }

  /// All points with distance <= radius, ordered like knn.
  std::vector<Neighbor> radius_search(const Point3& q, double radius) const;

 private:
  struct Node {
    std::uint32_t begin, end;   // range in order_
    std::int32_t left, right;   // -1 for leaves
    int axis;
    double split;
  };

  int build(std::uint32_t begin, std::uint32_t end, int depth);
  std::vector<Neighbor> query(const Point3& q, std::size_t k, std::optional<std::size_t> excluded) const;

  std::vector<Point3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

KnnIndex build_index(std::span<const Point3> points);

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

struct PcaNormal {
  Vec3 normal;
  double planarity;  // 1 - lambda_min / lambda_mid, 0 when degenerate
};

/// Smallest-eigenvalue direction of the covariance of the k nearest indexed
/// points to p. Oriented along `reference` when given, otherwise into the
/// +z hemisphere (ties: +y, then +x).
PcaNormal pca_normal(const KnnIndex& index, const Point3& p, std::size_t k,
                     const std::optional<Vec3>& reference = std::nullopt);

}  // namespace iso
