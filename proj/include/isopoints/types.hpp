#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace iso {

using Vec3 = Eigen::Vector3d;
using Point3 = Eigen::Vector3d;
/// Gradient of a scalar field, stored as a column for convenience.
using RowJacobian = Eigen::Vector3d;

/// Axis-aligned box the shape lives in. All bundled shapes use [-1,1]^3.
struct FieldDomain {
  Point3 bbox_min{-1.0, -1.0, -1.0};
  Point3 bbox_max{1.0, 1.0, 1.0};

  double diagonal() const { return (bbox_max - bbox_min).norm(); }
  bool contains(const Point3& p) const {
    return (p.array() >= bbox_min.array()).all() && (p.array() <= bbox_max.array()).all();
  }
  static FieldDomain unit_cube() { return {}; }
};

/// Point cloud with optional per-point unit normals (empty when absent).
struct OrientedPoints {
  std::vector<Point3> points;
  std::vector<Vec3> normals;

  std::size_t size() const { return points.size(); }
  bool has_normals() const { return !points.empty() && normals.size() == points.size(); }
};

inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class SingularGradient : public Error {
 public:
  SingularGradient() : Error("gradient is singular at the query point") {}
};

class EmptyInput : public Error {
 public:
  EmptyInput() : Error("point set is empty") {}
};

class InsufficientPoints : public Error {
 public:
  using Error::Error;
};

class DegenerateNeighborhood : public Error {
 public:
  DegenerateNeighborhood() : Error("neighborhood is rank deficient") {}
};

class UnsupportedLoss : public Error {
 public:
  using Error::Error;
};

class ExtractionFailed : public Error {
 public:
  using Error::Error;
};

class MissingNormals : public Error {
 public:
  MissingNormals() : Error("normal metric requested but normals are missing") {}
};

class NonFiniteLoss : public Error {
 public:
  explicit NonFiniteLoss(int iteration)
      : Error("non-finite loss at iteration " + std::to_string(iteration)), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace iso
