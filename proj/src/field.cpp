#include <isopoints/field.hpp>

#include <algorithm>

namespace iso {

namespace {
constexpr double kSingularNorm = 1e-12;
}

RowJacobian ImplicitField::jacobian(const Point3& p) const {
  auto j = try_jacobian(p);
  if (!j || j->norm() < kSingularNorm) throw SingularGradient();
  return *j;
}

void ImplicitField::evaluate(std::span<const Point3> points, std::span<double> values,
                             std::span<RowJacobian> jacobians) const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    values[i] = eval(points[i]);
    jacobians[i] = try_jacobian(points[i]).value_or(RowJacobian::Zero());
  }
}

AnalyticField AnalyticField::sphere(double radius) {
  if (!(radius > 0.0)) throw PreconditionError("sphere radius must be positive");
  return AnalyticField(ShapeKind::Sphere, radius, 0.0, Vec3::Zero());
}

AnalyticField AnalyticField::torus(double major_radius, double minor_radius) {
  if (!(minor_radius > 0.0) || !(major_radius > minor_radius))
    throw PreconditionError("torus requires R_major > r_minor > 0");
  return AnalyticField(ShapeKind::Torus, major_radius, minor_radius, Vec3::Zero());
}

AnalyticField AnalyticField::box(const Vec3& half_extents) {
  if (!(half_extents.array() > 0.0).all()) throw PreconditionError("box half extents must be positive");
  return AnalyticField(ShapeKind::Box, 0.0, 0.0, half_extents);
}

double AnalyticField::eval(const Point3& p) const {
  switch (kind_) {
    case ShapeKind::Sphere:
      return p.norm() - a_;
    case ShapeKind::Torus: {
      const double ring = std::hypot(p.x(), p.y()) - a_;
      return std::hypot(ring, p.z()) - b_;
    }
    case ShapeKind::Box: {
      const Vec3 q = p.cwiseAbs() - half_;
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    }
  }
  return 0.0;
}

std::optional<RowJacobian> AnalyticField::try_jacobian(const Point3& p) const {
  switch (kind_) {
    case ShapeKind::Sphere: {
      const double n = p.norm();
      if (n == 0.0) return std::nullopt;
      return RowJacobian(p / n);
    }
    case ShapeKind::Torus: {
      const double rho = std::hypot(p.x(), p.y());
      if (rho == 0.0) return std::nullopt;
      const double ring = rho - a_;
      const double tube = std::hypot(ring, p.z());
      if (tube == 0.0) return std::nullopt;
      const double s = ring / (tube * rho);
      return RowJacobian(p.x() * s, p.y() * s, p.z() / tube);
    }
    case ShapeKind::Box: {
      const Vec3 q = p.cwiseAbs() - half_;
      const Vec3 outside = q.cwiseMax(0.0);
      const double out_norm = outside.norm();
      if (out_norm > 0.0) {
        RowJacobian g = outside / out_norm;
        for (int k = 0; k < 3; ++k)
          if (p[k] < 0.0) g[k] = -g[k];
        return g;
      }
      // Inside or on the surface: the nearest face wins. Interior ties are the
      // medial axis; ties on the surface are edges and corners, which get the
      // bisector of the touching faces.
      int axis = 0;
      const double top = q.maxCoeff(&axis);
      if (top == 0.0) {
        RowJacobian g = RowJacobian::Zero();
        for (int k = 0; k < 3; ++k)
          if (q[k] == 0.0) g[k] = p[k] > 0.0 ? 1.0 : -1.0;
        return RowJacobian(g.normalized());
      }
      for (int k = 0; k < 3; ++k)
        if (k != axis && q[k] == q[axis]) return std::nullopt;
      if (p[axis] == 0.0) return std::nullopt;
      RowJacobian g = RowJacobian::Zero();
      g[axis] = p[axis] > 0.0 ? 1.0 : -1.0;
      return g;
    }
  }
  return std::nullopt;
}

std::optional<RowJacobian> ScaledField::try_jacobian(const Point3& p) const {
  auto j = base_->try_jacobian(p);
  if (!j) return std::nullopt;
  return RowJacobian(scale_ * *j);
}

std::unique_ptr<AnalyticField> make_named_shape(const std::string& name) {
  if (name == "sphere") return std::make_unique<AnalyticField>(AnalyticField::sphere(0.5));
  if (name == "torus") return std::make_unique<AnalyticField>(AnalyticField::torus(0.5, 0.2));
  if (name == "box") return std::make_unique<AnalyticField>(AnalyticField::box(Vec3(0.5, 0.4, 0.3)));
  return nullptr;
}

}  // namespace iso
