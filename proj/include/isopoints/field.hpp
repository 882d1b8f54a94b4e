#pragma once

#include <isopoints/types.hpp>

#include <memory>
#include <optional>
#include <span>
#include <string>

namespace iso {

/// Scalar field f: R^3 -> R with a row Jacobian. Implementations are
/// immutable after construction and safe to query from several threads.
class ImplicitField {
 public:
  virtual ~ImplicitField() = default;

  virtual double eval(const Point3& p) const = 0;

  /// Gradient at p, or nullopt at a point where it is undefined.
  virtual std::optional<RowJacobian> try_jacobian(const Point3& p) const = 0;

  /// Throws SingularGradient when undefined or ||J|| < 1e-12.
  RowJacobian jacobian(const Point3& p) const;

  /// Batched evaluation. Singular points get a zero Jacobian.
  virtual void evaluate(std::span<const Point3> points, std::span<double> values,
                        std::span<RowJacobian> jacobians) const;

  virtual FieldDomain domain() const { return FieldDomain::unit_cube(); }
};

enum class ShapeKind { Sphere, Torus, Box };

/// Exact signed distance to a sphere, torus (axis z) or axis-aligned box,
/// centered at the origin. Negative inside.
class AnalyticField final : public ImplicitField {
 public:
  static AnalyticField sphere(double radius);
  static AnalyticField torus(double major_radius, double minor_radius);
  static AnalyticField box(const Vec3& half_extents);

  double eval(const Point3& p) const override;
  std::optional<RowJacobian> try_jacobian(const Point3& p) const override;

  ShapeKind kind() const { return kind_; }
  double radius() const { return a_; }
  double major_radius() const { return a_; }
  double minor_radius() const { return b_; }
  const Vec3& half_extents() const { return half_; }

 private:
  AnalyticField(ShapeKind kind, double a, double b, Vec3 half)
      : kind_(kind), a_(a), b_(b), half_(std::move(half)) {}

  ShapeKind kind_;
  double a_ = 0.0;
  double b_ = 0.0;
  Vec3 half_ = Vec3::Zero();
};

/// f'(p) = scale * f(p). Used to check eikonal metrics on non-SDFs.
class ScaledField final : public ImplicitField {
 public:
  ScaledField(std::shared_ptr<const ImplicitField> base, double scale)
      : base_(std::move(base)), scale_(scale) {}

  double eval(const Point3& p) const override { return scale_ * base_->eval(p); }
  std::optional<RowJacobian> try_jacobian(const Point3& p) const override;
  FieldDomain domain() const override { return base_->domain(); }

 private:
  std::shared_ptr<const ImplicitField> base_;
  double scale_;
};

/// The shapes the CLI knows by name: sphere (r=0.5), torus (R=0.5, r=0.2),
/// box (half extents 0.5, 0.4, 0.3). Returns nullptr for an unknown name.
std::unique_ptr<AnalyticField> make_named_shape(const std::string& name);

}  // namespace iso
