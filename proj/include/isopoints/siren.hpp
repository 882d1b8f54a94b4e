#pragma once

#include <isopoints/field.hpp>
#include <isopoints/types.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iso {

/// One affine layer. Every layer but the last is followed by sin(omega * z).
struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  double omega = 30.0;
};

/// Sine-activated MLP R^3 -> R with a linear output layer.
class SirenNetwork {
 public:
  SirenNetwork() = default;
  explicit SirenNetwork(std::vector<DenseLayer> layers);

  /// First layer U(-1/3, 1/3); later layers U(+-sqrt(6/fan_in)/omega);
  /// biases U(+-1/sqrt(fan_in)). Deterministic in `seed`.
  static SirenNetwork init(int width, int hidden_layers, double omega, std::uint64_t seed);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t parameter_count() const;

  /// Flattened parameters: per layer, weights row-major then biases.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& theta);

  /// Rounds every parameter (and omega) to the nearest float. The .isw
  /// payload is single precision, so a rounded net round-trips exactly.
  void round_to_float();

  double eval(const Point3& p) const;

 private:
  std::vector<DenseLayer> layers_;
};

/// Values and input Jacobians for a batch, plus what the backward pass needs.
struct DualBatch {
  Eigen::VectorXd values;
  Eigen::Matrix3Xd jacobians;
  // Per layer: input activations [x | dx/dp_x | dx/dp_y | dx/dp_z] and
  // the sin/cos of omega * pre-activation for hidden layers.
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> pre_tangents;
  std::vector<Eigen::MatrixXd> sines;
  std::vector<Eigen::MatrixXd> cosines;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  RowJacobian jacobian(std::size_t i) const { return jacobians.col(static_cast<Eigen::Index>(i)); }
};

DualBatch forward_with_jacobian(const SirenNetwork& net, std::span<const Point3> batch);

enum class LossPrimitive {
  AbsValue,         // |f - target|
  ExpAbsValue,      // exp(-alpha |f|)
  OneMinusCos,      // 1 - cos(J, n)
  OneMinusAbsCos,   // 1 - |cos(J, n)|
  EikonalResidual,  // |1 - ||J|| |
};

/// Maps "abs", "exp_abs", "one_minus_cos", "one_minus_abs_cos", "eikonal".
LossPrimitive parse_loss_primitive(std::string_view name);
std::string_view to_string(LossPrimitive p);

/// weight * (1/normalizer) * sum_{i in [begin,end)} v_i * primitive(f_i, J_i)
struct LossTerm {
  std::string name;
  LossPrimitive primitive = LossPrimitive::AbsValue;
  double weight = 1.0;
  std::size_t begin = 0;
  std::size_t end = 0;
  double normalizer = 1.0;
  std::vector<double> point_weights;  // empty: all ones
  std::vector<double> value_targets;  // AbsValue only; empty: zeros
  std::vector<Vec3> directions;       // cosine primitives
  double alpha = 100.0;               // ExpAbsValue
};

struct CompositeLoss {
  std::vector<LossTerm> terms;
};

struct LossResult {
  double total = 0.0;
  std::vector<double> term_values;  // unweighted: sum / normalizer
  Eigen::VectorXd gradient;         // d total / d theta, same layout as parameters()
};

/// Evaluates the loss and, when requested, its exact parameter gradient
/// (including the mixed d^2 f / d theta d p terms). Kinks take subgradient 0.
LossResult evaluate_loss(const SirenNetwork& net, std::span<const Point3> batch,
                         const CompositeLoss& loss, bool with_gradient = true);

inline LossResult loss_parameter_gradient(const SirenNetwork& net, std::span<const Point3> batch,
                                          const CompositeLoss& loss) {
  return evaluate_loss(net, batch, loss, true);
}

/// ImplicitField view of a network. Holds its own copy of the parameters.
class SirenField final : public ImplicitField {
 public:
  explicit SirenField(SirenNetwork net) : net_(std::move(net)) {}

  double eval(const Point3& p) const override { return net_.eval(p); }
  std::optional<RowJacobian> try_jacobian(const Point3& p) const override;
  void evaluate(std::span<const Point3> points, std::span<double> values,
                std::span<RowJacobian> jacobians) const override;

  const SirenNetwork& network() const { return net_; }

 private:
  SirenNetwork net_;
};

}  // namespace iso
