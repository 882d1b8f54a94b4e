#include <isopoints/siren.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace iso {

namespace {

inline double sign_or_zero(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void check_layers(const std::vector<DenseLayer>& layers) {
  if (layers.empty()) throw PreconditionError("network needs at least one layer");
  if (layers.front().weight.cols() != 3) throw PreconditionError("input dimension must be 3");
  if (layers.back().weight.rows() != 1) throw PreconditionError("output dimension must be 1");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.bias.size() != layer.weight.rows()) throw PreconditionError("bias size mismatch");
    if (l > 0 && layers[l - 1].weight.rows() != layer.weight.cols())
      throw PreconditionError("consecutive layer dimensions disagree");
    if (!(layer.omega > 0.0)) throw PreconditionError("omega must be positive");
    if (!layer.weight.allFinite() || !layer.bias.allFinite())
      throw PreconditionError("non-finite parameter");
  }
}

}  // namespace

SirenNetwork::SirenNetwork(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  check_layers(layers_);
}

SirenNetwork SirenNetwork::init(int width, int hidden_layers, double omega, std::uint64_t seed) {
  if (width < 1 || hidden_layers < 1) throw PreconditionError("width and hidden_layers must be >= 1");
  if (!(omega > 0.0)) throw PreconditionError("omega must be positive");
  std::mt19937_64 rng(seed);
  auto uniform_fill = [&rng](Eigen::MatrixXd& m, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
  };

  std::vector<DenseLayer> layers;
  int fan_in = 3;
  for (int l = 0; l <= hidden_layers; ++l) {
    const int fan_out = l == hidden_layers ? 1 : width;
    DenseLayer layer;
    layer.omega = omega;
    layer.weight.resize(fan_out, fan_in);
    const double w_bound = l == 0 ? 1.0 / fan_in : std::sqrt(6.0 / fan_in) / omega;
    uniform_fill(layer.weight, w_bound);
    Eigen::MatrixXd b(fan_out, 1);
    uniform_fill(b, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    layer.bias = b.col(0);
    layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return SirenNetwork(std::move(layers));
}

std::size_t SirenNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Eigen::VectorXd SirenNetwork::parameters() const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) theta[k++] = l.weight(r, c);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) theta[k++] = l.bias[r];
  }
  return theta;
}

void SirenNetwork::set_parameters(const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != parameter_count())
    throw PreconditionError("parameter vector has the wrong length");
  Eigen::Index k = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = theta[k++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = theta[k++];
  }
}

void SirenNetwork::round_to_float() {
  auto to_f = [](double x) { return static_cast<double>(static_cast<float>(x)); };
  for (auto& l : layers_) {
    l.weight = l.weight.unaryExpr(to_f);
    l.bias = l.bias.unaryExpr(to_f);
    l.omega = to_f(l.omega);
  }
}

double SirenNetwork::eval(const Point3& p) const {
  Eigen::VectorXd x = p;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    Eigen::VectorXd z = layer.weight * x + layer.bias;
    if (l + 1 < layers_.size())
      x = (layer.omega * z).array().sin().matrix();
    else
      x = std::move(z);
  }
  return x[0];
}

DualBatch forward_with_jacobian(const SirenNetwork& net, std::span<const Point3> batch) {
  if (batch.empty()) throw PreconditionError("batch must be nonempty");
  const auto& layers = net.layers();
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());

  DualBatch out;
  out.inputs.reserve(layers.size());

  // Column blocks: [values | d/dx | d/dy | d/dz], each n wide.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 4 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.col(i) = batch[static_cast<std::size_t>(i)];
    for (int k = 0; k < 3; ++k) a(k, (k + 1) * n + i) = 1.0;
  }

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    Eigen::MatrixXd z;
    z.noalias() = layer.weight * a;
    z.leftCols(n).colwise() += layer.bias;
    out.inputs.push_back(std::move(a));
    if (l + 1 == layers.size()) {
      out.values = z.row(0).head(n).transpose();
      out.jacobians.resize(3, n);
      for (int k = 0; k < 3; ++k) out.jacobians.row(k) = z.row(0).segment((k + 1) * n, n);
      break;
    }
    const double w = layer.omega;
    Eigen::MatrixXd s = (w * z.leftCols(n)).array().sin().matrix();
    Eigen::MatrixXd c = (w * z.leftCols(n)).array().cos().matrix();
    a.resize(z.rows(), 4 * n);
    a.leftCols(n) = s;
    for (int k = 1; k <= 3; ++k)
      a.middleCols(k * n, n) = (w * c.array() * z.middleCols(k * n, n).array()).matrix();
    out.pre_tangents.push_back(z.rightCols(3 * n));
    out.sines.push_back(std::move(s));
    out.cosines.push_back(std::move(c));
  }
  return out;
}

LossPrimitive parse_loss_primitive(std::string_view name) {
  if (name == "abs") return LossPrimitive::AbsValue;
  if (name == "exp_abs") return LossPrimitive::ExpAbsValue;
  if (name == "one_minus_cos") return LossPrimitive::OneMinusCos;
  if (name == "one_minus_abs_cos") return LossPrimitive::OneMinusAbsCos;
  if (name == "eikonal") return LossPrimitive::EikonalResidual;
  throw UnsupportedLoss("unsupported loss primitive '" + std::string(name) + "'");
}

std::string_view to_string(LossPrimitive p) {
  switch (p) {
    case LossPrimitive::AbsValue: return "abs";
    case LossPrimitive::ExpAbsValue: return "exp_abs";
    case LossPrimitive::OneMinusCos: return "one_minus_cos";
    case LossPrimitive::OneMinusAbsCos: return "one_minus_abs_cos";
    case LossPrimitive::EikonalResidual: return "eikonal";
  }
  return "?";
}

namespace {

void validate_term(const LossTerm& t, std::size_t batch_size) {
  switch (t.primitive) {
    case LossPrimitive::AbsValue:
    case LossPrimitive::ExpAbsValue:
    case LossPrimitive::OneMinusCos:
    case LossPrimitive::OneMinusAbsCos:
    case LossPrimitive::EikonalResidual:
      break;
    default:
      throw UnsupportedLoss("unsupported loss primitive in term '" + t.name + "'");
  }
  if (t.begin > t.end || t.end > batch_size) throw PreconditionError("loss term rows out of range");
  const std::size_t m = t.end - t.begin;
  if (!t.point_weights.empty() && t.point_weights.size() != m)
    throw PreconditionError("point_weights length mismatch in '" + t.name + "'");
  if (!t.value_targets.empty() && t.value_targets.size() != m)
    throw PreconditionError("value_targets length mismatch in '" + t.name + "'");
  const bool needs_dir =
      t.primitive == LossPrimitive::OneMinusCos || t.primitive == LossPrimitive::OneMinusAbsCos;
  if (needs_dir && t.directions.size() != m)
    throw PreconditionError("directions length mismatch in '" + t.name + "'");
  if (!(t.normalizer > 0.0)) throw PreconditionError("normalizer must be positive");
}

// cos(J, n) and d cos / d J. Zero-norm inputs give cos = 0 with zero gradient.
inline double cosine(const Vec3& j, const Vec3& dir, Vec3& dcos) {
  const double jn = j.norm();
  const double dn = dir.norm();
  if (jn == 0.0 || dn == 0.0) {
    dcos.setZero();
    return 0.0;
  }
  const Vec3 d = dir / dn;
  const double c = j.dot(d) / jn;
  dcos = d / jn - (c / (jn * jn)) * j;
  return c;
}

}  // namespace

LossResult evaluate_loss(const SirenNetwork& net, std::span<const Point3> batch,
                         const CompositeLoss& loss, bool with_gradient) {
  for (const auto& t : loss.terms) validate_term(t, batch.size());
  const DualBatch fw = forward_with_jacobian(net, batch);
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());

  LossResult result;
  result.term_values.reserve(loss.terms.size());
  // Output adjoints: row 0 block 0 = dL/df, blocks 1..3 = dL/dJ.
  Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(4 * n);

  for (const auto& t : loss.terms) {
    double sum = 0.0;
    for (std::size_t r = t.begin; r < t.end; ++r) {
      const std::size_t m = r - t.begin;
      const Eigen::Index i = static_cast<Eigen::Index>(r);
      const double v = t.point_weights.empty() ? 1.0 : t.point_weights[m];
      const double c = t.weight * v / t.normalizer;
      const double f = fw.values[i];
      const Vec3 j = fw.jacobians.col(i);
      double value = 0.0;
      double df = 0.0;
      Vec3 dj = Vec3::Zero();
      switch (t.primitive) {
        case LossPrimitive::AbsValue: {
          const double e = f - (t.value_targets.empty() ? 0.0 : t.value_targets[m]);
          value = std::abs(e);
          df = sign_or_zero(e);
          break;
        }
        case LossPrimitive::ExpAbsValue: {
          value = std::exp(-t.alpha * std::abs(f));
          df = -t.alpha * sign_or_zero(f) * value;
          break;
        }
        case LossPrimitive::OneMinusCos: {
          Vec3 dcos;
          const double cs = cosine(j, t.directions[m], dcos);
          value = 1.0 - cs;
          dj = -dcos;
          break;
        }
        case LossPrimitive::OneMinusAbsCos: {
          Vec3 dcos;
          const double cs = cosine(j, t.directions[m], dcos);
          value = 1.0 - std::abs(cs);
          dj = -sign_or_zero(cs) * dcos;
          break;
        }
        case LossPrimitive::EikonalResidual: {
          const double jn = j.norm();
          value = std::abs(1.0 - jn);
          if (jn > 0.0) dj = -sign_or_zero(1.0 - jn) / jn * j;
          break;
        }
      }
      sum += v * value;
      if (with_gradient) {
        g[i] += c * df;
        for (int k = 0; k < 3; ++k) g[(k + 1) * n + i] += c * dj[k];
      }
    }
    const double term_value = sum / t.normalizer;
    result.term_values.push_back(term_value);
    result.total += t.weight * term_value;
  }
  if (!with_gradient) return result;

  const auto& layers = net.layers();
  const std::size_t depth = layers.size();
  std::vector<Eigen::MatrixXd> grad_w(depth);
  std::vector<Eigen::VectorXd> grad_b(depth);

  Eigen::MatrixXd zbar = g;  // adjoint of the last layer's pre-activation
  for (std::size_t l = depth; l-- > 0;) {
    const auto& layer = layers[l];
    if (l + 1 < depth) {
      // zbar currently holds the adjoint of this layer's activations.
      const double w = layer.omega;
      const auto& s = fw.sines[l];
      const auto& c = fw.cosines[l];
      const auto& zt = fw.pre_tangents[l];
      Eigen::ArrayXXd mix = Eigen::ArrayXXd::Zero(s.rows(), n);
      for (int k = 0; k < 3; ++k)
        mix += zbar.middleCols((k + 1) * n, n).array() * zt.middleCols(k * n, n).array();
      Eigen::MatrixXd next(s.rows(), 4 * n);
      next.leftCols(n) = (w * c.array() * zbar.leftCols(n).array() - w * w * s.array() * mix).matrix();
      for (int k = 1; k <= 3; ++k)
        next.middleCols(k * n, n) = (w * c.array() * zbar.middleCols(k * n, n).array()).matrix();
      zbar = std::move(next);
    }
    grad_w[l].noalias() = zbar * fw.inputs[l].transpose();
    grad_b[l] = zbar.leftCols(n).rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd abar;
      abar.noalias() = layer.weight.transpose() * zbar;
      zbar = std::move(abar);
    }
  }

  result.gradient.resize(static_cast<Eigen::Index>(net.parameter_count()));
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < depth; ++l) {
    for (Eigen::Index r = 0; r < grad_w[l].rows(); ++r)
      for (Eigen::Index c = 0; c < grad_w[l].cols(); ++c) result.gradient[k++] = grad_w[l](r, c);
    for (Eigen::Index r = 0; r < grad_b[l].size(); ++r) result.gradient[k++] = grad_b[l][r];
  }
  return result;
}

std::optional<RowJacobian> SirenField::try_jacobian(const Point3& p) const {
  const DualBatch fw = forward_with_jacobian(net_, std::span<const Point3>(&p, 1));
  return RowJacobian(fw.jacobians.col(0));
}

void SirenField::evaluate(std::span<const Point3> points, std::span<double> values,
                          std::span<RowJacobian> jacobians) const {
  constexpr std::size_t kChunk = 2048;
  for (std::size_t start = 0; start < points.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, points.size() - start);
    const DualBatch fw = forward_with_jacobian(net_, points.subspan(start, len));
    for (std::size_t i = 0; i < len; ++i) {
      values[start + i] = fw.values[static_cast<Eigen::Index>(i)];
      jacobians[start + i] = fw.jacobians.col(static_cast<Eigen::Index>(i));
    }
  }
}

}  // namespace iso
