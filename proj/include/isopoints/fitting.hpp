#pragma once

#include <isopoints/field.hpp>
#include <isopoints/isoextract.hpp>
#include <isopoints/siren.hpp>
#include <isopoints/spatial.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace iso {

struct FitConfig {
  double gamma_on = 1000.0;
  double gamma_normal = 100.0;
  double gamma_off = 50.0;
  double gamma_eik = 100.0;
  double alpha_off = 100.0;
  double sigma_n = 60.0;  // degrees
  int warmup_iters = 300;
  int iso_update_period = 2000;
  double iso_init_subsample = 1.0 / 8.0;
  int iters = 5000;
  int batch_size = 2048;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  bool outlier_weighting = true;
  bool iso_losses = true;
  bool psi_literal = false;
  bool outlier_literal_min = false;
  // Network shape.
  int width = 256;
  int hidden_layers = 3;
  double omega = 30.0;
  // Iso-point handling.
  int pca_k = 16;
  bool pca_filter = false;  // one bilateral pass over the PCA normals
  int iso_batch = 0;        // iso-points per step; 0 uses all of them
  int log_every = 50;

  void validate() const;
  bool uses_iso_points() const { return iso_losses || outlier_weighting; }
};

/// Angular agreement of two unit normals. The default form is 1 at alignment
/// and exp(-((1 - n_p.n_q) / (1 - cos sigma_n))^2) in general; `literal`
/// evaluates exp(-(1 - (1 - n_p.n_q) / (1 - cos sigma_n))^2).
double psi(const Vec3& n_p, const Vec3& n_q, double sigma_n_deg, bool literal);

/// exp(-(n_p . d)^2 / sigma_p)
inline double anisotropic_weight(const Vec3& n_p, const Vec3& d, double sigma_p) {
  const double along = n_p.dot(d);
  return std::exp(-along * along / sigma_p);
}

/// Bilateral outlier weight v(q) in [0,1]: the max over the K nearest
/// iso-points of phi(n_p, p - q) * psi(n_p, n_q), or with
/// cfg.outlier_literal_min the min over every iso-point.
double outlier_weight(const Point3& q, const Vec3& n_q, const IsoPointSet& iso, const KnnIndex& iso_index,
                      const SamplerConfig& sampler, const FitConfig& cfg);

struct TrainBatch {
  std::vector<Point3> surface_points;
  std::vector<Vec3> surface_normals;
  std::vector<Point3> off_points;
};

struct BaselineLosses {
  double on_sdf = 0.0;
  double normal = 0.0;
  double off_sdf = 0.0;
  double eikonal = 0.0;
};

/// Loss terms over the batch laid out as [surface | off-surface], starting
/// at row `offset`. Empty `weights` means v = 1.
std::vector<LossTerm> baseline_terms(const TrainBatch& batch, const FitConfig& cfg,
                                     const std::vector<double>& weights, std::size_t offset = 0);

BaselineLosses baseline_losses(const SirenNetwork& net, const TrainBatch& batch, const FitConfig& cfg,
                               const std::vector<double>& weights);

struct IsoLosses {
  double iso_sdf = 0.0;
  double iso_normal = 0.0;
};

/// Mean |f| over the iso-points and mean 1 - |cos(J, n_pca)|.
IsoLosses iso_losses(const SirenNetwork& net, const IsoPointSet& iso, const std::vector<Vec3>& pca_normals);

/// PCA normals of every iso-point, oriented by the iso normals. Degenerate
/// neighborhoods fall back to the iso normal.
std::vector<Vec3> iso_pca_normals(const IsoPointSet& iso, const KnnIndex& index, int k,
                                  const SamplerConfig& sampler, bool filter);

struct LogEntry {
  int iter = 0;
  double on_sdf = 0.0;
  double normal = 0.0;
  double off_sdf = 0.0;
  double eikonal = 0.0;
  std::optional<double> iso_sdf;
  std::optional<double> iso_normal;
  double total = 0.0;
  double mean_weight = 1.0;
  double min_weight = 1.0;
  double wall_seconds = 0.0;
};

enum class IsoStrategy { None, Uniform, Curvature, Loss };

/// Optional behavior on top of the point-cloud objective.
struct FitHooks {
  /// When set, iso-points are supervised by this field (|f - s| and
  /// 1 - cos(J, grad s)) instead of the PCA regularizers, and outlier
  /// weighting is off.
  const ImplicitField* supervisor = nullptr;
  IsoStrategy strategy = IsoStrategy::Uniform;
  int checkpoint_every = 0;
  /// Called after `iter` completed steps; `train_seconds` excludes hook time.
  std::function<void(int iter, const SirenNetwork& net, double train_seconds)> on_checkpoint;
  /// Called after each iso-point update with the training iso set and the
  /// outlier weight of every cloud point (empty when weighting is off).
  std::function<void(int iter, const IsoPointSet& iso, const std::vector<double>& cloud_weights)> on_iso_update;
  bool report_cloud_weights = false;
};

struct FitResult {
  SirenNetwork net;  // parameters rounded to single precision
  std::vector<LogEntry> log;
  std::vector<int> iso_update_iters;
  IsoPointSet iso;
  int iso_failures = 0;
};

/// Iterations at which iso-points are (re)extracted: warmup, warmup + period, ...
std::vector<int> iso_schedule(const FitConfig& cfg);

/// Trains a sine network on an oriented point cloud with Adam
/// (beta1 0.9, beta2 0.999, eps 1e-8). Deterministic in cfg.seed.
FitResult fit(const OrientedPoints& cloud, const FitConfig& cfg, const SamplerConfig& sampler,
              const FitHooks& hooks = {});

}  // namespace iso
