#pragma once

#include <isopoints/fitting.hpp>
#include <isopoints/isoextract.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace iso {

IsoStrategy parse_strategy(const std::string& name);
std::string to_string(IsoStrategy s);

/// About n points spread over every part of the zero set that clipped Newton
/// projection reaches from n uniform seeds in the domain. Returns what the
/// projection alone found when uniformization fails, possibly nothing.
OrientedPoints sample_zero_set(const ImplicitField& field, std::size_t n, const SamplerConfig& sampler,
                               std::uint64_t seed);

struct BenchConfig {
  std::string field = "torus";
  std::vector<IsoStrategy> strategies{IsoStrategy::Uniform, IsoStrategy::Curvature, IsoStrategy::Loss,
                                      IsoStrategy::None};
  FitConfig fit;
  SamplerConfig sampler;
  std::size_t cloud_size = 20000;    // training samples of the true surface
  std::size_t truth_size = 20000;    // reference samples for chamfer
  std::size_t eval_size = 2000;      // iso-points extracted from the net per checkpoint
  int eval_every = 250;

  /// Desk-scale defaults: a small network and batch so that every strategy
  /// fits in a few minutes on one core.
  static BenchConfig desk_scale();
};

struct BenchRow {
  std::string strategy;
  int iter = 0;
  double wall_seconds = 0.0;
  double chamfer_pos = 0.0;
  double chamfer_normal = 0.0;
};

/// Fits one net per strategy to samples of the analytic field and records
/// the chamfer of the net's zero set every eval_every iterations.
std::vector<BenchRow> run_sampling_benchmark(const BenchConfig& cfg);

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

struct PerfReport {
  double extract_seconds = 0.0;  // one warm-started extraction
  double step_seconds = 0.0;     // one training step
  double ratio = 0.0;
  std::size_t iso_count = 0;
};

/// Times a warm-started extraction of `n_iso` points against one training
/// step at the given width and batch size. The net is first fit for
/// `pretrain_iters` steps at the same width so its zero set is a surface.
/// The warm seeds are a cold extraction started from the training cloud.
PerfReport measure_extraction_cost(std::size_t n_iso = 2000, int width = 256, int batch_size = 2048,
                                   int pretrain_iters = 20, std::uint64_t seed = 0);

}  // namespace iso
