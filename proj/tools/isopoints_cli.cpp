#include <isopoints/bench.hpp>
#include <isopoints/config.hpp>
#include <isopoints/field.hpp>
#include <isopoints/fitting.hpp>
#include <isopoints/io.hpp>
#include <isopoints/isoextract.hpp>
#include <isopoints/metrics.hpp>
#include <isopoints/siren.hpp>
#include <isopoints/synth.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

namespace {

enum Exit { kOk = 0, kFailure = 1, kBadArgs = 2, kExtraction = 3, kIo = 4, kNonFinite = 5 };

struct BadArgs : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Flags first, then the file; a file value never overrides a flag.
iso::RunConfig build_config(const std::string& config_path, const std::vector<std::string>& overrides) {
  iso::RunConfig rc;
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw BadArgs("--set expects key=value, got " + kv);
    rc.set(kv.substr(0, eq), kv.substr(eq + 1), iso::Provenance::Flag);
  }
  if (!config_path.empty()) rc.load_file(config_path);
  rc.sampler.validate();
  rc.fit.validate();
  return rc;
}

std::unique_ptr<iso::ImplicitField> load_field(const std::string& name) {
  if (auto shape = iso::make_named_shape(name)) return shape;
  if (ends_with(name, ".isw")) return std::make_unique<iso::SirenField>(iso::read_weights(name));
  throw BadArgs("--field must be sphere, torus, box or a .isw file");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw iso::IoError("cannot open " + path + " for writing");
  f << text;
  f.flush();
  if (!f) throw iso::IoError("write failed: " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iso-point extraction and neural implicit fitting"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;

  // extract
  auto* extract = app.add_subcommand("extract", "Extract iso-points from a field and write a PLY");
  std::string ex_field, ex_out;
  std::size_t ex_n = 0;
  std::uint64_t ex_seed = 0;
  std::optional<double> ex_eps;
  extract->add_option("--field", ex_field, "sphere | torus | box | weights.isw")->required();
  extract->add_option("--n", ex_n, "number of iso-points")->required();
  extract->add_option("--out", ex_out, "output PLY")->required();
  extract->add_option("--seed", ex_seed, "random seed");
  extract->add_option("--eps", ex_eps, "projection tolerance (default eps_end)");
  extract->add_option("--config", config_path, "key = value settings file");
  extract->add_option("--set", overrides, "key=value setting, repeatable");

  // fit
  auto* fitcmd = app.add_subcommand("fit", "Fit a sine network to an oriented point cloud");
  std::string fit_in, fit_out, fit_log;
  std::optional<int> fit_iters;
  std::optional<std::uint64_t> fit_seed;
  bool fit_baseline = false;
  fitcmd->add_option("--input", fit_in, "input PLY with normals")->required();
  fitcmd->add_option("--out", fit_out, "output weights (.isw)")->required();
  fitcmd->add_option("--iters", fit_iters, "training iterations")->required();
  fitcmd->add_flag("--baseline", fit_baseline, "disable iso losses and outlier weighting");
  fitcmd->add_option("--seed", fit_seed, "random seed");
  fitcmd->add_option("--log", fit_log, "training log CSV");
  fitcmd->add_option("--config", config_path, "key = value settings file");
  fitcmd->add_option("--set", overrides, "key=value setting, repeatable");

  // eval
  auto* eval = app.add_subcommand("eval", "Two-way chamfer between two PLY files");
  std::string ev_a, ev_b;
  bool ev_l1 = false;
  eval->add_option("--a", ev_a, "first PLY")->required();
  eval->add_option("--b", ev_b, "second PLY")->required();
  eval->add_flag("--l1", ev_l1, "unsquared distances");

  // bench
  auto* bench = app.add_subcommand("bench", "Compare iso-point sampling strategies over training time");
  std::string bn_field = "torus", bn_strategies = "uniform,curvature,loss,none", bn_csv;
  std::optional<int> bn_iters;
  std::optional<std::uint64_t> bn_seed;
  bool bn_perf = false;
  bench->add_option("--field", bn_field, "sphere | torus | box");
  bench->add_option("--strategies", bn_strategies, "comma-separated: uniform,curvature,loss,none");
  bench->add_option("--iters", bn_iters, "training iterations per strategy");
  bench->add_option("--seed", bn_seed, "random seed");
  bench->add_option("--csv", bn_csv, "output CSV");
  bench->add_flag("--perf", bn_perf, "time a warm 2000-point extraction against one training step");
  bench->add_option("--config", config_path, "key = value settings file");
  bench->add_option("--set", overrides, "key=value setting, repeatable");

  // synth
  auto* synth = app.add_subcommand("synth", "Write a seeded noisy point cloud of an analytic shape");
  iso::SynthConfig sy;
  std::string sy_out, sy_mask;
  synth->add_option("--shape", sy.shape, "sphere | torus | box");
  synth->add_option("--n", sy.n, "total points");
  synth->add_option("--noise", sy.noise, "normal-direction noise, fraction of the diagonal");
  synth->add_option("--outliers", sy.outlier_frac, "outlier fraction");
  synth->add_option("--seed", sy.seed, "random seed");
  synth->add_option("--out", sy_out, "output PLY")->required();
  synth->add_option("--mask", sy_mask, "optional file with one 0/1 outlier flag per point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kBadArgs;
  }

  try {
    if (*extract) {
      const iso::RunConfig rc = build_config(config_path, overrides);
      const auto field = load_field(ex_field);
      const double eps = ex_eps.value_or(rc.sampler.eps_end);
      const iso::IsoPointSet pts = iso::extract_iso_points(*field, std::nullopt, ex_n, rc.sampler, ex_seed, eps);
      iso::write_ply(ex_out, iso::OrientedPoints{pts.points, pts.normals});
      double residual_max = 0.0;
      for (const auto& p : pts.points) residual_max = std::max(residual_max, std::abs(field->eval(p)));
      const iso::Uniformity u = iso::uniformity(pts.points);
      const double eik = iso::eikonal_residual(*field, 10000, ex_seed);
      std::cout << pts.size() << ',' << iso::format_real(residual_max) << ',' << iso::format_real(eik) << ','
                << iso::format_real(u.nn_mean) << ',' << iso::format_real(u.nn_cv) << '\n';
    } else if (*fitcmd) {
      if (fit_iters) overrides.push_back("iters=" + std::to_string(*fit_iters));
      if (fit_seed) overrides.push_back("seed=" + std::to_string(*fit_seed));
      if (fit_baseline) {
        overrides.push_back("iso_losses=false");
        overrides.push_back("outlier_weighting=false");
      }
      const iso::RunConfig rc = build_config(config_path, overrides);
      const iso::OrientedPoints cloud = iso::read_ply(fit_in);
      const iso::FitResult res = iso::fit(cloud, rc.fit, rc.sampler);
      iso::write_weights(fit_out, res.net);
      if (!fit_log.empty()) iso::write_log_csv(fit_log, res.log);
    } else if (*eval) {
      const iso::OrientedPoints a = iso::read_ply(ev_a);
      const iso::OrientedPoints b = iso::read_ply(ev_b);
      const bool normals = a.has_normals() && b.has_normals();
      const iso::ChamferResult c =
          iso::chamfer(a, b, normals, ev_l1 ? iso::ChamferNorm::L1 : iso::ChamferNorm::Squared);
      std::cout << iso::format_real(c.pos) << ',' << iso::format_real(c.normal) << ',' << a.size() << ',' << b.size()
                << '\n';
    } else if (*bench) {
      iso::BenchConfig bc = iso::BenchConfig::desk_scale();
      iso::RunConfig rc;
      rc.sampler = bc.sampler;
      rc.fit = bc.fit;
      for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw BadArgs("--set expects key=value, got " + kv);
        rc.set(kv.substr(0, eq), kv.substr(eq + 1), iso::Provenance::Flag);
      }
      if (bn_iters) rc.set("iters", std::to_string(*bn_iters), iso::Provenance::Flag);
      if (bn_seed) rc.set("seed", std::to_string(*bn_seed), iso::Provenance::Flag);
      if (!config_path.empty()) rc.load_file(config_path);
      bc.sampler = rc.sampler;
      bc.fit = rc.fit;
      bc.field = bn_field;
      if (!iso::make_named_shape(bc.field)) throw BadArgs("--field must be sphere, torus or box");
      bc.strategies.clear();
      std::stringstream ss(bn_strategies);
      for (std::string s; std::getline(ss, s, ',');) bc.strategies.push_back(iso::parse_strategy(s));

      const auto rows = iso::run_sampling_benchmark(bc);
      std::ostringstream csv;
      iso::write_bench_csv(csv, rows);
      if (bn_csv.empty())
        std::cout << csv.str();
      else
        write_text(bn_csv, csv.str());
      if (bn_perf) {
        const iso::PerfReport p = iso::measure_extraction_cost(2000, 256, 2048, 20, bc.fit.seed);
        std::cerr << "perf: warm extraction of " << p.iso_count << " points " << p.extract_seconds
                  << " s, training step " << p.step_seconds << " s, ratio " << p.ratio << '\n';
      }
    } else if (*synth) {
      const iso::SynthCloud sc = iso::synthesize(sy);
      iso::write_ply(sy_out, sc.cloud);
      if (!sy_mask.empty()) {
        std::string mask;
        for (bool b : sc.is_outlier) mask += b ? "1\n" : "0\n";
        write_text(sy_mask, mask);
      }
    }
  } catch (const BadArgs& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadArgs;
  } catch (const iso::PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadArgs;
  } catch (const iso::ExtractionFailed& e) {
    std::cerr << "extraction failed: " << e.what() << '\n';
    return kExtraction;
  } catch (const iso::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const iso::NonFiniteLoss& e) {
    std::cerr << "non-finite loss at iteration " << e.iteration() << '\n';
    return kNonFinite;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
