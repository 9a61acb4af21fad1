#pragma once

// Command implementations behind the `smfd` tool. Each command returns a
// process exit code and reports problems on `err`.

#include "smfd/baselines.hpp"
#include "smfd/diagnostics.hpp"
#include "smfd/errors.hpp"
#include "smfd/io.hpp"
#include "smfd/metrics.hpp"
#include "smfd/sampler.hpp"
#include "smfd/synth.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace smfd {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;  // unexpected internal error
inline constexpr int usage = 2;
inline constexpr int io = 3;
inline constexpr int missing_data = 4;
inline constexpr int not_converged = 5;
inline constexpr int degenerate = 6;
}  // namespace exit_code

namespace fs = std::filesystem;

/// Runs fn(k) for k in [0, n) on up to hardware_concurrency threads. Results
/// must be written to per-k slots; the first exception is rethrown.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t k = next++; k < n; k = next++) fn(k);
        } catch (...) {
          errors[w] = std::current_exception();
          next = n;
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct CropRegion {
  std::size_t row, col, height, width;
};

/// "r0,c0,h,w"
inline std::optional<CropRegion> parse_crop(std::string_view s) {
  const auto parts = split(s, ',');
  if (parts.size() != 4) return std::nullopt;
  CropRegion c{};
  if (!parse_int(parts[0], c.row) || !parse_int(parts[1], c.col) || !parse_int(parts[2], c.height) ||
      !parse_int(parts[3], c.width) || c.height == 0 || c.width == 0)
    return std::nullopt;
  return c;
}

inline std::optional<PriorVariant> parse_variant(std::string_view s) {
  if (s == "igmrf") return PriorVariant::igmrf;
  if (s == "higmrf") return PriorVariant::higmrf;
  return std::nullopt;
}

namespace detail {

/// Loads an optional config file and overrides into the given targets.
/// Returns an exit code, or ok.
template <typename... Targets>
int load_config(const std::optional<fs::path>& path, const std::vector<std::string>& overrides,
                std::ostream& err, Targets&... targets) {
  try {
    KeyValueConfig cfg;
    if (path) cfg = KeyValueConfig::load(*path);
    for (const auto& kv : overrides) cfg.set_assignment(kv);
    apply_config(cfg, targets...);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::io;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  }
  return exit_code::ok;
}

inline fs::path sibling(const fs::path& p, const std::string& suffix) {
  return p.parent_path() / (p.stem().string() + suffix);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  std::optional<fs::path> config;
  std::vector<std::string> overrides;
  fs::path output_dir;
};

inline std::string manifest_csv(const SynthConfig& cfg, const std::vector<SynthPair>& pairs) {
  std::string s = echo_lines("synth", echo(cfg));
  s += "index,spot_count,centers,amplitudes,target_snr_db,realized_snr_db,seed\n";
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    std::string centers, amps;
    for (std::size_t i = 0; i < p.spots.size(); ++i) {
      if (i) centers += ';', amps += ';';
      centers += format_double(p.spots[i].row) + ":" + format_double(p.spots[i].col);
      amps += format_double(p.spots[i].amplitude);
    }
    s += std::to_string(k) + "," + std::to_string(p.spots.size()) + "," + centers + "," + amps + "," +
         format_double(p.target_snr_db) + "," + format_double(p.realized_snr_db) + "," +
         std::to_string(p.seed) + "\n";
  }
  return s;
}

inline int cmd_synth(const SynthOptions& opt, std::ostream& err) {
  SynthConfig cfg;
  if (int rc = detail::load_config(opt.config, opt.overrides, err, cfg); rc != exit_code::ok) return rc;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    err << "error: invalid synth config: " << e.what() << "\n";
    return exit_code::usage;
  }
  std::error_code ec;
  if (!fs::is_directory(opt.output_dir, ec)) {
    err << "error: output directory '" << opt.output_dir.string() << "' does not exist\n";
    return exit_code::io;
  }
  std::vector<SynthPair> pairs;
  try {
    pairs = generate_corpus(cfg);
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << " (set spots_min >= 1)\n";
    return exit_code::usage;
  }
  try {
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      write_raster(opt.output_dir / ("truth_" + std::to_string(k) + ".csv"), pairs[k].truth);
      write_raster(opt.output_dir / ("noisy_" + std::to_string(k) + ".csv"), pairs[k].noisy);
    }
    write_file(opt.output_dir / "manifest.csv", manifest_csv(cfg, pairs));
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::io;
  }
  return exit_code::ok;
}

// ---------------------------------------------------------------------------
// denoise

struct DenoiseOptions {
  fs::path input;
  std::optional<fs::path> config;
  std::vector<std::string> overrides;
  std::string variant = "higmrf";
  fs::path output;
  std::optional<fs::path> mask_output;   // default: <output stem>_mask.csv
  std::optional<fs::path> trace_output;  // default: <output stem>_trace.csv
  std::optional<std::string> crop;
  std::optional<std::uint64_t> seed;
};

inline std::string trace_csv(const DenoiseResult& r) {
  std::string s = "iteration,kappa_l,kappa_f,gamma1,gamma2,gamma3\n";
  for (std::size_t t = 0; t < r.theta_trace.size(); ++t) {
    const auto& th = r.theta_trace[t];
    const auto& g = r.gamma_trace[t];
    s += std::to_string(t + 1) + "," + format_double(th.kappa_l) + "," + format_double(th.kappa_f) + "," +
         format_double(g[0]) + "," + format_double(g[1]) + "," + format_double(g[2]) + "\n";
  }
  return s;
}

inline int cmd_denoise(const DenoiseOptions& opt, std::ostream& err) {
  HyperParams hp;
  if (int rc = detail::load_config(opt.config, opt.overrides, err, hp); rc != exit_code::ok) return rc;
  if (opt.seed) hp.seed = *opt.seed;
  const auto variant = parse_variant(opt.variant);
  if (!variant) {
    err << "error: unknown variant '" << opt.variant << "' (expected igmrf or higmrf)\n";
    return exit_code::usage;
  }
  try {
    hp.validate();
  } catch (const std::invalid_argument& e) {
    err << "error: invalid hyper-parameters: " << e.what() << "\n";
    return exit_code::usage;
  }

  Raster y;
  try {
    y = read_raster(opt.input);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::io;
  }

  std::string crop_echo = "none";
  if (opt.crop) {
    const auto c = parse_crop(*opt.crop);
    if (!c || c->row + c->height > y.rows() || c->col + c->width > y.cols()) {
      err << "error: invalid crop '" << *opt.crop << "' for a " << y.rows() << "x" << y.cols()
          << " raster (expected r0,c0,h,w inside the lattice)\n";
      return exit_code::usage;
    }
    y = y.crop(c->row, c->col, c->height, c->width);
    crop_echo = *opt.crop;
  }
  if (y.size() < 2) {
    err << "error: raster needs at least 2 pixels\n";
    return exit_code::usage;
  }

  DenoiseResult result;
  try {
    result = denoise(y, hp, *variant);
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::failure;
  }

  const fs::path mask_path = opt.mask_output.value_or(detail::sibling(opt.output, "_mask.csv"));
  const fs::path trace_path = opt.trace_output.value_or(detail::sibling(opt.output, "_trace.csv"));
  std::string header = "# denoise.input=" + opt.input.string() + "\n# denoise.variant=" +
                       to_string(*variant) + "\n# denoise.crop=" + crop_echo + "\n# denoise.rows=" +
                       std::to_string(y.rows()) + "\n# denoise.cols=" + std::to_string(y.cols()) +
                       "\n# denoise.units=normalised [0,1]: offset=" +
                       format_double(result.normalization.offset) +
                       " scale=" + format_double(result.normalization.scale) + "\n";
  header += echo_lines("hyper", echo(hp));
  try {
    write_raster(opt.output, result.posterior_mean);
    write_mask(mask_path, result.final_mask);
    write_file(trace_path, header + trace_csv(result));
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::io;
  }
  return exit_code::ok;
}

// ---------------------------------------------------------------------------
// bench

struct BenchOptions {
  fs::path corpus_dir;
  std::string methods = "ga,av,wi,nlm,igmrf,higmrf";
  std::optional<fs::path> config;
  std::vector<std::string> overrides;
  fs::path report;
};

struct BenchMethod {
  std::string name;
  std::variant<Baseline, PriorVariant, fs::path> kind;  // path = external outputs dir
};

inline std::optional<BenchMethod> parse_method(std::string_view s) {
  const std::string name(trim(s));
  if (name == "ga") return BenchMethod{name, Baseline::gaussian};
  if (name == "av") return BenchMethod{name, Baseline::average};
  if (name == "wi") return BenchMethod{name, Baseline::wiener};
  if (name == "nlm") return BenchMethod{name, Baseline::nlm};
  if (name == "igmrf") return BenchMethod{name, PriorVariant::igmrf};
  if (name == "higmrf") return BenchMethod{name, PriorVariant::higmrf};
  constexpr std::string_view ext = "external:";
  if (name.starts_with(ext) && name.size() > ext.size())
    return BenchMethod{name, fs::path(name.substr(ext.size()))};
  return std::nullopt;
}

/// Pre-computed output of an external method for corpus image k.
inline fs::path external_output(const fs::path& dir, std::size_t k) {
  return dir / ("denoised_" + std::to_string(k) + ".csv");
}

struct BenchRow {
  std::size_t image;
  std::string method;
  MetricsReport metrics;
  double wall_ms;
};

struct BenchAggregate {
  std::string method;
  MetricsReport mean, sd;
  double wall_ms_mean, wall_ms_sd;
};

/// Mean and sample standard deviation per method, in method order.
inline std::vector<BenchAggregate> aggregate(const std::vector<BenchRow>& rows,
                                             const std::vector<std::string>& methods) {
  std::vector<BenchAggregate> out;
  for (const auto& m : methods) {
    std::vector<std::array<double, 5>> v;
    for (const auto& r : rows)
      if (r.method == m)
        v.push_back({r.metrics.rmse, r.metrics.psnr_db, r.metrics.kld, r.metrics.ssim, r.wall_ms});
    std::array<double, 5> mean{}, sd{};
    const double n = static_cast<double>(v.size());
    for (const auto& x : v)
      for (std::size_t c = 0; c < 5; ++c) mean[c] += x[c];
    for (auto& x : mean) x /= n;
    for (const auto& x : v)
      for (std::size_t c = 0; c < 5; ++c) sd[c] += (x[c] - mean[c]) * (x[c] - mean[c]);
    for (auto& x : sd) x = v.size() > 1 ? std::sqrt(x / (n - 1.0)) : 0.0;
    out.push_back({m, {mean[0], mean[1], mean[2], mean[3]}, {sd[0], sd[1], sd[2], sd[3]}, mean[4], sd[4]});
  }
  return out;
}

/// Metrics with undefined values (non-positive peak, unstable UQI) become NaN.
inline MetricsReport safe_evaluate(const Raster& estimate, const Raster& truth) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  MetricsReport m{rmse(estimate, truth), nan, kld(estimate, truth), nan};
  try { m.psnr_db = psnr(estimate, truth); } catch (const std::domain_error&) {}
  try { m.ssim = ssim(estimate, truth); } catch (const std::domain_error&) {}
  return m;
}

inline std::string bench_csv(const std::string& echo_header, const std::vector<BenchRow>& rows,
                             const std::vector<BenchAggregate>& aggs) {
  std::string s = echo_header;
  s += "image,method,rmse,psnr_db,kld,ssim,wall_ms,rmse_sd,psnr_db_sd,kld_sd,ssim_sd,wall_ms_sd\n";
  for (const auto& r : rows)
    s += std::to_string(r.image) + "," + r.method + "," + format_double(r.metrics.rmse) + "," +
         format_double(r.metrics.psnr_db) + "," + format_double(r.metrics.kld) + "," +
         format_double(r.metrics.ssim) + "," + format_double(r.wall_ms) + ",,,,,\n";
  for (const auto& a : aggs)
    s += "mean," + a.method + "," + format_double(a.mean.rmse) + "," + format_double(a.mean.psnr_db) + "," +
         format_double(a.mean.kld) + "," + format_double(a.mean.ssim) + "," + format_double(a.wall_ms_mean) +
         "," + format_double(a.sd.rmse) + "," + format_double(a.sd.psnr_db) + "," + format_double(a.sd.kld) +
         "," + format_double(a.sd.ssim) + "," + format_double(a.wall_ms_sd) + "\n";
  return s;
}

/// Image indices listed in a corpus manifest, plus its '#' echo lines.
struct Manifest {
  std::vector<std::size_t> images;
  std::string echo;
};

inline Manifest read_manifest(const fs::path& corpus_dir) {
  const std::string text = read_file(corpus_dir / "manifest.csv");
  Manifest m;
  bool header = true;
  for (auto line : split(text, '\n')) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      m.echo += std::string(line) + "\n";
      continue;
    }
    if (header) {
      header = false;
      continue;
    }
    std::size_t idx;
    if (!parse_int(split(line, ',').front(), idx)) throw IoError("manifest.csv: bad index in '" + std::string(line) + "'");
    m.images.push_back(idx);
  }
  return m;
}

inline int cmd_bench(const BenchOptions& opt, std::ostream& err) {
  HyperParams hp;
  FilterConfig filters;
  if (int rc = detail::load_config(opt.config, opt.overrides, err, hp, filters); rc != exit_code::ok) return rc;
  try {
    hp.validate();
    filters.validate();
  } catch (const std::invalid_argument& e) {
    err << "error: invalid config: " << e.what() << "\n";
    return exit_code::usage;
  }

  std::vector<BenchMethod> methods;
  std::vector<std::string> names;
  for (auto tok : split(opt.methods, ',')) {
    auto m = parse_method(tok);
    if (!m) {
      err << "error: unknown method '" << std::string(trim(tok))
          << "' (expected ga, av, wi, nlm, igmrf, higmrf or external:<dir>)\n";
      return exit_code::usage;
    }
    if (std::find(names.begin(), names.end(), m->name) != names.end()) continue;
    names.push_back(m->name);
    methods.push_back(std::move(*m));
  }

  Manifest manifest;
  try {
    manifest = read_manifest(opt.corpus_dir);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::io;
  }

  std::vector<std::string> gaps;
  for (const auto& m : methods)
    if (const auto* dir = std::get_if<fs::path>(&m.kind))
      for (auto k : manifest.images)
        if (!fs::exists(external_output(*dir, k))) gaps.push_back(external_output(*dir, k).string());
  if (!gaps.empty()) {
    err << "error: missing external outputs:\n";
    for (const auto& g : gaps) err << "  " << g << "\n";
    return exit_code::missing_data;
  }

  std::vector<Raster> truths, noisy;
  try {
    for (auto k : manifest.images) {
      truths.push_back(read_raster(opt.corpus_dir / ("truth_" + std::to_string(k) + ".csv")));
      noisy.push_back(read_raster(opt.corpus_dir / ("noisy_" + std::to_string(k) + ".csv")));
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::io;
  }

  const std::size_t n_images = manifest.images.size();
  std::vector<BenchRow> rows(n_images * methods.size());
  try {
    parallel_for(rows.size(), [&](std::size_t task) {
      const std::size_t i = task / methods.size();
      const auto& method = methods[task % methods.size()];
      const auto start = std::chrono::steady_clock::now();
      Raster estimate;
      if (const auto* b = std::get_if<Baseline>(&method.kind)) {
        estimate = apply_baseline(*b, noisy[i], filters);
      } else if (const auto* v = std::get_if<PriorVariant>(&method.kind)) {
        HyperParams image_hp = hp;
        image_hp.seed = hp.seed + manifest.images[i];
        estimate = denoise(noisy[i], image_hp, *v).posterior_mean;
      } else {
        estimate = read_raster(external_output(std::get<fs::path>(method.kind), manifest.images[i]));
      }
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      if (!estimate.same_shape(truths[i]))
        throw IoError(method.name + " output for image " + std::to_string(manifest.images[i]) +
                      " has the wrong shape");
      rows[task] = {manifest.images[i], method.name, safe_evaluate(estimate, truths[i]), ms};
    });
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::io;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::failure;
  }

  std::string header = "# bench.corpus=" + opt.corpus_dir.string() + "\n# bench.methods=";
  for (std::size_t k = 0; k < names.size(); ++k) header += (k ? "," : "") + names[k];
  header += "\n# bench.kld_bins=" + std::to_string(kDefaultKldBins) + "\n";
  header += echo_lines("hyper", echo(hp));
  header += echo_lines("filter", echo(filters));
  header += manifest.echo;
  try {
    write_file(opt.report, bench_csv(header, rows, aggregate(rows, names)));
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::io;
  }
  return exit_code::ok;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseOptions {
  fs::path input;
  std::optional<fs::path> config;
  std::vector<std::string> overrides;
  std::string variant = "higmrf";
  int chains = 4;
  fs::path report;
  std::optional<std::uint64_t> seed;
};

inline int cmd_diagnose(const DiagnoseOptions& opt, std::ostream& err) {
  if (opt.chains < 2) {
    err << "error: need at least 2 chains, got " << opt.chains << "\n";
    return exit_code::usage;
  }
  HyperParams hp;
  if (int rc = detail::load_config(opt.config, opt.overrides, err, hp); rc != exit_code::ok) return rc;
  if (opt.seed) hp.seed = *opt.seed;
  const auto variant = parse_variant(opt.variant);
  if (!variant) {
    err << "error: unknown variant '" << opt.variant << "'\n";
    return exit_code::usage;
  }
  try {
    hp.validate();
  } catch (const std::invalid_argument& e) {
    err << "error: invalid hyper-parameters: " << e.what() << "\n";
    return exit_code::usage;
  }
  Raster y;
  try {
    y = read_raster(opt.input);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::io;
  }

  std::vector<DenoiseResult> runs;
  try {
    runs = run_chains(y, hp, *variant, opt.chains);
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::failure;
  }

  const auto burn = static_cast<std::size_t>(hp.effective_burn_in());
  std::vector<std::vector<double>> kl, kf;
  for (const auto& r : runs) {
    std::vector<double> a, b;
    for (std::size_t t = burn; t < r.theta_trace.size(); ++t) {
      a.push_back(r.theta_trace[t].kappa_l);
      b.push_back(r.theta_trace[t].kappa_f);
    }
    kl.push_back(std::move(a));
    kf.push_back(std::move(b));
  }

  std::string s = "# diagnose.input=" + opt.input.string() + "\n# diagnose.variant=" + to_string(*variant) +
                  "\n# diagnose.chains=" + std::to_string(opt.chains) + "\n# diagnose.chain_seeds=seed+0..seed+" +
                  std::to_string(opt.chains - 1) + "\n# diagnose.threshold=" + format_double(kPsrfThreshold) + "\n";
  s += echo_lines("hyper", echo(hp));
  s += "parameter,psrf,converged\n";

  int rc = exit_code::ok;
  const std::size_t post = kl.front().size();
  if (post < 2) {
    // Too short to assess: same remedy as a failed check, lengthen the run.
    err << "warning: only " << post << " post-burn-in sample(s) per chain; PSRF needs at least 2\n";
    s += "kappa_l,nan,0\nkappa_f,nan,0\noverall,,0\n";
    rc = exit_code::not_converged;
  } else {
    try {
      std::map<std::string, TraceSet> traces;
      traces.emplace("kappa_f", TraceSet(kf));
      traces.emplace("kappa_l", TraceSet(kl));
      const auto report = convergence_report(traces);
      for (const auto& p : report.parameters)
        s += p.name + "," + format_double(p.psrf) + "," + (p.converged ? "1" : "0") + "\n";
      s += std::string("overall,,") + (report.converged ? "1" : "0") + "\n";
      rc = report.converged ? exit_code::ok : exit_code::not_converged;
    } catch (const DegenerateTraceError& e) {
      err << "error: " << e.what() << "\n";
      return exit_code::degenerate;
    }
  }
  try {
    write_file(opt.report, s);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::io;
  }
  return rc;
}

}  // namespace smfd
