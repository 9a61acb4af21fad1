// smfd: corpus generation, (H)IGMRF denoising, benchmarking and convergence
// diagnostics for single-molecule fluorescence images.

#include "smfd/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Bayesian (H)IGMRF denoising of single-molecule fluorescence images"};
  app.require_subcommand(1);

  smfd::SynthOptions synth;
  std::string synth_config, synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic truth/noisy corpus");
  synth_cmd->add_option("-c,--config", synth_config, "key=value config file");
  synth_cmd->add_option("--set", synth.overrides, "override a config key (key=value)");
  synth_cmd->add_option("-o,--out", synth_out, "existing output directory")->required();

  smfd::DenoiseOptions den;
  std::string den_input, den_config, den_out, den_mask, den_trace, den_crop;
  std::uint64_t den_seed = 0;
  auto* den_cmd = app.add_subcommand("denoise", "denoise one raster (CSV or PGM)");
  den_cmd->add_option("input", den_input, "input raster")->required();
  den_cmd->add_option("-c,--config", den_config, "key=value config file");
  den_cmd->add_option("--set", den.overrides, "override a config key (key=value)");
  den_cmd->add_option("--variant", den.variant, "igmrf or higmrf")->capture_default_str();
  den_cmd->add_option("-o,--out", den_out, "denoised raster, posterior mean of the signal (.csv or .pgm)")->required();
  den_cmd->add_option("--mask", den_mask, "final spot mask (default <out>_mask.csv)");
  den_cmd->add_option("--trace", den_trace, "trace CSV (default <out>_trace.csv)");
  den_cmd->add_option("--crop", den_crop, "process only r0,c0,h,w");
  auto* den_seed_opt = den_cmd->add_option("--seed", den_seed, "RNG seed");

  smfd::BenchOptions bench;
  std::string bench_dir, bench_config, bench_report;
  auto* bench_cmd = app.add_subcommand("bench", "score methods over a synthetic corpus");
  bench_cmd->add_option("corpus", bench_dir, "corpus directory with manifest.csv")->required();
  bench_cmd->add_option("-m,--methods", bench.methods,
                        "comma list of ga,av,wi,nlm,igmrf,higmrf,external:<dir>")
      ->capture_default_str();
  bench_cmd->add_option("-c,--config", bench_config, "key=value config file");
  bench_cmd->add_option("--set", bench.overrides, "override a config key (key=value)");
  bench_cmd->add_option("-o,--report", bench_report, "report CSV")->required();

  smfd::DiagnoseOptions diag;
  std::string diag_input, diag_config, diag_report;
  std::uint64_t diag_seed = 0;
  auto* diag_cmd = app.add_subcommand("diagnose", "multi-chain PSRF check for kappa_l and kappa_f");
  diag_cmd->add_option("input", diag_input, "input raster")->required();
  diag_cmd->add_option("-c,--config", diag_config, "key=value config file");
  diag_cmd->add_option("--set", diag.overrides, "override a config key (key=value)");
  diag_cmd->add_option("--variant", diag.variant, "igmrf or higmrf")->capture_default_str();
  diag_cmd->add_option("-m,--chains", diag.chains, "number of chains")->capture_default_str();
  diag_cmd->add_option("-o,--report", diag_report, "report CSV")->required();
  auto* diag_seed_opt = diag_cmd->add_option("--seed", diag_seed, "seed of chain 0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : smfd::exit_code::usage;
  }

  auto opt_path = [](const std::string& s) -> std::optional<std::filesystem::path> {
    if (s.empty()) return std::nullopt;
    return std::filesystem::path(s);
  };

  try {
    if (*synth_cmd) {
      synth.config = opt_path(synth_config);
      synth.output_dir = synth_out;
      return smfd::cmd_synth(synth, std::cerr);
    }
    if (*den_cmd) {
      den.input = den_input;
      den.config = opt_path(den_config);
      den.output = den_out;
      den.mask_output = opt_path(den_mask);
      den.trace_output = opt_path(den_trace);
      if (!den_crop.empty()) den.crop = den_crop;
      if (*den_seed_opt) den.seed = den_seed;
      return smfd::cmd_denoise(den, std::cerr);
    }
    if (*bench_cmd) {
      bench.corpus_dir = bench_dir;
      bench.config = opt_path(bench_config);
      bench.report = bench_report;
      return smfd::cmd_bench(bench, std::cerr);
    }
    if (*diag_cmd) {
      diag.input = diag_input;
      diag.config = opt_path(diag_config);
      diag.report = diag_report;
      if (*diag_seed_opt) diag.seed = diag_seed;
      return smfd::cmd_diagnose(diag, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return smfd::exit_code::failure;
  }
  return smfd::exit_code::usage;
}
