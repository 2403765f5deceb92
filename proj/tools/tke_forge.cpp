// tke-forge: run the TKE regression pipeline, a hyperparameter sweep, or the
// synthetic data generator.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tke/error.hpp"
#include "tke/parallel.hpp"
#include "tke/pipeline.hpp"
#include "tke/synth.hpp"

namespace fs = std::filesystem;

namespace {

struct RunFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> ma_window;
  std::string split;
  std::string split_mode;
  bool paper_activation = false;
  std::size_t threads = 0;
  bool verbose = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Output directory (overrides output_dir)");
  cmd->add_option("--seed", f.seed, "Base seed for splits and models");
  cmd->add_option("--ma-window", f.ma_window, "Moving-average window for TKE_MA")->check(CLI::PositiveNumber);
  cmd->add_option("--split", f.split, "Train,test,val fractions, e.g. 0.64,0.16,0.2");
  cmd->add_option("--split-mode", f.split_mode, "shuffle or chronological")
      ->check(CLI::IsMember({"shuffle", "chronological"}));
  cmd->add_flag("--paper-activation", f.paper_activation, "Softmax on the last MLP hidden layer");
  cmd->add_option("--threads", f.threads, "Worker threads (default: TKE_FORGE_THREADS or all cores)");
  cmd->add_flag("-v,--verbose", f.verbose, "Echo the JSON-lines log to stderr");
}

tke::PipelineConfig build_config_unchecked(const RunFlags& f) {
  tke::PipelineConfig c = tke::load_pipeline_config(f.config);
  if (!f.out.empty()) {
    c.output_dir = fs::absolute(f.out).string();
  }
  if (f.seed) c.seed = *f.seed;
  if (f.ma_window) c.turbulence.ma_window = *f.ma_window;
  if (!f.split.empty()) {
    std::vector<double> parts;
    std::stringstream ss(f.split);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        parts.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw tke::Error(tke::ErrorCode::parameter, "--split: cannot parse '" + item + "'");
      }
    }
    if (parts.size() != 3) throw tke::Error(tke::ErrorCode::parameter, "--split needs three fractions");
    c.ratios = {parts[0], parts[1], parts[2]};
  }
  if (!f.split_mode.empty()) c.split_mode = tke::split_mode_from_string(f.split_mode);
  if (f.paper_activation) tke::use_paper_activation(c);
  c.validate();
  return c;
}

tke::PipelineConfig build_config(const RunFlags& f) {
  try {
    return build_config_unchecked(f);
  } catch (const tke::Error& e) {
    throw tke::StageError("config", e.code(), e.what());
  }
}

tke::RunOptions run_options(const RunFlags& f) {
  tke::RunOptions o;
  o.threads = f.threads > 0 ? f.threads : tke::default_thread_count();
  if (f.verbose) o.log = &std::cerr;
  return o;
}

int report_failure(const std::exception& e) {
  std::cerr << "tke-forge: " << e.what() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Turbulent kinetic energy regression from fire thermocouple and sonic anemometer records"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tke-forge 0.1.0");

  RunFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "Train and evaluate every configured model on every dataset");
  add_run_flags(run_cmd, run_flags);

  RunFlags sweep_flags;
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid-search the configured sweep lists, then evaluate the winners");
  add_run_flags(sweep_cmd, sweep_flags);

  std::string synth_out;
  std::string synth_json;
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_n;
  std::optional<double> synth_gain;
  std::optional<double> synth_noise;
  std::string synth_name;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic fire record, its truth and a ready-to-run config");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--params", synth_json, "Generator parameters (JSON)")->check(CLI::ExistingFile);
  synth_cmd->add_option("--seed", synth_seed, "Generator seed");
  synth_cmd->add_option("--n", synth_n, "Number of 10 Hz samples");
  synth_cmd->add_option("--plume-gain", synth_gain, "Wind puff amplitude per unit plume driver (m/s)");
  synth_cmd->add_option("--noise-sd", synth_noise, "Base turbulence scale (m/s)");
  synth_cmd->add_option("--name", synth_name, "Dataset name");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const auto config = build_config(run_flags);
      const auto result = tke::run(config, run_options(run_flags));
      std::cout << tke::report_table(result.report);
      std::cout << "config hash " << result.config_hash << ", outputs in " << config.output_path().string() << '\n';
    } else if (*sweep_cmd) {
      const auto config = build_config(sweep_flags);
      const auto result = tke::grid_sweep(config, run_options(sweep_flags));
      for (const auto& row : result.rows) {
        if (row.rank != 1) continue;
        std::printf("%s %s: mean CV R2 %.4f with %s\n", row.dataset.c_str(), std::string(tke::to_string(row.model)).c_str(),
                    row.mean_r2, row.params.dump().c_str());
      }
      std::cout << tke::report_table(result.best.report);
    } else if (*synth_cmd) {
      tke::SynthConfig cfg;
      if (!synth_json.empty()) {
        std::ifstream in(synth_json);
        cfg = tke::synth_config_from_json(nlohmann::json::parse(in));
      }
      if (synth_seed) cfg.seed = *synth_seed;
      if (synth_n) cfg.n_samples = *synth_n;
      if (synth_gain) cfg.plume_gain = *synth_gain;
      if (synth_noise) cfg.noise_sd = *synth_noise;
      if (!synth_name.empty()) cfg.name = synth_name;
      cfg.validate();
      const auto result = tke::generate(cfg);
      const fs::path dir(synth_out);
      tke::write_synthetic(dir, result);
      const nlohmann::json run_config{{"datasets", {{cfg.name, cfg.name + ".csv"}}},
                                      {"segmentation", "segmentation.json"},
                                      {"seed", cfg.seed},
                                      {"output_dir", "results"}};
      std::ofstream(dir / "config.json") << run_config.dump(2) << '\n';
      std::cout << "wrote " << cfg.n_samples << " samples to " << (dir / (cfg.name + ".csv")).string() << '\n';
    }
  } catch (const tke::StageError& e) {
    return report_failure(e);
  } catch (const tke::Error& e) {
    std::cerr << "tke-forge: [synth] " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    return report_failure(e);
  }
  return 0;
}
