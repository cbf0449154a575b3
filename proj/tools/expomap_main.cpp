#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "expomap/harness.hpp"

namespace fs = std::filesystem;

using namespace expomap;

int main(int argc, char** argv) {
  CLI::App app{"Dense RF exposure map reconstruction from sparse sensors"};
  app.require_subcommand(1);

  std::string config_file;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int jobs = 1;
  std::vector<std::string> sets;
  app.add_option("--config", config_file, "Config file with flat key=value lines")
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory");
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "Seed override (scene seed for simulate/sweep, run seed "
                                     "for reconstruct, reported seed for metrics)");
  app.add_option("--jobs", jobs, "Concurrent sweep jobs")->check(CLI::PositiveNumber);
  app.add_option("--set", sets, "Extra config overrides as key=value")->take_all();

  // Global options may appear after the subcommand name, so let unmatched
  // arguments fall through to the parent parser.
  CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic scene and ground truth")
                      ->fallthrough();

  CLI::App* rec =
      app.add_subcommand("reconstruct", "Reconstruct a dense map from sensors")->fallthrough();
  std::string method_str;
  std::string truth_file;
  std::string buildings_file;
  std::string sensors_file;
  int epochs = 0;
  rec->add_option("--method", method_str, "glip, grip, idw or nearest");
  rec->add_option("--truth", truth_file, "Ground-truth EMGRID file")->check(CLI::ExistingFile);
  rec->add_option("--buildings", buildings_file, "Building raster EMGRID file")
      ->check(CLI::ExistingFile);
  rec->add_option("--sensors", sensors_file, "Sensor CSV file")->check(CLI::ExistingFile);
  CLI::Option* epochs_opt =
      rec->add_option("--epochs", epochs, "Epoch override")->check(CLI::PositiveNumber);

  CLI::App* swp =
      app.add_subcommand("sweep", "Run the full method x count x seed grid")->fallthrough();

  CLI::App* met =
      app.add_subcommand("metrics", "Recompute metrics from persisted artifacts")->fallthrough();
  std::string m_truth;
  std::string m_predicted;
  std::string m_sensors;
  std::string m_buildings;
  std::string m_method = "glip";
  met->add_option("--truth", m_truth, "Ground-truth EMGRID file")
      ->required()
      ->check(CLI::ExistingFile);
  met->add_option("--predicted", m_predicted, "Predicted EMGRID file")
      ->required()
      ->check(CLI::ExistingFile);
  met->add_option("--sensors", m_sensors, "Sensor CSV file")->required()->check(CLI::ExistingFile);
  met->add_option("--buildings", m_buildings, "Building raster EMGRID file")
      ->check(CLI::ExistingFile);
  met->add_option("--method", m_method, "Method label for the row");
  std::string m_out;
  CLI::Option* met_out = met->add_option("--to", m_out, "Also write the row to this CSV file");

  CLI::App* ren =
      app.add_subcommand("render", "Render an EMGRID file to a P2 graymap")->fallthrough();
  std::string r_grid;
  std::string r_to;
  double r_scale = 0.0;
  ren->add_option("--grid", r_grid, "EMGRID file to render")->required()->check(CLI::ExistingFile);
  ren->add_option("--to", r_to, "Output PGM path (default <out>/render.pgm)");
  CLI::Option* scale_opt = ren->add_option("--scale", r_scale, "Fixed value mapped to white");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    std::string override_text;
    for (const std::string& s : sets) override_text += s + "\n";
    Config overrides = Config::parse_string(override_text);
    if (seed_opt->count() > 0) {
      if (sim->parsed() || swp->parsed()) {
        overrides.set("scene.seed", std::to_string(seed));
      } else if (rec->parsed()) {
        overrides.set("run.seed", std::to_string(seed));
      }
    }
    Config cfg = resolve_config(
        config_file.empty() ? std::nullopt : std::optional<fs::path>(config_file), overrides);

    if (sim->parsed()) {
      run_simulate(cfg, out_dir);
      std::cout << "wrote scene artifacts to " << out_dir << "\n";
    } else if (rec->parsed()) {
      if (epochs_opt->count() > 0) {
        cfg.set_int("train.epochs", epochs);
      }
      const Method method =
          method_str.empty()
              ? parse_method(cfg.get_string("run.method", cfg.get_string("prior.mode", "glip")))
              : parse_method(method_str);
      ReconstructInputs inputs;
      if (!truth_file.empty()) inputs.truth = truth_file;
      if (!buildings_file.empty()) inputs.buildings = buildings_file;
      if (!sensors_file.empty()) inputs.sensors = sensors_file;
      const RunRecord r = run_reconstruct(cfg, method, inputs, out_dir);
      std::cout << results_csv_header() << "\n" << format_run_row(r) << "\n";
    } else if (swp->parsed()) {
      const std::vector<RunRecord> rows = run_sweep(cfg, out_dir, jobs);
      std::size_t failed = 0;
      for (const RunRecord& r : rows) {
        if (!r.ok) ++failed;
      }
      std::cout << "wrote " << (fs::path(out_dir) / "results.csv").string() << " (" << rows.size()
                << " runs";
      if (failed > 0) std::cout << ", " << failed << " failed";
      std::cout << ")\n";
    } else if (met->parsed()) {
      const RunRecord r = run_metrics(
          m_truth, m_predicted, m_sensors,
          m_buildings.empty() ? std::nullopt : std::optional<fs::path>(m_buildings),
          parse_method(m_method), seed,
          met_out->count() > 0 ? std::optional<fs::path>(m_out) : std::nullopt);
      std::cout << results_csv_header() << "\n" << format_run_row(r) << "\n";
    } else if (ren->parsed()) {
      const fs::path to = r_to.empty() ? fs::path(out_dir) / "render.pgm" : fs::path(r_to);
      run_render(r_grid, to,
                 scale_opt->count() > 0 ? std::optional<double>(r_scale) : std::nullopt);
      std::cout << "wrote " << to.string() << "\n";
    }
    return 0;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
