#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "expomap/baselines.hpp"
#include "expomap/config.hpp"
#include "expomap/field_sim.hpp"
#include "expomap/metrics.hpp"
#include "expomap/reconstruct.hpp"

namespace expomap {

inline constexpr const char* kToolVersion = "0.1.0";

enum class Method { GLIP, GRIP, IDW, NEAREST };

std::string method_name(Method m);
Method parse_method(const std::string& name);

// Baked-in defaults for every key the tool understands.
Config default_config();
// Layered resolution: defaults, then the optional file, then overrides.
Config resolve_config(const std::optional<std::filesystem::path>& file, const Config& overrides);

GridDims dims_from_config(const Config& cfg);
PropagationConfig propagation_from_config(const Config& cfg);

// Largest usable encoder depth for the grid: capped at 6, limited by
// divisibility and by batch norm needing at least two bottleneck cells.
int auto_depth(const GridDims& dims, int down_stride);
NetConfig net_from_config(const Config& cfg, const GridDims& dims);
ReconstructionConfig reconstruction_from_config(const Config& cfg, const GridDims& dims,
                                                PriorMode mode, std::uint64_t seed);

struct SceneData {
  Scene scene;
  ExposureGrid ground_truth;
};
SceneData build_scene(const Config& cfg);

// One prediction by any method. Net methods report their loss curve through
// `curve` when it is non-null; the classical baselines leave it empty.
ExposureGrid predict(Method method, const SensorSet& sensors, const BuildingRaster& buildings,
                     const Config& cfg, std::uint64_t seed, std::vector<LossSample>* curve);

// One result-table row. `ok` false marks a failed run; its metric fields are
// written as nan.
struct RunRecord {
  std::string run_id;
  Method method = Method::GLIP;
  int sensor_count = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double mse_vm = 0.0;
  double mae_vm = 0.0;
  double mse_norm = 0.0;
  double mae_norm = 0.0;
  std::size_t n_evaluated = 0;
};

// Held-out evaluation of one prediction against the ground truth.
RunRecord evaluate_run(const ExposureGrid& truth, const ExposureGrid& predicted,
                       const ObservationMask& sensor_mask, const BuildingRaster& buildings,
                       std::string run_id, Method method, int sensor_count, std::uint64_t seed);

std::string results_csv_header();
std::string format_run_row(const RunRecord& r);
// Full results.csv content: the rows in their given order, then per-(method,
// sensor count) mean and standard deviation rows over the successful runs.
std::string results_table(const std::vector<RunRecord>& rows);

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossSample>& curve);

// P2 portable graymap, pixel = round(255 * value / scale) clamped to [0, 255].
std::string render_pgm(const ExposureGrid& grid, double scale);

// Subcommand bodies. Each writes its artifacts under the given directory.
void run_simulate(const Config& cfg, const std::filesystem::path& out_dir);

struct ReconstructInputs {
  std::optional<std::filesystem::path> truth;      // ground-truth EMGRID
  std::optional<std::filesystem::path> buildings;  // building raster EMGRID
  std::optional<std::filesystem::path> sensors;    // sensor CSV
};
RunRecord run_reconstruct(const Config& cfg, Method method, const ReconstructInputs& inputs,
                          const std::filesystem::path& out_dir);

// Runs the full method x count x seed grid. Rows execute concurrently up to
// `jobs` at a time; the result table is written in spec order afterwards, so
// its bytes do not depend on the schedule. Failed rows are recorded and the
// sweep continues.
std::vector<RunRecord> run_sweep(const Config& cfg, const std::filesystem::path& out_dir,
                                 int jobs);

RunRecord run_metrics(const std::filesystem::path& truth, const std::filesystem::path& predicted,
                      const std::filesystem::path& sensors,
                      const std::optional<std::filesystem::path>& buildings, Method method,
                      std::uint64_t seed, const std::optional<std::filesystem::path>& out_file);

void run_render(const std::filesystem::path& grid_file, const std::filesystem::path& out_file,
                std::optional<double> scale);

}  // namespace expomap
