#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "expomap/harness.hpp"

using namespace expomap;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / "expomap_test_harness" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

// Small scene that keeps every net fit in the test budget.
Config tiny_scene_config() {
  Config overrides;
  overrides.set("scene.rows", "16");
  overrides.set("scene.cols", "16");
  overrides.set("scene.seed", "2");
  return resolve_config(std::nullopt, overrides);
}

}  // namespace

TEST_CASE("default config carries the full key set") {
  const Config cfg = default_config();
  CHECK(cfg.get_int("scene.rows") == 128);
  CHECK(cfg.get_int("scene.cols") == 128);
  CHECK(cfg.get_double("scene.cell_size_m") == 7.8125);
  CHECK(cfg.get_int("sensors.count") == 100);
  CHECK(cfg.get_string("net.depth") == "auto");
  CHECK(cfg.get_int("train.epochs") == 150);
  CHECK(cfg.get_double("train.lr") == 0.01);
  CHECK(cfg.get_string("prior.mode") == "glip");
  CHECK(cfg.get_int_list("sweep.sensor_counts") == std::vector<int>{20, 40, 60, 100});
  CHECK(cfg.get_uint_list("sweep.seeds", {}).size() == 10);
  CHECK(cfg.get_double("sim.wall_loss_db") == 10.0);
  CHECK(cfg.get_double("sim.min_distance_cells") == 8.0);

  const GridDims dims = dims_from_config(cfg);
  CHECK(dims.rows == 128);
  CHECK(dims.cell_size_m == 7.8125);

  const PropagationConfig prop = propagation_from_config(cfg);
  CHECK(prop.wall_loss_db == 10.0);
  CHECK(prop.min_distance_cells == 8.0);
}

TEST_CASE("config resolution layers defaults, file, then overrides") {
  const fs::path dir = scratch_dir("resolve");
  {
    std::ofstream out(dir / "f.cfg");
    out << "scene.rows=64\nscene.cols=64\ntrain.epochs=9\n";
  }
  Config overrides;
  overrides.set("scene.rows", "32");
  const Config cfg = resolve_config(dir / "f.cfg", overrides);
  CHECK(cfg.get_int("scene.rows") == 32);   // override beats file
  CHECK(cfg.get_int("scene.cols") == 64);   // file beats default
  CHECK(cfg.get_int("train.epochs") == 9);  // file beats default
  CHECK(cfg.get_int("sensors.count") == 100);  // untouched default

  CHECK_THROWS_AS(resolve_config(dir / "missing.cfg", overrides), IoError);
}

TEST_CASE("auto depth follows divisibility and the bottleneck rule") {
  CHECK(auto_depth(GridDims(128, 128, 1.0), 2) == 6);
  CHECK(auto_depth(GridDims(64, 64, 1.0), 2) == 5);
  CHECK(auto_depth(GridDims(32, 32, 1.0), 2) == 4);
  CHECK(auto_depth(GridDims(16, 16, 1.0), 2) == 3);
  CHECK(auto_depth(GridDims(8, 8, 1.0), 2) == 2);
  // 48 halves four times before hitting the odd 3, and the 3x3 bottleneck
  // still clears the two-cell floor.
  CHECK(auto_depth(GridDims(48, 48, 1.0), 2) == 4);
  CHECK(auto_depth(GridDims(128, 32, 1.0), 2) == 5);
  CHECK(auto_depth(GridDims(81, 81, 1.0), 3) == 3);
  CHECK_THROWS_AS(auto_depth(GridDims(9, 9, 1.0), 2), ValidationError);
  CHECK_THROWS_AS(auto_depth(GridDims(16, 16, 1.0), 1), ValidationError);
}

TEST_CASE("net_from_config sizes the channel lists to the depth") {
  const Config cfg = default_config();

  NetConfig net = net_from_config(cfg, GridDims(128, 128, 1.0));
  CHECK(net.depth == 6);
  CHECK(net.enc_channels == std::vector<int>{16, 32, 64, 128, 128, 128});

  net = net_from_config(cfg, GridDims(32, 32, 1.0));
  CHECK(net.depth == 4);
  CHECK(net.enc_channels == std::vector<int>{16, 32, 64, 128});
  CHECK(net.skip_channels == std::vector<int>{4, 4, 4, 4});

  Config two = cfg;
  two.set("net.depth", "2");
  two.set("net.kernel_cycle", "2,3");
  two.set("net.final_activation", "none");
  net = net_from_config(two, GridDims(128, 128, 1.0));
  CHECK(net.depth == 2);
  CHECK(net.enc_channels == std::vector<int>{16, 32});
  CHECK(net.kernel_cycle == std::vector<int>{2, 3});
  CHECK(net.final_activation == FinalActivation::None);

  Config shallow = cfg;
  shallow.set("net.enc_channels", "16,32");
  CHECK_THROWS_AS(net_from_config(shallow, GridDims(128, 128, 1.0)), ValidationError);

  const ReconstructionConfig rc =
      reconstruction_from_config(cfg, GridDims(16, 16, 1.0), PriorMode::GRIP, 7);
  CHECK(rc.prior_mode == PriorMode::GRIP);
  CHECK(rc.epochs == 150);
  CHECK(rc.seed == 7);
  CHECK(rc.net.depth == 3);
}

TEST_CASE("method names round trip") {
  for (Method m : {Method::GLIP, Method::GRIP, Method::IDW, Method::NEAREST}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK_THROWS_WITH_AS(parse_method("kriging"), doctest::Contains("kriging"), ValidationError);
}

TEST_CASE("the default scene yields a plausible exposure field") {
  const SceneData sd = build_scene(default_config());
  CHECK(sd.ground_truth.dims().rows == 128);
  CHECK(sd.ground_truth.dims().cols == 128);
  const double peak = sd.ground_truth.max_value();
  CHECK(peak >= 0.05);
  CHECK(peak <= 2.0);
  // Building cells are zero, the rest carry signal.
  for (int r = 0; r < 128; ++r) {
    for (int c = 0; c < 128; ++c) {
      if (sd.scene.buildings().at(r, c)) {
        REQUIRE(sd.ground_truth.at(r, c) == 0.0);
      } else {
        REQUIRE(sd.ground_truth.at(r, c) > 0.0);
      }
    }
  }
}

TEST_CASE("simulate writes reproducible artifacts") {
  const Config cfg = tiny_scene_config();
  const fs::path a = scratch_dir("sim_a");
  const fs::path b = scratch_dir("sim_b");
  run_simulate(cfg, a);
  run_simulate(cfg, b);

  CHECK(slurp(a / "ground_truth.emgrid") == slurp(b / "ground_truth.emgrid"));
  CHECK(slurp(a / "buildings.emgrid") == slurp(b / "buildings.emgrid"));

  const ExposureGrid truth = read_grid(a / "ground_truth.emgrid");
  CHECK(truth.dims().rows == 16);

  const Config manifest = Config::parse_file(a / "manifest");
  CHECK(manifest.get_string("tool.version") == kToolVersion);
  CHECK(manifest.get_int("scene.rows") == 16);
}

TEST_CASE("reconstruct with one sensor and nearest paints a constant") {
  Config cfg = tiny_scene_config();
  cfg.set("sensors.count", "1");
  const fs::path dir = scratch_dir("nearest_one");
  const RunRecord rec = run_reconstruct(cfg, Method::NEAREST, ReconstructInputs{}, dir);

  CHECK(rec.ok);
  CHECK(rec.sensor_count == 1);
  CHECK(rec.run_id == "nearest_1_0");

  const SensorSet sensors = read_sensors(dir / "sensors.csv", GridDims(16, 16, 1.0));
  REQUIRE(sensors.size() == 1);
  const double value = sensors.readings()[0].value_vm;

  // The same config simulates the same scene, which gives us the raster the
  // reconstruction suppressed against.
  const fs::path sim = scratch_dir("nearest_one_scene");
  run_simulate(cfg, sim);
  const BinaryGrid buildings = read_binary_grid(sim / "buildings.emgrid");

  const ExposureGrid predicted = read_grid(dir / "predicted.emgrid");
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) {
      CHECK(predicted.at(r, c) == (buildings.at(r, c) ? 0.0 : value));
    }
  }
}

TEST_CASE("reconstruct from a generated scene leaves a full artifact trail") {
  Config cfg = tiny_scene_config();
  cfg.set("sensors.count", "12");
  cfg.set("net.depth", "2");
  cfg.set("net.enc_channels", "6,8");
  cfg.set("net.skip_channels", "2,2");
  cfg.set("train.epochs", "2");
  const fs::path dir = scratch_dir("glip_tiny");
  const RunRecord rec = run_reconstruct(cfg, Method::GLIP, ReconstructInputs{}, dir);

  CHECK(rec.ok);
  CHECK(rec.run_id == "glip_12_0");
  CHECK(rec.n_evaluated > 0);
  CHECK(std::isfinite(rec.mse_vm));
  CHECK(std::isfinite(rec.mse_norm));

  for (const char* name :
       {"predicted.emgrid", "sensors.csv", "loss.csv", "manifest", "metrics.csv",
        "error_map.emgrid"}) {
    CHECK_MESSAGE(fs::exists(dir / name), name);
  }

  const std::vector<std::string> loss_lines = lines_of(slurp(dir / "loss.csv"));
  REQUIRE(loss_lines.size() == 3);  // header + 2 epochs
  CHECK(loss_lines[0] == "iter,loss");

  // Simulating the same config recreates the scene files, and scoring the
  // stored prediction against them reproduces the metrics row byte for byte.
  const fs::path sim = scratch_dir("glip_tiny_scene");
  run_simulate(cfg, sim);
  const fs::path redo = scratch_dir("glip_tiny_redo") / "metrics.csv";
  const Config manifest = Config::parse_file(dir / "manifest");
  run_metrics(sim / "ground_truth.emgrid", dir / "predicted.emgrid", dir / "sensors.csv",
              sim / "buildings.emgrid", Method::GLIP, manifest.get_uint("run.seed", 99), redo);
  CHECK(slurp(redo) == slurp(dir / "metrics.csv"));
}

TEST_CASE("a tiny sweep writes ordered rows plus aggregates") {
  Config cfg = tiny_scene_config();
  cfg.set("sweep.methods", "idw,nearest");
  cfg.set("sweep.sensor_counts", "5");
  cfg.set("sweep.seeds", "0");
  const fs::path dir = scratch_dir("sweep");
  const std::vector<RunRecord> records = run_sweep(cfg, dir, 1);

  REQUIRE(records.size() == 2);
  CHECK(records[0].run_id == "idw_5_0");
  CHECK(records[1].run_id == "nearest_5_0");
  CHECK(records[0].ok);
  CHECK(records[1].ok);

  const std::vector<std::string> lines = lines_of(slurp(dir / "results.csv"));
  REQUIRE(lines.size() == 7);  // header, 2 rows, 2 aggregates per key
  CHECK(lines[0] == results_csv_header());
  CHECK(fields_of(lines[1])[0] == "idw_5_0");
  CHECK(fields_of(lines[2])[0] == "nearest_5_0");
  CHECK(fields_of(lines[3])[0] == "idw_5_mean");
  CHECK(fields_of(lines[4])[0] == "idw_5_std");
  CHECK(fields_of(lines[5])[0] == "nearest_5_mean");
  CHECK(fields_of(lines[6])[0] == "nearest_5_std");

  // A single run means mean == value and std == 0.
  CHECK(fields_of(lines[3])[4] == fields_of(lines[1])[4]);
  CHECK(fields_of(lines[4])[4] == "0");
  // The aggregate rows carry the number of runs in the count column.
  CHECK(fields_of(lines[3])[8] == "1");
  CHECK(fields_of(lines[3])[3] == "");  // seed column empty

  for (const char* name : {"ground_truth.emgrid", "buildings.emgrid", "manifest"}) {
    CHECK_MESSAGE(fs::exists(dir / name), name);
  }
  for (const char* run : {"idw_5_0", "nearest_5_0"}) {
    CHECK(fs::exists(dir / "runs" / run / "predicted.emgrid"));
    CHECK(fs::exists(dir / "runs" / run / "metrics.csv"));
    CHECK(fs::exists(dir / "runs" / run / "manifest"));
  }
}

TEST_CASE("sweep results do not depend on the worker count") {
  Config cfg = tiny_scene_config();
  cfg.set("sweep.methods", "idw,nearest");
  cfg.set("sweep.sensor_counts", "4,9");
  cfg.set("sweep.seeds", "0,1");
  const fs::path serial = scratch_dir("sweep_serial");
  const fs::path parallel = scratch_dir("sweep_parallel");
  run_sweep(cfg, serial, 1);
  run_sweep(cfg, parallel, 4);
  CHECK(slurp(serial / "results.csv") == slurp(parallel / "results.csv"));
  CHECK(slurp(serial / "runs" / "idw_9_1" / "predicted.emgrid") ==
        slurp(parallel / "runs" / "idw_9_1" / "predicted.emgrid"));
}

TEST_CASE("sweep validation") {
  Config cfg = tiny_scene_config();
  cfg.set("sweep.methods", "");
  CHECK_THROWS_AS(run_sweep(cfg, scratch_dir("sweep_bad"), 1), ValidationError);
  cfg = tiny_scene_config();
  cfg.set("sweep.sensor_counts", "0");
  CHECK_THROWS_AS(run_sweep(cfg, scratch_dir("sweep_bad2"), 1), ValidationError);
}

TEST_CASE("failed runs are recorded as nan rows") {
  RunRecord bad;
  bad.run_id = "glip_10_3";
  bad.method = Method::GLIP;
  bad.sensor_count = 10;
  bad.seed = 3;
  bad.ok = false;
  bad.error = "boom";
  const std::string row = format_run_row(bad);
  CHECK(row == "glip_10_3,glip,10,3,nan,nan,nan,nan,0");
}

TEST_CASE("results_table aggregates only the successful rows") {
  RunRecord a;
  a.run_id = "idw_10_0";
  a.method = Method::IDW;
  a.sensor_count = 10;
  a.seed = 0;
  a.ok = true;
  a.mse_vm = 1.0;
  a.mae_vm = 1.0;
  a.mse_norm = 1.0;
  a.mae_norm = 1.0;
  a.n_evaluated = 50;
  RunRecord b = a;
  b.run_id = "idw_10_1";
  b.seed = 1;
  b.mse_vm = 3.0;
  b.mae_vm = 3.0;
  b.mse_norm = 3.0;
  b.mae_norm = 3.0;
  RunRecord fail = a;
  fail.run_id = "idw_10_2";
  fail.seed = 2;
  fail.ok = false;

  const std::vector<std::string> lines = lines_of(results_table({a, b, fail}));
  REQUIRE(lines.size() == 6);  // header + 3 rows + mean + std
  const std::vector<std::string> mean = fields_of(lines[4]);
  const std::vector<std::string> stdev = fields_of(lines[5]);
  CHECK(mean[0] == "idw_10_mean");
  CHECK(mean[4] == "2");   // (1 + 3) / 2
  CHECK(stdev[4] == "1");  // population std of {1, 3}
  CHECK(mean[8] == "2");   // two successful runs aggregated
}

TEST_CASE("loss csv format") {
  const fs::path file = scratch_dir("losscsv") / "loss.csv";
  write_loss_csv(file, {{1, 0.5}, {3, 0.25}});
  CHECK(slurp(file) == "iter,loss\n1,0.5\n3,0.25\n");
}

TEST_CASE("pgm rendering") {
  const GridDims dims(8, 8, 1.0);

  SUBCASE("an all-zero grid renders as all-zero pixels") {
    const std::string pgm = render_pgm(ExposureGrid::zeros(dims), 1.0);
    const std::vector<std::string> lines = lines_of(pgm);
    REQUIRE(lines.size() == 3 + 8);
    CHECK(lines[0] == "P2");
    CHECK(lines[1] == "8 8");
    CHECK(lines[2] == "255");
    for (std::size_t i = 3; i < lines.size(); ++i) {
      CHECK(lines[i] == "0 0 0 0 0 0 0 0");
    }
  }

  SUBCASE("value equal to the scale hits 255, larger values clamp") {
    std::vector<double> v(dims.cell_count(), 0.0);
    v[0] = 2.0;   // clamps
    v[1] = 1.0;   // exactly 255
    v[2] = 0.5;   // rounds to 128
    const std::string pgm = render_pgm(ExposureGrid(dims, v), 1.0);
    std::istringstream row(lines_of(pgm)[3]);
    int p0, p1, p2;
    row >> p0 >> p1 >> p2;
    CHECK(p0 == 255);
    CHECK(p1 == 255);
    CHECK(p2 == 128);
  }

  SUBCASE("pixel values grow with the field") {
    std::vector<double> v(dims.cell_count(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) / (v.size() - 1);
    const std::string pgm = render_pgm(ExposureGrid(dims, v), 1.0);
    std::istringstream body(pgm.substr(pgm.find("255\n") + 4));
    int prev = -1, px = 0;
    while (body >> px) {
      CHECK(px >= prev);
      prev = px;
    }
    CHECK(prev == 255);
  }

  SUBCASE("a non-positive or non-finite scale is rejected") {
    CHECK_THROWS_AS(render_pgm(ExposureGrid::zeros(dims), 0.0), ValidationError);
    CHECK_THROWS_AS(render_pgm(ExposureGrid::zeros(dims), -1.0), ValidationError);
    CHECK_THROWS_AS(render_pgm(ExposureGrid::zeros(dims), std::nan("")), ValidationError);
  }
}
