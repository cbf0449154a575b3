#include "expomap/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "expomap/rng.hpp"

namespace expomap {

namespace fs = std::filesystem;

namespace {

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::istringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    const auto b = part.find_first_not_of(" \t");
    const auto e = part.find_last_not_of(" \t");
    parts.push_back(b == std::string::npos ? "" : part.substr(b, e - b + 1));
  }
  return parts;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out << content;
  if (!out) {
    throw IoError("failed writing '" + path.string() + "'");
  }
}

bool is_net_method(Method m) { return m == Method::GLIP || m == Method::GRIP; }

std::string run_id_for(Method m, int count, std::uint64_t seed) {
  return method_name(m) + "_" + std::to_string(count) + "_" + std::to_string(seed);
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::GLIP:
      return "glip";
    case Method::GRIP:
      return "grip";
    case Method::IDW:
      return "idw";
    case Method::NEAREST:
      return "nearest";
  }
  throw ValidationError("unknown method");
}

Method parse_method(const std::string& name) {
  if (name == "glip") return Method::GLIP;
  if (name == "grip") return Method::GRIP;
  if (name == "idw") return Method::IDW;
  if (name == "nearest") return Method::NEAREST;
  throw ValidationError("unknown method '" + name + "' (expected glip, grip, idw or nearest)");
}

Config default_config() {
  Config cfg;
  cfg.set("scene.rows", "128");
  cfg.set("scene.cols", "128");
  cfg.set("scene.cell_size_m", "7.8125");
  cfg.set("scene.seed", "0");
  cfg.set("scene.n_transmitters", "2");
  cfg.set("scene.building_fraction", "0.2");
  cfg.set("scene.tx_power_w", "120");
  cfg.set("scene.tx_frequency_hz", "5.89e9");
  cfg.set("sim.wall_loss_db", "10");
  // Floor the point-source distance near the Fraunhofer limit of a panel
  // antenna at this band (~60 m at the default cell size). The raw 1/d law
  // is not valid closer in, and an uncapped spike next to the transmitter
  // swamps every error metric downstream.
  cfg.set("sim.min_distance_cells", "8");
  cfg.set("sensors.count", "100");
  cfg.set("net.depth", "auto");
  cfg.set("net.enc_channels", "16,32,64,128,128,128");
  cfg.set("net.skip_channels", "4,4,4,4,4,4");
  cfg.set("net.enc_kernel", "3");
  cfg.set("net.dec_kernel", "3");
  cfg.set("net.skip_kernel", "1");
  cfg.set("net.kernel_cycle", "");
  cfg.set("net.down_stride", "2");
  cfg.set("net.final_activation", "sigmoid");
  cfg.set("net.input_channels", "1");
  cfg.set("train.epochs", "150");
  cfg.set("train.lr", "0.01");
  cfg.set("train.log_every", "1");
  cfg.set("train.suppress_buildings", "true");
  cfg.set("prior.mode", "glip");
  cfg.set("idw.power", "2");
  cfg.set("run.seed", "0");
  cfg.set("sweep.sensor_counts", "20,40,60,100");
  cfg.set("sweep.seeds", "0,1,2,3,4,5,6,7,8,9");
  cfg.set("sweep.methods", "glip,grip,idw,nearest");
  return cfg;
}

Config resolve_config(const std::optional<fs::path>& file, const Config& overrides) {
  Config cfg = default_config();
  if (file) {
    cfg.merge(Config::parse_file(*file));
  }
  cfg.merge(overrides);
  return cfg;
}

GridDims dims_from_config(const Config& cfg) {
  return GridDims(static_cast<int>(cfg.get_int("scene.rows")),
                  static_cast<int>(cfg.get_int("scene.cols")),
                  cfg.get_double("scene.cell_size_m"));
}

PropagationConfig propagation_from_config(const Config& cfg) {
  PropagationConfig p;
  p.wall_loss_db = cfg.get_double("sim.wall_loss_db", p.wall_loss_db);
  p.min_distance_cells = cfg.get_double("sim.min_distance_cells", p.min_distance_cells);
  p.validate();
  return p;
}

int auto_depth(const GridDims& dims, int down_stride) {
  if (down_stride < 2) {
    throw ValidationError("auto depth needs down_stride >= 2");
  }
  int depth = 0;
  long factor = down_stride;
  while (depth < 6 && dims.rows % factor == 0 && dims.cols % factor == 0) {
    ++depth;
    factor *= down_stride;
  }
  // Batch norm at the bottleneck needs at least two cells.
  while (depth > 0) {
    long f = 1;
    for (int i = 0; i < depth; ++i) f *= down_stride;
    if ((dims.rows / f) * (dims.cols / f) >= 2) break;
    --depth;
  }
  if (depth < 1) {
    throw ValidationError("grid " + std::to_string(dims.rows) + "x" + std::to_string(dims.cols) +
                          " cannot be downsampled by " + std::to_string(down_stride));
  }
  return depth;
}

NetConfig net_from_config(const Config& cfg, const GridDims& dims) {
  NetConfig net;
  net.down_stride = static_cast<int>(cfg.get_int("net.down_stride", net.down_stride));
  const std::string depth_str = cfg.get_string("net.depth", "auto");
  net.depth = depth_str == "auto" ? auto_depth(dims, net.down_stride)
                                  : static_cast<int>(cfg.get_int("net.depth"));
  std::vector<int> enc = cfg.get_int_list("net.enc_channels", net.enc_channels);
  std::vector<int> skip = cfg.get_int_list("net.skip_channels", net.skip_channels);
  if (static_cast<int>(enc.size()) < net.depth) {
    throw ValidationError("net.enc_channels lists fewer levels than the depth " +
                          std::to_string(net.depth));
  }
  if (static_cast<int>(skip.size()) < net.depth) {
    throw ValidationError("net.skip_channels lists fewer levels than the depth " +
                          std::to_string(net.depth));
  }
  enc.resize(net.depth);
  skip.resize(net.depth);
  net.enc_channels = std::move(enc);
  net.skip_channels = std::move(skip);
  net.enc_kernel = static_cast<int>(cfg.get_int("net.enc_kernel", net.enc_kernel));
  net.dec_kernel = static_cast<int>(cfg.get_int("net.dec_kernel", net.dec_kernel));
  net.skip_kernel = static_cast<int>(cfg.get_int("net.skip_kernel", net.skip_kernel));
  if (!cfg.get_string("net.kernel_cycle", "").empty()) {
    net.kernel_cycle = cfg.get_int_list("net.kernel_cycle");
  }
  net.final_activation =
      parse_final_activation(cfg.get_string("net.final_activation", "sigmoid"));
  net.input_channels = static_cast<int>(cfg.get_int("net.input_channels", net.input_channels));
  net.validate();
  return net;
}

ReconstructionConfig reconstruction_from_config(const Config& cfg, const GridDims& dims,
                                                PriorMode mode, std::uint64_t seed) {
  ReconstructionConfig rc;
  rc.prior_mode = mode;
  rc.epochs = static_cast<int>(cfg.get_int("train.epochs", rc.epochs));
  rc.lr = cfg.get_double("train.lr", rc.lr);
  rc.net = net_from_config(cfg, dims);
  rc.seed = seed;
  rc.suppress_buildings = cfg.get_bool("train.suppress_buildings", rc.suppress_buildings);
  rc.log_every = static_cast<int>(cfg.get_int("train.log_every", rc.log_every));
  rc.validate();
  return rc;
}

SceneData build_scene(const Config& cfg) {
  const GridDims dims = dims_from_config(cfg);
  SceneSynthOptions opts;
  opts.n_transmitters = static_cast<int>(cfg.get_int("scene.n_transmitters", opts.n_transmitters));
  opts.building_fraction = cfg.get_double("scene.building_fraction", opts.building_fraction);
  opts.tx_power_w = cfg.get_double("scene.tx_power_w", opts.tx_power_w);
  opts.tx_frequency_hz = cfg.get_double("scene.tx_frequency_hz", opts.tx_frequency_hz);
  Scene scene = make_random_scene(dims, cfg.get_uint("scene.seed", 0), opts);
  ExposureGrid truth = generate_ground_truth(scene, propagation_from_config(cfg));
  return SceneData{std::move(scene), std::move(truth)};
}

ExposureGrid predict(Method method, const SensorSet& sensors, const BuildingRaster& buildings,
                     const Config& cfg, std::uint64_t seed, std::vector<LossSample>* curve) {
  if (curve) curve->clear();
  if (is_net_method(method)) {
    const PriorMode mode = method == Method::GLIP ? PriorMode::GLIP : PriorMode::GRIP;
    const ReconstructionConfig rc = reconstruction_from_config(cfg, sensors.dims(), mode, seed);
    ReconstructionResult res = fit(sensors, buildings, rc);
    if (curve) *curve = std::move(res.loss_curve);
    return std::move(res.predicted);
  }
  ExposureGrid out = method == Method::IDW
                         ? idw_interpolate(sensors, sensors.dims(), cfg.get_double("idw.power", 2))
                         : nearest_interpolate(sensors, sensors.dims());
  if (cfg.get_bool("train.suppress_buildings", true)) {
    out = suppress_buildings(out, buildings);
  }
  return out;
}

RunRecord evaluate_run(const ExposureGrid& truth, const ExposureGrid& predicted,
                       const ObservationMask& sensor_mask, const BuildingRaster& buildings,
                       std::string run_id, Method method, int sensor_count, std::uint64_t seed) {
  const ErrorReport rep = evaluate(truth, predicted, heldout_mask(sensor_mask, buildings));
  const double scale = truth.max_value();
  RunRecord rec;
  rec.run_id = std::move(run_id);
  rec.method = method;
  rec.sensor_count = sensor_count;
  rec.seed = seed;
  rec.ok = true;
  rec.mse_vm = rep.mse;
  rec.mae_vm = rep.mae;
  rec.mse_norm = scale > 0 ? rep.mse / (scale * scale) : std::nan("");
  rec.mae_norm = scale > 0 ? rep.mae / scale : std::nan("");
  rec.n_evaluated = rep.n_evaluated;
  return rec;
}

std::string results_csv_header() {
  return "run_id,method,sensor_count,seed,mse_vm,mae_vm,mse_norm,mae_norm,n_evaluated";
}

std::string format_run_row(const RunRecord& r) {
  std::ostringstream out;
  out << r.run_id << ',' << method_name(r.method) << ',' << r.sensor_count << ',' << r.seed << ',';
  if (r.ok) {
    out << g17(r.mse_vm) << ',' << g17(r.mae_vm) << ',' << g17(r.mse_norm) << ','
        << g17(r.mae_norm);
  } else {
    out << "nan,nan,nan,nan";
  }
  out << ',' << r.n_evaluated;
  return out.str();
}

std::string results_table(const std::vector<RunRecord>& rows) {
  std::ostringstream out;
  out << results_csv_header() << '\n';
  for (const RunRecord& r : rows) {
    out << format_run_row(r) << '\n';
  }
  // Aggregates per (method, count) in first-appearance order, over the
  // successful rows only. The n_evaluated column carries the number of runs
  // aggregated, the seed column stays empty.
  std::vector<std::pair<Method, int>> keys;
  for (const RunRecord& r : rows) {
    const auto key = std::make_pair(r.method, r.sensor_count);
    bool seen = false;
    for (const auto& k : keys) {
      if (k == key) {
        seen = true;
        break;
      }
    }
    if (!seen) keys.push_back(key);
  }
  for (const auto& [method, count] : keys) {
    std::vector<const RunRecord*> ok_rows;
    for (const RunRecord& r : rows) {
      if (r.method == method && r.sensor_count == count && r.ok) ok_rows.push_back(&r);
    }
    const double n = static_cast<double>(ok_rows.size());
    auto stats = [&](auto get) {
      double mean = std::nan("");
      double stdev = std::nan("");
      if (!ok_rows.empty()) {
        double sum = 0.0;
        for (const RunRecord* r : ok_rows) sum += get(*r);
        mean = sum / n;
        double sq = 0.0;
        for (const RunRecord* r : ok_rows) {
          const double d = get(*r) - mean;
          sq += d * d;
        }
        stdev = std::sqrt(sq / n);
      }
      return std::make_pair(mean, stdev);
    };
    const auto [mse_m, mse_s] = stats([](const RunRecord& r) { return r.mse_vm; });
    const auto [mae_m, mae_s] = stats([](const RunRecord& r) { return r.mae_vm; });
    const auto [msen_m, msen_s] = stats([](const RunRecord& r) { return r.mse_norm; });
    const auto [maen_m, maen_s] = stats([](const RunRecord& r) { return r.mae_norm; });
    const std::string prefix = method_name(method) + "_" + std::to_string(count);
    out << prefix << "_mean," << method_name(method) << ',' << count << ",," << g17(mse_m) << ','
        << g17(mae_m) << ',' << g17(msen_m) << ',' << g17(maen_m) << ',' << ok_rows.size() << '\n';
    out << prefix << "_std," << method_name(method) << ',' << count << ",," << g17(mse_s) << ','
        << g17(mae_s) << ',' << g17(msen_s) << ',' << g17(maen_s) << ',' << ok_rows.size() << '\n';
  }
  return out.str();
}

void write_loss_csv(const fs::path& path, const std::vector<LossSample>& curve) {
  std::ostringstream out;
  out << "iter,loss\n";
  for (const LossSample& s : curve) {
    out << s.iter << ',' << g17(s.loss) << '\n';
  }
  write_text(path, out.str());
}

std::string render_pgm(const ExposureGrid& grid, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ValidationError("render scale must be positive");
  }
  std::ostringstream out;
  out << "P2\n" << grid.dims().cols << ' ' << grid.dims().rows << "\n255\n";
  for (int r = 0; r < grid.dims().rows; ++r) {
    for (int c = 0; c < grid.dims().cols; ++c) {
      long px = std::lround(255.0 * grid.at(r, c) / scale);
      px = std::max(0L, std::min(255L, px));
      out << px << (c + 1 == grid.dims().cols ? '\n' : ' ');
    }
  }
  return out.str();
}

void run_simulate(const Config& cfg, const fs::path& out_dir) {
  SceneData sd = build_scene(cfg);
  fs::create_directories(out_dir);
  write_grid(sd.ground_truth, out_dir / "ground_truth.emgrid");
  write_binary_grid(sd.scene.buildings(), out_dir / "buildings.emgrid");
  Config manifest = cfg;
  manifest.set("tool.version", kToolVersion);
  manifest.write_file(out_dir / "manifest");
}

RunRecord run_reconstruct(const Config& cfg, Method method, const ReconstructInputs& inputs,
                          const fs::path& out_dir) {
  const std::uint64_t run_seed = cfg.get_uint("run.seed", 0);

  std::optional<ExposureGrid> truth;
  std::optional<SensorSet> sensors;
  std::optional<BuildingRaster> buildings;
  if (inputs.sensors) {
    if (inputs.truth) truth = read_grid(*inputs.truth);
    if (inputs.buildings) buildings = read_binary_grid(*inputs.buildings);
    if (truth && buildings && !(truth->dims() == buildings->dims())) {
      throw ValidationError("ground truth and building raster dimensions differ");
    }
    const GridDims dims =
        truth ? truth->dims() : (buildings ? buildings->dims() : dims_from_config(cfg));
    sensors = read_sensors(*inputs.sensors, dims);
    if (!buildings) buildings = BinaryGrid::zeros(dims);
  } else {
    if (inputs.truth || inputs.buildings) {
      throw ValidationError("a sensor file is required when grids are loaded from files");
    }
    SceneData sd = build_scene(cfg);
    const int count = static_cast<int>(cfg.get_int("sensors.count", 100));
    sensors = place_sensors(sd.scene, sd.ground_truth, count, derive_seed(run_seed, "sensors"));
    buildings = sd.scene.buildings();
    truth = std::move(sd.ground_truth);
  }

  const int count = static_cast<int>(sensors->readings().size());
  const std::string run_id = run_id_for(method, count, run_seed);
  std::vector<LossSample> curve;
  ExposureGrid predicted = predict(method, *sensors, *buildings, cfg, run_seed, &curve);

  fs::create_directories(out_dir);
  write_grid(predicted, out_dir / "predicted.emgrid");
  write_sensors(*sensors, out_dir / "sensors.csv");
  if (is_net_method(method)) {
    write_loss_csv(out_dir / "loss.csv", curve);
  }
  Config manifest = cfg;
  manifest.set("run.method", method_name(method));
  manifest.set("run.seed", std::to_string(run_seed));
  manifest.set_int("sensors.count", count);
  manifest.set("tool.version", kToolVersion);
  if (inputs.truth) manifest.set("input.truth", inputs.truth->string());
  if (inputs.buildings) manifest.set("input.buildings", inputs.buildings->string());
  if (inputs.sensors) manifest.set("input.sensors", inputs.sensors->string());
  manifest.write_file(out_dir / "manifest");

  if (truth) {
    const ObservationMask mask = rasterize_sensors(*sensors).mask;
    RunRecord rec =
        evaluate_run(*truth, predicted, mask, *buildings, run_id, method, count, run_seed);
    write_grid(error_map(*truth, predicted), out_dir / "error_map.emgrid");
    write_text(out_dir / "metrics.csv", results_csv_header() + "\n" + format_run_row(rec) + "\n");
    return rec;
  }
  RunRecord rec;
  rec.run_id = run_id;
  rec.method = method;
  rec.sensor_count = count;
  rec.seed = run_seed;
  rec.ok = true;
  rec.mse_vm = rec.mae_vm = rec.mse_norm = rec.mae_norm = std::nan("");
  return rec;
}

std::vector<RunRecord> run_sweep(const Config& cfg, const fs::path& out_dir, int jobs) {
  std::vector<Method> methods;
  for (const std::string& name : split_list(cfg.get_string("sweep.methods", "glip,grip"))) {
    methods.push_back(parse_method(name));
  }
  const std::vector<int> counts = cfg.get_int_list("sweep.sensor_counts", {20, 40, 60, 100});
  const std::vector<std::uint64_t> seeds =
      cfg.get_uint_list("sweep.seeds", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  if (methods.empty() || counts.empty() || seeds.empty()) {
    throw ValidationError("sweep needs at least one method, sensor count and seed");
  }
  for (int c : counts) {
    if (c < 1) throw ValidationError("sweep sensor counts must be positive");
  }

  const SceneData sd = build_scene(cfg);
  fs::create_directories(out_dir / "runs");

  struct Job {
    Method method;
    int count;
    std::uint64_t seed;
  };
  std::vector<Job> grid;
  for (Method m : methods) {
    for (int c : counts) {
      for (std::uint64_t s : seeds) grid.push_back(Job{m, c, s});
    }
  }

  std::vector<RunRecord> records(grid.size());
  auto work = [&](std::size_t i) {
    const Job& job = grid[i];
    const std::string run_id = run_id_for(job.method, job.count, job.seed);
    try {
      const SensorSet sensors =
          place_sensors(sd.scene, sd.ground_truth, job.count, derive_seed(job.seed, "sensors"));
      std::vector<LossSample> curve;
      const ExposureGrid predicted =
          predict(job.method, sensors, sd.scene.buildings(), cfg, job.seed, &curve);

      const fs::path run_dir = out_dir / "runs" / run_id;
      fs::create_directories(run_dir);
      write_grid(predicted, run_dir / "predicted.emgrid");
      write_sensors(sensors, run_dir / "sensors.csv");
      if (is_net_method(job.method)) {
        write_loss_csv(run_dir / "loss.csv", curve);
      }
      Config manifest = cfg;
      manifest.set("run.method", method_name(job.method));
      manifest.set("run.seed", std::to_string(job.seed));
      manifest.set_int("sensors.count", job.count);
      manifest.set("tool.version", kToolVersion);
      manifest.write_file(run_dir / "manifest");

      const ObservationMask mask = rasterize_sensors(sensors).mask;
      records[i] = evaluate_run(sd.ground_truth, predicted, mask, sd.scene.buildings(), run_id,
                                job.method, job.count, job.seed);
      write_grid(error_map(sd.ground_truth, predicted), run_dir / "error_map.emgrid");
      write_text(run_dir / "metrics.csv",
                 results_csv_header() + "\n" + format_run_row(records[i]) + "\n");
    } catch (const std::exception& e) {
      RunRecord rec;
      rec.run_id = run_id;
      rec.method = job.method;
      rec.sensor_count = job.count;
      rec.seed = job.seed;
      rec.ok = false;
      rec.error = e.what();
      records[i] = rec;
    }
  };

  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(grid.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < grid.size(); i = next.fetch_add(1)) {
          work(i);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  write_grid(sd.ground_truth, out_dir / "ground_truth.emgrid");
  write_binary_grid(sd.scene.buildings(), out_dir / "buildings.emgrid");
  Config manifest = cfg;
  manifest.set("tool.version", kToolVersion);
  manifest.write_file(out_dir / "manifest");
  write_text(out_dir / "results.csv", results_table(records));
  return records;
}

RunRecord run_metrics(const fs::path& truth_file, const fs::path& predicted_file,
                      const fs::path& sensors_file, const std::optional<fs::path>& buildings_file,
                      Method method, std::uint64_t seed, const std::optional<fs::path>& out_file) {
  const ExposureGrid truth = read_grid(truth_file);
  const ExposureGrid predicted = read_grid(predicted_file);
  const SensorSet sensors = read_sensors(sensors_file, truth.dims());
  const BinaryGrid buildings =
      buildings_file ? read_binary_grid(*buildings_file) : BinaryGrid::zeros(truth.dims());
  const ObservationMask mask = rasterize_sensors(sensors).mask;
  const int count = static_cast<int>(sensors.readings().size());
  RunRecord rec = evaluate_run(truth, predicted, mask, buildings,
                               run_id_for(method, count, seed), method, count, seed);
  if (out_file) {
    write_text(*out_file, results_csv_header() + "\n" + format_run_row(rec) + "\n");
  }
  return rec;
}

void run_render(const fs::path& grid_file, const fs::path& out_file,
                std::optional<double> scale) {
  const ExposureGrid grid = read_grid(grid_file);
  double s;
  if (scale) {
    s = *scale;  // render_pgm rejects non-positive values
  } else {
    const double mx = grid.max_value();
    s = mx > 0.0 ? mx : 1.0;
  }
  const std::string pgm = render_pgm(grid, s);
  if (out_file.has_parent_path()) {
    fs::create_directories(out_file.parent_path());
  }
  write_text(out_file, pgm);
}

}  // namespace expomap
