#include "expomap/field_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "expomap/rng.hpp"

namespace expomap {

Scene::Scene(GridDims dims, BuildingRaster buildings, std::vector<Transmitter> transmitters,
             std::uint64_t seed)
    : dims_(dims),
      buildings_(std::move(buildings)),
      transmitters_(std::move(transmitters)),
      seed_(seed) {
  if (!(buildings_.dims() == dims_)) {
    throw ValidationError("building raster dims do not match scene dims");
  }
  if (transmitters_.empty() || transmitters_.size() > 8) {
    throw ValidationError("scene requires 1..8 transmitters, got " +
                          std::to_string(transmitters_.size()));
  }
  for (const Transmitter& tx : transmitters_) {
    if (!dims_.in_bounds(tx.row, tx.col)) {
      throw ValidationError("transmitter at (" + std::to_string(tx.row) + ", " +
                            std::to_string(tx.col) + ") is out of bounds");
    }
    if (!(tx.power_w > 0.0) || !std::isfinite(tx.power_w)) {
      throw ValidationError("transmitter power must be positive");
    }
    if (!(tx.frequency_hz > 0.0)) {
      throw ValidationError("transmitter frequency must be positive");
    }
    if (buildings_.at(tx.row, tx.col)) {
      throw ValidationError("transmitter at (" + std::to_string(tx.row) + ", " +
                            std::to_string(tx.col) + ") is inside a building cell");
    }
  }
}

void PropagationConfig::validate() const {
  if (wall_loss_db < 0.0 || !std::isfinite(wall_loss_db)) {
    throw ValidationError("wall_loss_db must be non-negative");
  }
  if (!(min_distance_cells > 0.0)) {
    throw ValidationError("min_distance_cells must be positive");
  }
}

std::vector<std::pair<int, int>> traverse_segment(const GridDims& dims, int from_row,
                                                  int from_col, int to_row, int to_col) {
  if (!dims.in_bounds(from_row, from_col) || !dims.in_bounds(to_row, to_col)) {
    throw ValidationError("segment endpoint out of bounds");
  }
  std::vector<std::pair<int, int>> cells;
  int r = from_row, c = from_col;
  const int dr = to_row - from_row;
  const int dc = to_col - from_col;
  const int step_r = (dr > 0) - (dr < 0);
  const int step_c = (dc > 0) - (dc < 0);
  // Crossing parameters as exact fractions: the next row boundary lies at
  // t = (2|r - r0| + 1) / (2|dr|), likewise for columns. Comparing with
  // cross-multiplied 64-bit integers keeps corner hits exact.
  const std::int64_t den_r = 2 * std::int64_t(std::abs(dr));
  const std::int64_t den_c = 2 * std::int64_t(std::abs(dc));
  cells.emplace_back(r, c);
  while (r != to_row || c != to_col) {
    bool move_r;
    bool move_c;
    if (dr == 0) {
      move_r = false;
      move_c = true;
    } else if (dc == 0) {
      move_r = true;
      move_c = false;
    } else {
      const std::int64_t num_r = 2 * std::int64_t(std::abs(r - from_row)) + 1;
      const std::int64_t num_c = 2 * std::int64_t(std::abs(c - from_col)) + 1;
      const std::int64_t lhs = num_r * den_c;
      const std::int64_t rhs = num_c * den_r;
      move_r = lhs <= rhs;
      move_c = rhs <= lhs;  // equal: exact corner, step diagonally
    }
    if (move_r) r += step_r;
    if (move_c) c += step_c;
    cells.emplace_back(r, c);
  }
  return cells;
}

int count_wall_crossings(const Scene& scene, int from_row, int from_col, int to_row, int to_col) {
  // Canonical endpoint order makes symmetry exact by construction.
  if (std::pair(from_row, from_col) > std::pair(to_row, to_col)) {
    std::swap(from_row, to_row);
    std::swap(from_col, to_col);
  }
  const auto cells = traverse_segment(scene.dims(), from_row, from_col, to_row, to_col);
  int runs = 0;
  bool inside = false;
  for (const auto& [r, c] : cells) {
    const bool b = scene.buildings().at(r, c);
    if (b && !inside) ++runs;
    inside = b;
  }
  return runs;
}

ExposureGrid generate_ground_truth(const Scene& scene, const PropagationConfig& cfg) {
  cfg.validate();
  const GridDims& dims = scene.dims();
  const double d_min = cfg.min_distance_cells * dims.cell_size_m;
  std::vector<double> values(dims.cell_count(), 0.0);
  for (int r = 0; r < dims.rows; ++r) {
    for (int c = 0; c < dims.cols; ++c) {
      if (scene.buildings().at(r, c)) continue;
      double power_sum = 0.0;
      for (const Transmitter& tx : scene.transmitters()) {
        const double dy = (r - tx.row) * dims.cell_size_m;
        const double dx = (c - tx.col) * dims.cell_size_m;
        const double d = std::max(std::sqrt(dy * dy + dx * dx), d_min);
        const int walls = count_wall_crossings(scene, tx.row, tx.col, r, c);
        const double atten = std::pow(10.0, -cfg.wall_loss_db * walls / 20.0);
        const double e = std::sqrt(30.0 * tx.power_w) / d * atten;
        power_sum += e * e;
      }
      values[dims.index(r, c)] = std::sqrt(power_sum);
    }
  }
  return ExposureGrid(dims, std::move(values));
}

SensorSet place_sensors(const Scene& scene, const ExposureGrid& ground_truth, int count,
                        std::uint64_t seed) {
  const GridDims& dims = scene.dims();
  if (!(ground_truth.dims() == dims)) {
    throw ValidationError("ground truth dims do not match scene dims");
  }
  if (count < 0) {
    throw ValidationError("sensor count must be non-negative");
  }
  std::vector<std::size_t> open;
  open.reserve(dims.cell_count());
  for (std::size_t i = 0; i < dims.cell_count(); ++i) {
    if (!scene.buildings().bits()[i]) open.push_back(i);
  }
  if (static_cast<std::size_t>(count) > open.size()) {
    throw ValidationError("requested " + std::to_string(count) + " sensors but only " +
                          std::to_string(open.size()) + " non-building cells exist");
  }
  std::mt19937_64 rng(seed);
  std::vector<SensorReading> readings;
  readings.reserve(count);
  // Partial Fisher-Yates: the first n draws are identical for every count,
  // which makes sensor sets nest across densities at a fixed seed.
  for (int i = 0; i < count; ++i) {
    const std::size_t j = i + uniform_index(rng, open.size() - i);
    std::swap(open[i], open[j]);
    const int r = static_cast<int>(open[i] / dims.cols);
    const int c = static_cast<int>(open[i] % dims.cols);
    readings.push_back(SensorReading{r, c, ground_truth.at(r, c)});
  }
  return SensorSet(dims, std::move(readings));
}

Scene make_random_scene(const GridDims& dims, std::uint64_t seed, const SceneSynthOptions& opts) {
  if (opts.n_transmitters < 1 || opts.n_transmitters > 8) {
    throw ValidationError("n_transmitters must be in 1..8");
  }
  if (opts.building_fraction < 0.0 || opts.building_fraction > 0.6) {
    throw ValidationError("building_fraction must be in [0, 0.6]");
  }
  std::mt19937_64 rng(derive_seed(seed, "scene"));
  std::vector<std::uint8_t> bits(dims.cell_count(), 0);

  // City blocks on a regular pitch with streets between them. Block presence
  // probability is tuned so expected coverage tracks building_fraction.
  const int pitch = std::max(8, std::min(dims.rows, dims.cols) / 8);
  const int street = std::max(2, pitch / 4);
  const int slot = pitch - street;
  const double mean_block = (slot - 1.0) * (slot - 1.0);
  const double p_present =
      std::clamp(opts.building_fraction * pitch * pitch / mean_block, 0.0, 0.95);
  for (int br = 0; br * pitch + street < dims.rows; ++br) {
    for (int bc = 0; bc * pitch + street < dims.cols; ++bc) {
      if (uniform01(rng) >= p_present) continue;
      const int shrink_r = static_cast<int>(uniform_index(rng, 3));
      const int shrink_c = static_cast<int>(uniform_index(rng, 3));
      const int r0 = br * pitch + street;
      const int c0 = bc * pitch + street;
      const int r1 = std::min(dims.rows, r0 + slot - shrink_r);
      const int c1 = std::min(dims.cols, c0 + slot - shrink_c);
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
          bits[dims.index(r, c)] = 1;
        }
      }
    }
  }

  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < dims.cell_count(); ++i) {
    if (!bits[i]) open.push_back(i);
  }
  if (open.size() < static_cast<std::size_t>(opts.n_transmitters)) {
    throw ValidationError("scene synthesis left too few open cells for transmitters");
  }

  std::mt19937_64 tx_rng(derive_seed(seed, "transmitters"));
  std::vector<Transmitter> txs;
  const double min_sep = std::min(dims.rows, dims.cols) / 4.0;
  for (int k = 0; k < opts.n_transmitters; ++k) {
    int best_r = -1, best_c = -1;
    for (int attempt = 0; attempt < 64; ++attempt) {
      const std::size_t i = open[uniform_index(tx_rng, open.size())];
      const int r = static_cast<int>(i / dims.cols);
      const int c = static_cast<int>(i % dims.cols);
      bool far_enough = true;
      for (const Transmitter& t : txs) {
        const double d = std::hypot(double(r - t.row), double(c - t.col));
        if (d < min_sep) {
          far_enough = false;
          break;
        }
      }
      best_r = r;
      best_c = c;
      if (far_enough) break;
    }
    txs.push_back(Transmitter{best_r, best_c, opts.tx_power_w, opts.tx_frequency_hz});
  }
  return Scene(dims, BinaryGrid(dims, std::move(bits)), std::move(txs), seed);
}

}  // namespace expomap
