#pragma once

#include <cstdint>
#include <vector>

#include "expomap/grid.hpp"

namespace expomap {

// A point source at a grid cell. Frequency is carried as metadata only; the
// propagation model is frequency-agnostic.
struct Transmitter {
  int row = 0;
  int col = 0;
  double power_w = 120.0;
  double frequency_hz = 5.89e9;
};

// Synthetic urban scene: grid geometry, building raster, transmitters.
class Scene {
 public:
  Scene(GridDims dims, BuildingRaster buildings, std::vector<Transmitter> transmitters,
        std::uint64_t seed);

  const GridDims& dims() const { return dims_; }
  const BuildingRaster& buildings() const { return buildings_; }
  const std::vector<Transmitter>& transmitters() const { return transmitters_; }
  std::uint64_t seed() const { return seed_; }

  // Height of the virtual measurement plane; metadata only, the grid is 2-D.
  double sensor_height_m = 1.5;

 private:
  GridDims dims_;
  BuildingRaster buildings_;
  std::vector<Transmitter> transmitters_;
  std::uint64_t seed_ = 0;
};

// Free-space magnitude with per-wall attenuation:
//   E = sqrt(30 P) / max(d, d_min) * 10^(-wall_loss_db * W / 20)
// d is the center-to-center distance in meters, W the number of building
// entries along the segment. Contributions from multiple transmitters add
// in power (root sum of squares).
struct PropagationConfig {
  double wall_loss_db = 10.0;
  double min_distance_cells = 1.0;

  void validate() const;
};

ExposureGrid generate_ground_truth(const Scene& scene, const PropagationConfig& cfg);

// Number of distinct building runs intersected by the straight segment
// between the two cell centers (each solid building crossed counts once).
// Symmetric in its arguments. Equals the count of open-to-building
// transitions whenever the start cell is open.
int count_wall_crossings(const Scene& scene, int from_row, int from_col, int to_row, int to_col);

// Cells the segment between the two centers passes through, in travel order.
// A crossing exactly through a cell corner steps diagonally, skipping the two
// side cells (only cells whose interior the segment enters are visited).
std::vector<std::pair<int, int>> traverse_segment(const GridDims& dims, int from_row,
                                                  int from_col, int to_row, int to_col);

// Uniform draw of `count` distinct non-building cells; each reading carries
// the ground-truth value at its cell. Sets drawn with the same seed nest:
// the n-sensor set is a prefix of the m-sensor set for n < m.
SensorSet place_sensors(const Scene& scene, const ExposureGrid& ground_truth, int count,
                        std::uint64_t seed);

// Seeded synthetic city: rectangular blocks on a street grid, plus
// transmitters placed on open cells away from each other.
struct SceneSynthOptions {
  int n_transmitters = 2;
  double building_fraction = 0.20;
  double tx_power_w = 120.0;
  double tx_frequency_hz = 5.89e9;
};

Scene make_random_scene(const GridDims& dims, std::uint64_t seed,
                        const SceneSynthOptions& opts = {});

}  // namespace expomap
