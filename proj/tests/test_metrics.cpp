#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "expomap/baselines.hpp"
#include "expomap/metrics.hpp"
#include "expomap/rng.hpp"
#include "support/oracles.hpp"

using namespace expomap;

namespace {

const GridDims kDims(8, 8, 1.0);

ExposureGrid fill(const GridDims& dims, double value) {
  return ExposureGrid(dims, std::vector<double>(dims.cell_count(), value));
}

ExposureGrid random_field(const GridDims& dims, std::uint64_t seed, double offset = 0.0) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(dims.cell_count());
  for (double& x : v) x = offset + uniform01(rng);
  return ExposureGrid(dims, std::move(v));
}

BinaryGrid full_mask(const GridDims& dims) {
  return BinaryGrid(dims, std::vector<std::uint8_t>(dims.cell_count(), 1));
}

}  // namespace

TEST_CASE("mse and mae hand examples") {
  const BinaryGrid all = full_mask(kDims);

  SUBCASE("constant error of 1 gives mse 1 and mae 1") {
    CHECK(mse(fill(kDims, 2.0), fill(kDims, 1.0), all) == 1.0);
    CHECK(mae(fill(kDims, 2.0), fill(kDims, 1.0), all) == 1.0);
  }

  SUBCASE("a single masked cell with error 0.5") {
    std::vector<std::uint8_t> bits(kDims.cell_count(), 0);
    bits[kDims.index(4, 5)] = 1;
    const BinaryGrid one(kDims, bits);
    CHECK(mse(fill(kDims, 1.0), fill(kDims, 0.5), one) == 0.25);
    CHECK(mae(fill(kDims, 1.0), fill(kDims, 0.5), one) == 0.5);
  }

  SUBCASE("errors 1 and 3 average to mse 5 and mae 2") {
    ExposureGrid ref = fill(kDims, 3.0);
    ExposureGrid pred = fill(kDims, 3.0);
    std::vector<double> pv = pred.values();
    pv[kDims.index(0, 0)] = 2.0;  // error 1
    pv[kDims.index(0, 1)] = 0.0;  // error 3
    std::vector<std::uint8_t> bits(kDims.cell_count(), 0);
    bits[kDims.index(0, 0)] = 1;
    bits[kDims.index(0, 1)] = 1;
    const BinaryGrid two(kDims, bits);
    CHECK(mse(ref, ExposureGrid(kDims, pv), two) == 5.0);
    CHECK(mae(ref, ExposureGrid(kDims, pv), two) == 2.0);
  }

  SUBCASE("identical grids score zero") {
    const ExposureGrid g = random_field(kDims, 1);
    CHECK(mse(g, g, all) == 0.0);
    CHECK(mae(g, g, all) == 0.0);
  }
}

TEST_CASE("metric properties on random fields") {
  const BinaryGrid all = full_mask(kDims);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const ExposureGrid a = random_field(kDims, derive_seed(seed, "a"));
    const ExposureGrid b = random_field(kDims, derive_seed(seed, "b"));

    // mae <= sqrt(mse) by Jensen, symmetry in the arguments.
    CHECK(mae(a, b, all) <= std::sqrt(mse(a, b, all)) + 1e-15);
    CHECK(mse(a, b, all) == mse(b, a, all));
    CHECK(mae(a, b, all) == mae(b, a, all));
    CHECK(mse(a, b, all) > 0.0);
  }
}

TEST_CASE("error map is the cellwise absolute difference") {
  const ExposureGrid a = random_field(kDims, 3);
  const ExposureGrid b = random_field(kDims, 4);
  const ExposureGrid em = error_map(a, b);
  const ExposureGrid em_rev = error_map(b, a);
  for (int r = 0; r < kDims.rows; ++r) {
    for (int c = 0; c < kDims.cols; ++c) {
      CHECK(em.at(r, c) == std::abs(a.at(r, c) - b.at(r, c)));
      CHECK(em.at(r, c) == em_rev.at(r, c));
    }
  }

  ExposureGrid same = a;
  std::vector<double> v = same.values();
  v[kDims.index(2, 6)] += 0.25;
  const ExposureGrid poked(kDims, v);
  const ExposureGrid single = error_map(a, poked);
  for (int r = 0; r < kDims.rows; ++r) {
    for (int c = 0; c < kDims.cols; ++c) {
      CHECK(single.at(r, c) == (r == 2 && c == 6 ? 0.25 : 0.0));
    }
  }
}

TEST_CASE("evaluate bundles the numbers and the count") {
  std::vector<std::uint8_t> bits(kDims.cell_count(), 0);
  bits[kDims.index(1, 1)] = 1;
  bits[kDims.index(2, 2)] = 1;
  bits[kDims.index(3, 3)] = 1;
  const BinaryGrid three(kDims, bits);
  const ExposureGrid a = random_field(kDims, 7);
  const ExposureGrid b = random_field(kDims, 8);

  const ErrorReport rep = evaluate(a, b, three);
  CHECK(rep.n_evaluated == 3);
  CHECK(rep.mse == mse(a, b, three));
  CHECK(rep.mae == mae(a, b, three));
  CHECK(rep.error_map.values() == error_map(a, b).values());
}

TEST_CASE("metrics reject an empty evaluation mask and bad dims") {
  const ExposureGrid a = random_field(kDims, 9);
  CHECK_THROWS_AS(mse(a, a, BinaryGrid::zeros(kDims)), ValidationError);
  CHECK_THROWS_AS(mae(a, a, BinaryGrid::zeros(kDims)), ValidationError);
  CHECK_THROWS_AS(evaluate(a, a, BinaryGrid::zeros(kDims)), ValidationError);

  const GridDims other(8, 9, 1.0);
  CHECK_THROWS_AS(mse(a, random_field(other, 1), full_mask(other)), ValidationError);
  CHECK_THROWS_AS(error_map(a, random_field(other, 1)), ValidationError);
}

TEST_CASE("held-out mask excludes sensors and buildings") {
  std::vector<std::uint8_t> sensors(kDims.cell_count(), 0);
  sensors[kDims.index(0, 0)] = 1;
  sensors[kDims.index(4, 4)] = 1;
  std::vector<std::uint8_t> buildings(kDims.cell_count(), 0);
  buildings[kDims.index(4, 4)] = 1;
  buildings[kDims.index(7, 7)] = 1;

  const BinaryGrid held =
      heldout_mask(ObservationMask(kDims, sensors), BuildingRaster(kDims, buildings));
  CHECK(held.popcount() == kDims.cell_count() - 3);
  CHECK(!held.at(0, 0));
  CHECK(!held.at(4, 4));
  CHECK(!held.at(7, 7));
  CHECK(held.at(1, 1));
}

TEST_CASE("idw hand examples") {
  SUBCASE("a single sensor paints the whole grid") {
    const SensorSet one(kDims, {{3, 3, 0.8}});
    const ExposureGrid out = idw_interpolate(one, kDims);
    for (double v : out.values()) CHECK(v == 0.8);
  }

  SUBCASE("a cell equidistant from 0 and 1 gets 0.5") {
    const SensorSet pair(kDims, {{2, 0, 0.0}, {2, 4, 1.0}});
    const ExposureGrid out = idw_interpolate(pair, kDims);
    CHECK(out.at(2, 2) == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("sensor cells keep their exact reading") {
    const SensorSet set(kDims, {{0, 0, 0.25}, {5, 2, 1.5}, {7, 7, 0.03}});
    const ExposureGrid out = idw_interpolate(set, kDims);
    CHECK(out.at(0, 0) == 0.25);
    CHECK(out.at(5, 2) == 1.5);
    CHECK(out.at(7, 7) == 0.03);
  }
}

TEST_CASE("idw matches the brute-force oracle") {
  const GridDims dims(16, 16, 1.0);
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<std::uint8_t> taken(dims.cell_count(), 0);
    std::vector<SensorReading> readings;
    while (readings.size() < 12) {
      const int r = static_cast<int>(uniform_index(rng, dims.rows));
      const int c = static_cast<int>(uniform_index(rng, dims.cols));
      if (taken[dims.index(r, c)]) continue;
      taken[dims.index(r, c)] = 1;
      readings.push_back({r, c, 0.01 + uniform01(rng)});
    }
    const SensorSet sensors(dims, readings);
    const double power = trial % 2 == 0 ? 2.0 : 3.5;
    const ExposureGrid fast = idw_interpolate(sensors, dims, power);
    const ExposureGrid brute = oracles::brute_idw(sensors, dims, power);
    for (int r = 0; r < dims.rows; ++r) {
      for (int c = 0; c < dims.cols; ++c) {
        CHECK(fast.at(r, c) == doctest::Approx(brute.at(r, c)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("idw validation") {
  const SensorSet one(kDims, {{3, 3, 0.8}});
  CHECK_THROWS_AS(idw_interpolate(one, kDims, 0.0), ValidationError);
  CHECK_THROWS_AS(idw_interpolate(one, kDims, -1.0), ValidationError);
  CHECK_THROWS_AS(idw_interpolate(SensorSet(kDims, {}), kDims), ValidationError);
  CHECK_THROWS_AS(idw_interpolate(one, GridDims(9, 9, 1.0)), ValidationError);
}

TEST_CASE("nearest-sensor hand examples") {
  SUBCASE("a single sensor paints the whole grid") {
    const SensorSet one(kDims, {{6, 1, 1.25}});
    const ExposureGrid out = nearest_interpolate(one, kDims);
    for (double v : out.values()) CHECK(v == 1.25);
  }

  SUBCASE("ties go to the lexicographically smallest sensor") {
    // (4, 2) is distance 2 from both sensors; (2, 2) wins over (6, 2).
    const SensorSet pair(kDims, {{6, 2, 5.0}, {2, 2, 3.0}});
    const ExposureGrid out = nearest_interpolate(pair, kDims);
    CHECK(out.at(4, 2) == 3.0);
    CHECK(out.at(5, 2) == 5.0);
    CHECK(out.at(3, 2) == 3.0);
  }

  SUBCASE("output values come from the sensor value set") {
    const SensorSet set(kDims, {{0, 0, 0.25}, {5, 2, 1.5}, {7, 7, 0.03}});
    const ExposureGrid out = nearest_interpolate(set, kDims);
    for (double v : out.values()) {
      CHECK((v == 0.25 || v == 1.5 || v == 0.03));
    }
    CHECK(out.at(0, 0) == 0.25);
    CHECK(out.at(5, 2) == 1.5);
    CHECK(out.at(7, 7) == 0.03);
  }
}

TEST_CASE("nearest-sensor matches the brute-force oracle") {
  const GridDims dims(16, 16, 1.0);
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<std::uint8_t> taken(dims.cell_count(), 0);
    std::vector<SensorReading> readings;
    while (readings.size() < 10) {
      const int r = static_cast<int>(uniform_index(rng, dims.rows));
      const int c = static_cast<int>(uniform_index(rng, dims.cols));
      if (taken[dims.index(r, c)]) continue;
      taken[dims.index(r, c)] = 1;
      readings.push_back({r, c, 0.01 + uniform01(rng)});
    }
    const SensorSet sensors(dims, readings);
    CHECK(nearest_interpolate(sensors, dims).values() ==
          oracles::brute_nearest(sensors, dims).values());
  }
}

TEST_CASE("nearest-sensor validation") {
  CHECK_THROWS_AS(nearest_interpolate(SensorSet(kDims, {}), kDims), ValidationError);
  const SensorSet one(kDims, {{3, 3, 0.8}});
  CHECK_THROWS_AS(nearest_interpolate(one, GridDims(9, 9, 1.0)), ValidationError);
}
