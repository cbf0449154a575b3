#include "expomap/reconstruct.hpp"

#include <cmath>

#include "expomap/rng.hpp"

namespace expomap {

void ReconstructionConfig::validate() const {
  if (epochs < 1) {
    throw ValidationError("epochs must be >= 1");
  }
  if (!(lr > 0.0)) {
    throw ValidationError("learning rate must be positive");
  }
  if (log_every < 1) {
    throw ValidationError("log_every must be >= 1");
  }
  net.validate();
}

ExposureGrid suppress_buildings(const ExposureGrid& grid, const BuildingRaster& buildings) {
  if (!(grid.dims() == buildings.dims())) {
    throw ValidationError("grid and building raster dimensions differ");
  }
  std::vector<double> v = grid.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (buildings.bits()[i]) v[i] = 0.0;
  }
  return ExposureGrid(grid.dims(), std::move(v));
}

ReconstructionResult fit_to_target(const ExposureGrid& target, const ObservationMask& mask,
                                   const BuildingRaster& buildings,
                                   const ReconstructionConfig& cfg) {
  cfg.validate();
  if (!(target.dims() == mask.dims()) || !(target.dims() == buildings.dims())) {
    throw ValidationError("target, mask and building raster dimensions differ");
  }

  // The training view of the world: observed, non-building cells only.
  // Everything downstream derives from `sparse` and `train_mask`, so cells
  // outside the mask are invisible to the whole fit.
  std::vector<std::uint8_t> mbits = mask.bits();
  for (std::size_t i = 0; i < mbits.size(); ++i) {
    if (buildings.bits()[i]) mbits[i] = 0;
  }
  ObservationMask train_mask(mask.dims(), std::move(mbits));
  if (train_mask.popcount() == 0) {
    throw ValidationError("no usable observation outside buildings");
  }
  std::vector<double> sv(target.dims().cell_count(), 0.0);
  for (std::size_t i = 0; i < sv.size(); ++i) {
    if (train_mask.bits()[i]) sv[i] = target.values()[i];
  }
  ExposureGrid sparse(target.dims(), std::move(sv));

  const NormalizedGrid norm = normalize(sparse);
  const PriorInput z = make_prior_input(cfg.prior_mode, sparse, train_mask,
                                        derive_seed(cfg.seed, "prior"), cfg.net.input_channels);
  GeneratorNet net(cfg.net, derive_seed(cfg.seed, "init"));
  const Tensor4 target_t = tensor_from(norm.grid);
  const Tensor4 mask_t = tensor_from(train_mask);

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  AdamState adam(net.params(), adam_cfg);

  std::vector<LossSample> curve;
  curve.reserve((cfg.epochs + cfg.log_every - 1) / cfg.log_every);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Tape tape;
    Tape::Var out = net.forward(tape, tape.constant(z.tensor));
    Tape::Var loss = tape.masked_sq_loss(out, target_t, mask_t);
    const double value = tape.scalar(loss);
    if (!std::isfinite(value)) {
      throw DivergenceError("non-finite loss", epoch);
    }
    if ((epoch - 1) % cfg.log_every == 0) {
      curve.push_back(LossSample{epoch, value});
    }
    tape.backward(loss);
    adam.step(net.params());
    net.params().zero_grads();
  }

  Tape tape;
  Tape::Var out = net.forward(tape, tape.constant(z.tensor));
  const double final_loss = tape.scalar(tape.masked_sq_loss(out, target_t, mask_t));
  std::vector<double> pred = tape.values(out);
  for (double& x : pred) {
    if (!std::isfinite(x)) {
      throw DivergenceError("non-finite prediction", cfg.epochs);
    }
    x = std::max(x, 0.0) * norm.scale;
  }
  ExposureGrid predicted(target.dims(), std::move(pred));
  if (cfg.suppress_buildings) {
    predicted = suppress_buildings(predicted, buildings);
  }
  const double initial_loss = curve.front().loss;
  return ReconstructionResult{std::move(predicted), std::move(curve), cfg.epochs, cfg.seed,
                              norm.scale,           initial_loss,     final_loss};
}

ReconstructionResult fit(const SensorSet& sensors, const BuildingRaster& buildings,
                         const ReconstructionConfig& cfg) {
  if (sensors.readings().empty()) {
    throw ValidationError("sensor set is empty");
  }
  const SparseObservation obs = rasterize_sensors(sensors);
  return fit_to_target(obs.image, obs.mask, buildings, cfg);
}

}  // namespace expomap
