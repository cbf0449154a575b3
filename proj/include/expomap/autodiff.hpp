#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "expomap/grid.hpp"

namespace expomap {

// Dense 4-D array in (batch, channels, rows, cols) layout, row-major with
// cols fastest. Carries its own gradient buffer when used as a parameter.
struct Shape4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(n) * c * static_cast<std::size_t>(h) * w;
  }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

struct Tensor4 {
  Shape4 shape;
  std::vector<double> v;  // values
  std::vector<double> g;  // gradient; empty until populated by backward()

  Tensor4() = default;
  explicit Tensor4(Shape4 s);
  Tensor4(Shape4 s, std::vector<double> values);

  std::size_t size() const { return v.size(); }
  std::size_t idx(int in, int ic, int iy, int ix) const {
    return ((static_cast<std::size_t>(in) * shape.c + ic) * shape.h + iy) * shape.w + ix;
  }
  double at(int in, int ic, int iy, int ix) const { return v[idx(in, ic, iy, ix)]; }
  double& at(int in, int ic, int iy, int ix) { return v[idx(in, ic, iy, ix)]; }

  bool has_grad() const { return !g.empty(); }
  void ensure_grad() {
    if (g.empty()) g.assign(v.size(), 0.0);
  }
  void zero_grad() {
    if (!g.empty()) g.assign(v.size(), 0.0);
  }
};

Tensor4 tensor_from(const ExposureGrid& grid);
Tensor4 tensor_from(const BinaryGrid& mask);

// Named parameters in stable insertion order.
class ParamStore {
 public:
  Tensor4& add(const std::string& name, Tensor4 t);
  Tensor4& at(const std::string& name);
  const Tensor4& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor4& tensor(std::size_t i) { return tensors_[i]; }
  const Tensor4& tensor(std::size_t i) const { return tensors_[i]; }

  std::size_t total_values() const;
  bool grads_populated() const;
  void zero_grads();

 private:
  std::vector<std::string> names_;
  std::vector<Tensor4> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ADAM with bias correction. Moment buffers follow ParamStore order.
struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState(const ParamStore& params, AdamConfig cfg);

  // One update from the gradients currently held by the parameters.
  // Gradients are left untouched; the caller clears them.
  void step(ParamStore& params);

  long step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// Reverse-mode tape. Operations execute eagerly and record their backward
// step; backward() replays the records in exact reverse order, then the tape
// is consumed. One tape per forward pass.
class Tape {
 public:
  struct Var {
    int id = -1;
  };

  struct Padding {
    int top = 0;
    int bottom = 0;
    int left = 0;
    int right = 0;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Parameter entry point: backward() accumulates into param.g.
  Var leaf(Tensor4& param);
  // Non-differentiable input.
  Var constant(const Tensor4& value);

  // Cross-correlation (no kernel flip). weight is (outC, inC, kH, kW),
  // bias is (1, outC, 1, 1). Accumulation order per output pixel: bias
  // first, then inC-major, kernel-row, kernel-col.
  Var conv2d(Var input, Var weight, Var bias, int stride, int padding);
  Var conv2d(Var input, Var weight, Var bias, int stride, Padding pad);

  Var upsample_nearest(Var input, int factor);
  Var leaky_relu(Var input, double slope);
  // Per-channel standardization over (batch, rows, cols) with the current
  // batch statistics; gamma/beta are (1, C, 1, 1).
  Var batch_norm(Var input, Var gamma, Var beta, double eps);
  Var concat_channels(Var a, Var b);
  Var sigmoid(Var input);

  // Mean squared error over masked cells only:
  //   L = (1/popcount) * sum_i mask_i * (pred_i - target_i)^2
  // Unmasked cells contribute exactly zero gradient.
  Var masked_sq_loss(Var pred, const Tensor4& target, const Tensor4& mask);
  Var masked_sq_loss(Var pred, const ExposureGrid& target, const ObservationMask& mask);

  Shape4 shape(Var v) const;
  const std::vector<double>& values(Var v) const;
  double scalar(Var v) const;
  Tensor4 tensor(Var v) const;

  void backward(Var loss);
  bool consumed() const { return consumed_; }
  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Shape4 shape;
    std::vector<double> val;
    std::vector<double> grad;
    std::function<void(Tape&)> back;  // null for leaves and constants
    Tensor4* leaf = nullptr;
  };

  int push(Shape4 shape, std::vector<double> val);
  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace expomap
