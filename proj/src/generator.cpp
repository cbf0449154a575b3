#include "expomap/generator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "expomap/rng.hpp"

namespace expomap {

namespace {

bool kernel_ok(int k) { return k >= 1 && k <= 4; }

// "Same" padding: stride 1 preserves the spatial size, stride s divides it
// exactly when s divides the input. Even kernels pad one extra cell at the
// bottom/right.
Tape::Padding same_padding(int kernel) {
  const int before = (kernel - 1) / 2;
  const int after = kernel - 1 - before;
  return Tape::Padding{before, after, before, after};
}

}  // namespace

std::string final_activation_name(FinalActivation a) {
  return a == FinalActivation::Sigmoid ? "sigmoid" : "none";
}

FinalActivation parse_final_activation(const std::string& name) {
  if (name == "sigmoid") return FinalActivation::Sigmoid;
  if (name == "none") return FinalActivation::None;
  throw ValidationError("unknown final activation '" + name + "'");
}

void NetConfig::validate() const {
  if (depth < 1) {
    throw ValidationError("net depth must be >= 1");
  }
  if (static_cast<int>(enc_channels.size()) != depth) {
    throw ValidationError("enc_channels must list exactly " + std::to_string(depth) +
                          " levels, got " + std::to_string(enc_channels.size()));
  }
  if (static_cast<int>(skip_channels.size()) != depth) {
    throw ValidationError("skip_channels must list exactly " + std::to_string(depth) +
                          " levels, got " + std::to_string(skip_channels.size()));
  }
  for (int c : enc_channels) {
    if (c < 1) throw ValidationError("enc_channels entries must be positive");
  }
  for (int c : skip_channels) {
    if (c < 1) throw ValidationError("skip_channels entries must be positive");
  }
  if (!kernel_ok(enc_kernel) || !kernel_ok(dec_kernel) || !kernel_ok(skip_kernel)) {
    throw ValidationError("kernels must lie in {1, 2, 3, 4}");
  }
  for (int k : kernel_cycle) {
    if (!kernel_ok(k)) throw ValidationError("kernel_cycle entries must lie in {1, 2, 3, 4}");
  }
  if (down_stride < 1) {
    throw ValidationError("down_stride must be >= 1");
  }
  if (out_channels < 1) {
    throw ValidationError("out_channels must be >= 1");
  }
  if (input_channels < 1) {
    throw ValidationError("input_channels must be >= 1");
  }
}

int NetConfig::enc_kernel_at(int level) const {
  return kernel_cycle.empty() ? enc_kernel
                              : kernel_cycle[static_cast<std::size_t>(level) % kernel_cycle.size()];
}

int NetConfig::dec_kernel_at(int level) const {
  return kernel_cycle.empty() ? dec_kernel
                              : kernel_cycle[static_cast<std::size_t>(level) % kernel_cycle.size()];
}

int NetConfig::enc_in_channels(int level) const {
  return level == 0 ? input_channels : enc_channels[level - 1];
}

int NetConfig::dec_in_channels(int level) const {
  return enc_channels[std::min(level + 1, depth - 1)] + skip_channels[level];
}

std::size_t NetConfig::param_count() const {
  validate();
  std::size_t total = 0;
  auto conv_bn = [](int out, int in, int k) {
    return static_cast<std::size_t>(out) * in * k * k + 3u * static_cast<std::size_t>(out);
  };
  for (int i = 0; i < depth; ++i) {
    total += conv_bn(enc_channels[i], enc_in_channels(i), enc_kernel_at(i));
    total += conv_bn(skip_channels[i], enc_in_channels(i), skip_kernel);
    total += conv_bn(enc_channels[i], dec_in_channels(i), dec_kernel_at(i));
  }
  total += static_cast<std::size_t>(out_channels) * enc_channels[0] + out_channels;
  return total;
}

PriorInput make_prior_input(PriorMode mode, const ExposureGrid& sparse, const ObservationMask& mask,
                            std::uint64_t seed, int input_channels) {
  if (input_channels < 1) {
    throw ValidationError("input_channels must be >= 1");
  }
  if (!(sparse.dims() == mask.dims())) {
    throw ValidationError("sparse image and mask dimensions differ");
  }
  const int rows = sparse.dims().rows;
  const int cols = sparse.dims().cols;
  PriorInput z;
  z.mode = mode;
  z.tensor = Tensor4(Shape4{1, input_channels, rows, cols});
  if (mode == PriorMode::GLIP) {
    if (input_channels > 2) {
      throw ValidationError("GLIP prior supports at most 2 input channels");
    }
    if (mask.popcount() == 0) {
      throw ValidationError("GLIP prior needs at least one observation");
    }
    const NormalizedGrid norm = normalize(sparse);
    const std::size_t plane = static_cast<std::size_t>(rows) * cols;
    std::copy(norm.grid.values().begin(), norm.grid.values().end(), z.tensor.v.begin());
    if (input_channels == 2) {
      for (std::size_t i = 0; i < plane; ++i) {
        z.tensor.v[plane + i] = static_cast<double>(mask.bits()[i]);
      }
    }
  } else {
    std::mt19937_64 rng(seed);
    for (double& x : z.tensor.v) {
      x = 0.1 * uniform_open01(rng);
    }
  }
  return z;
}

GeneratorNet::GeneratorNet(NetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  auto add_conv = [&](const std::string& prefix, int out, int in, int k, bool with_bn) {
    const double a = std::sqrt(1.0 / (static_cast<double>(in) * k * k));
    Tensor4 w(Shape4{out, in, k, k});
    for (double& x : w.v) x = uniform_symmetric(rng, a);
    params_.add(prefix + ".w", std::move(w));
    params_.add(prefix + ".b", Tensor4(Shape4{1, out, 1, 1}));
    if (with_bn) {
      Tensor4 g(Shape4{1, out, 1, 1});
      std::fill(g.v.begin(), g.v.end(), 1.0);
      params_.add(prefix + ".bn_g", std::move(g));
      params_.add(prefix + ".bn_b", Tensor4(Shape4{1, out, 1, 1}));
    }
  };
  for (int i = 0; i < cfg_.depth; ++i) {
    add_conv("enc" + std::to_string(i), cfg_.enc_channels[i], cfg_.enc_in_channels(i),
             cfg_.enc_kernel_at(i), true);
  }
  for (int i = 0; i < cfg_.depth; ++i) {
    add_conv("skip" + std::to_string(i), cfg_.skip_channels[i], cfg_.enc_in_channels(i),
             cfg_.skip_kernel, true);
  }
  for (int i = 0; i < cfg_.depth; ++i) {
    add_conv("dec" + std::to_string(i), cfg_.enc_channels[i], cfg_.dec_in_channels(i),
             cfg_.dec_kernel_at(i), true);
  }
  add_conv("head", cfg_.out_channels, cfg_.enc_channels[0], 1, false);
}

Tape::Var GeneratorNet::forward(Tape& tape, Tape::Var input) {
  const Shape4 is = tape.shape(input);
  if (is.n != 1 || is.c != cfg_.input_channels) {
    throw ValidationError("generator input shape " + is.str() + " must be (1, " +
                          std::to_string(cfg_.input_channels) + ", M, N)");
  }
  long div = 1;
  for (int i = 0; i < cfg_.depth; ++i) div *= cfg_.down_stride;
  if (is.h % div != 0 || is.w % div != 0) {
    throw ValidationError("input spatial size " + std::to_string(is.h) + "x" +
                          std::to_string(is.w) + " is not divisible by stride^depth = " +
                          std::to_string(div));
  }

  auto conv_block = [&](Tape::Var x, const std::string& prefix, int stride, int kernel) {
    Tape::Var w = tape.leaf(params_.at(prefix + ".w"));
    Tape::Var b = tape.leaf(params_.at(prefix + ".b"));
    Tape::Var y = tape.conv2d(x, w, b, stride, same_padding(kernel));
    Tape::Var g = tape.leaf(params_.at(prefix + ".bn_g"));
    Tape::Var bt = tape.leaf(params_.at(prefix + ".bn_b"));
    y = tape.batch_norm(y, g, bt, kBnEps);
    return tape.leaky_relu(y, kLeakySlope);
  };

  // Encoder; feats[i] is the map entering level i, which the skip branch taps.
  std::vector<Tape::Var> feats;
  feats.reserve(cfg_.depth);
  Tape::Var f = input;
  for (int i = 0; i < cfg_.depth; ++i) {
    feats.push_back(f);
    f = conv_block(f, "enc" + std::to_string(i), cfg_.down_stride, cfg_.enc_kernel_at(i));
  }

  // Decoder, deepest level first. The upsampled feature goes before the skip
  // output in the concatenation.
  for (int j = cfg_.depth - 1; j >= 0; --j) {
    f = tape.upsample_nearest(f, cfg_.down_stride);
    Tape::Var s = conv_block(feats[j], "skip" + std::to_string(j), 1, cfg_.skip_kernel);
    f = tape.concat_channels(f, s);
    Tape::Var w = tape.leaf(params_.at("dec" + std::to_string(j) + ".w"));
    Tape::Var b = tape.leaf(params_.at("dec" + std::to_string(j) + ".b"));
    f = tape.conv2d(f, w, b, 1, same_padding(cfg_.dec_kernel_at(j)));
    Tape::Var g = tape.leaf(params_.at("dec" + std::to_string(j) + ".bn_g"));
    Tape::Var bt = tape.leaf(params_.at("dec" + std::to_string(j) + ".bn_b"));
    f = tape.batch_norm(f, g, bt, kBnEps);
    f = tape.leaky_relu(f, kLeakySlope);
  }

  Tape::Var hw = tape.leaf(params_.at("head.w"));
  Tape::Var hb = tape.leaf(params_.at("head.b"));
  f = tape.conv2d(f, hw, hb, 1, 0);
  if (cfg_.final_activation == FinalActivation::Sigmoid) {
    f = tape.sigmoid(f);
  }
  return f;
}

Tensor4 GeneratorNet::forward(const PriorInput& z) {
  Tape tape;
  Tape::Var in = tape.constant(z.tensor);
  Tape::Var out = forward(tape, in);
  return tape.tensor(out);
}

}  // namespace expomap
