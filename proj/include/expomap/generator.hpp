#pragma once

#include <cstdint>
#include <vector>

#include "expomap/autodiff.hpp"
#include "expomap/grid.hpp"

namespace expomap {

// Fixed nonlinearity constants used by every level of the generator.
inline constexpr double kLeakySlope = 0.2;
inline constexpr double kBnEps = 1e-5;

enum class FinalActivation { Sigmoid, None };

std::string final_activation_name(FinalActivation a);
FinalActivation parse_final_activation(const std::string& name);

// Hourglass generator description. Level i of the encoder halves the
// spatial size with a strided conv; the decoder mirrors it with nearest
// upsampling, and every level has a convolutional skip branch tapping the
// feature map as it was before that encoder level.
struct NetConfig {
  int depth = 6;
  std::vector<int> enc_channels = {16, 32, 64, 128, 128, 128};
  std::vector<int> skip_channels = {4, 4, 4, 4, 4, 4};
  int enc_kernel = 3;
  int dec_kernel = 3;
  int skip_kernel = 1;
  // Optional per-level kernel override for encoder/decoder convs; level i
  // uses kernel_cycle[i % size]. Empty means the scalar kernels above.
  std::vector<int> kernel_cycle;
  int down_stride = 2;
  int out_channels = 1;
  FinalActivation final_activation = FinalActivation::Sigmoid;
  // 1 feeds the sparse exposure image alone; 2 adds the observation mask as
  // a second channel. The mask channel lets the net localize the supervised
  // pixels and collapse into per-sensor memorization, so it is off by default.
  int input_channels = 1;

  void validate() const;

  int enc_kernel_at(int level) const;
  int dec_kernel_at(int level) const;
  // Channels entering encoder level `level` (also what its skip branch sees).
  int enc_in_channels(int level) const;
  // Channels entering decoder level `level`: the upsampled feature from the
  // level below concatenated with the skip branch output.
  int dec_in_channels(int level) const;

  // Total scalar parameter count, computed without building anything.
  std::size_t param_count() const;
};

enum class PriorMode { GLIP, GRIP };

struct PriorInput {
  Tensor4 tensor;  // (1, input_channels, M, N)
  PriorMode mode = PriorMode::GLIP;
};

// GLIP: channel 0 is the sparse exposure image scaled so its peak is 1,
// channel 1 (when input_channels is 2) the observation mask. GRIP: every
// channel is i.i.d. uniform noise in (0, 0.1). Deterministic per seed.
PriorInput make_prior_input(PriorMode mode, const ExposureGrid& sparse, const ObservationMask& mask,
                            std::uint64_t seed, int input_channels);

class GeneratorNet {
 public:
  // Builds and initializes all parameters from the seed: conv weights
  // uniform in [-a, a] with a = sqrt(1 / fan_in), biases zero, batch-norm
  // gamma one and beta zero.
  GeneratorNet(NetConfig cfg, std::uint64_t seed);

  const NetConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Records the whole network on the caller's tape and returns the output
  // variable of shape (1, out_channels, M, N). The input spatial size must
  // be divisible by down_stride^depth; that is checked before anything is
  // recorded.
  Tape::Var forward(Tape& tape, Tape::Var input);

  // Convenience single evaluation on a private tape.
  Tensor4 forward(const PriorInput& z);

 private:
  NetConfig cfg_;
  ParamStore params_;
};

}  // namespace expomap
