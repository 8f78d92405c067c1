#pragma once

// TinyPulseNet: spatial mean pooling followed by a stack of same-padded
// temporal convolutions. Maps a T x W x H x C clip to a length-T waveform.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pulse/autodiff.hpp"
#include "pulse/signal.hpp"

namespace pulse {

// Pixel (t, w, h, c) lives at ((t * W + w) * H + h) * C + c.
struct Clip {
  std::size_t frames = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  double fps = 30.0;
  std::string id;
  std::vector<double> data;

  std::size_t frame_size() const { return width * height * channels; }
  double at(std::size_t t, std::size_t w, std::size_t h, std::size_t c) const {
    return data[((t * width + w) * height + h) * channels + c];
  }
  void validate() const;
};

// Per-frame spatial means, [channels, frames] channel-major, each channel
// standardized over time (zero mean, unit variance unless constant).
struct PooledClip {
  std::size_t channels = 0;
  std::size_t frames = 0;
  double fps = 30.0;
  std::vector<double> data;
};

PooledClip pool(const Clip& clip);

struct ModelSpec {
  std::size_t in_channels = 3;
  std::vector<std::size_t> widths{8, 8, 1};
  std::size_t kernel = 11;

  std::size_t parameter_count() const;
  void validate() const;
};

struct LayerLayout {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

std::vector<LayerLayout> layer_layout(const ModelSpec& spec);

struct ModelParams {
  ModelSpec spec;
  std::vector<double> values;
};

// Weights and biases ~ uniform(-s, s), s = sqrt(1 / fan_in), fan_in = in * kernel.
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

// Differentiable forward on a pooled clip; `params` is the flat parameter
// vector as one tensor. Returns a [T] waveform.
ad::Var forward(ad::Tape& tape, ad::Var params, const ModelSpec& spec, const PooledClip& input);

BvpSignal forward(const ModelParams& params, const PooledClip& input);
BvpSignal forward(const ModelParams& params, const Clip& clip);

// Checkpoint: `<stem>.bin` holds the parameters as little-endian IEEE-754
// doubles; `<stem>.json` describes the spec and the count.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& stem);
ModelParams load_checkpoint(const std::filesystem::path& stem);

}  // namespace pulse
