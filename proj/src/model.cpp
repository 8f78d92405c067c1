#include "pulse/model.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "pulse/errors.hpp"
#include "pulse/rng.hpp"

namespace pulse {

void Clip::validate() const {
  if (frames == 0 || width == 0 || height == 0 || channels == 0) {
    throw ShapeMismatch("clip dimensions must be at least 1");
  }
  if (data.size() != frames * frame_size()) {
    throw ShapeMismatch("clip data size does not match its dimensions");
  }
  if (!(fps > 0.0)) throw InvalidSpec("clip fps must be positive");
  for (double v : data) {
    if (!std::isfinite(v)) throw NonFiniteInput("clip contains NaN or Inf");
    if (v < 0.0 || v > 1.0) throw InvalidSpec("clip values must lie in [0, 1]");
  }
}

PooledClip pool(const Clip& clip) {
  clip.validate();
  PooledClip out{clip.channels, clip.frames, clip.fps, {}};
  out.data.assign(clip.channels * clip.frames, 0.0);
  const double pixels = static_cast<double>(clip.width * clip.height);
  for (std::size_t t = 0; t < clip.frames; ++t) {
    const double* frame = clip.data.data() + t * clip.frame_size();
    for (std::size_t p = 0; p < clip.width * clip.height; ++p) {
      for (std::size_t c = 0; c < clip.channels; ++c) {
        out.data[c * clip.frames + t] += frame[p * clip.channels + c];
      }
    }
  }
  // Centre each channel, then divide by one scale shared across channels so
  // cross-channel ratios survive.
  const double n = static_cast<double>(clip.frames);
  double var = 0.0;
  for (std::size_t c = 0; c < clip.channels; ++c) {
    double* row = out.data.data() + c * clip.frames;
    for (std::size_t t = 0; t < clip.frames; ++t) row[t] /= pixels;
    const double mean = std::accumulate(row, row + clip.frames, 0.0) / n;
    for (std::size_t t = 0; t < clip.frames; ++t) {
      row[t] -= mean;
      var += row[t] * row[t];
    }
  }
  const double sd = std::sqrt(var / (n * static_cast<double>(clip.channels)));
  if (sd > 1e-12) {
    for (double& v : out.data) v /= sd;
  }
  return out;
}

std::size_t ModelSpec::parameter_count() const {
  std::size_t total = 0;
  std::size_t in = in_channels;
  for (std::size_t out : widths) {
    total += out * in * kernel + out;
    in = out;
  }
  return total;
}

void ModelSpec::validate() const {
  if (in_channels == 0) throw InvalidSpec("model needs at least one input channel");
  if (widths.empty()) throw InvalidSpec("model needs at least one layer");
  for (std::size_t w : widths) {
    if (w == 0) throw InvalidSpec("layer width must be positive");
  }
  if (widths.back() != 1) throw InvalidSpec("last layer must have width 1");
  if (kernel == 0 || kernel % 2 == 0) throw InvalidSpec("kernel length must be odd");
}

std::vector<LayerLayout> layer_layout(const ModelSpec& spec) {
  std::vector<LayerLayout> layers;
  std::size_t offset = 0;
  std::size_t in = spec.in_channels;
  for (std::size_t out : spec.widths) {
    LayerLayout l{in, out, offset, offset + out * in * spec.kernel};
    layers.push_back(l);
    offset = l.bias_offset + out;
    in = out;
  }
  return layers;
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelParams params{spec, std::vector<double>(spec.parameter_count())};
  Rng rng(seed);
  for (const auto& l : layer_layout(spec)) {
    const double bound = std::sqrt(1.0 / static_cast<double>(l.in * spec.kernel));
    for (std::size_t i = l.weight_offset; i < l.bias_offset + l.out; ++i) {
      params.values[i] = rng.uniform(-bound, bound);
    }
  }
  return params;
}

ad::Var forward(ad::Tape& tape, ad::Var params, const ModelSpec& spec, const PooledClip& input) {
  if (input.channels != spec.in_channels) {
    throw ShapeMismatch("clip has " + std::to_string(input.channels) + " channels, model expects " +
                        std::to_string(spec.in_channels));
  }
  if (params.size() != spec.parameter_count()) {
    throw ShapeMismatch("parameter vector does not match the model spec");
  }
  ad::Var h = tape.constant({input.channels, input.frames}, input.data);
  const auto layers = layer_layout(spec);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    ad::Var w = ad::slice(params, l.weight_offset, {l.out, l.in, spec.kernel});
    ad::Var b = ad::slice(params, l.bias_offset, {l.out});
    h = ad::conv1d_same(h, w, b);
    if (i + 1 < layers.size()) h = ad::tanh(h);
  }
  return ad::slice(h, 0, {input.frames});
}

BvpSignal forward(const ModelParams& params, const PooledClip& input) {
  ad::Tape tape;
  ad::Var p = tape.constant({params.values.size()}, params.values);
  ad::Var y = forward(tape, p, params.spec, input);
  return {y.value(), input.fps};
}

BvpSignal forward(const ModelParams& params, const Clip& clip) {
  return forward(params, pool(clip));
}

namespace {

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  auto p = stem;
  p += ext;
  return p;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& stem) {
  std::ofstream bin(with_ext(stem, ".bin"), std::ios::binary);
  if (!bin) throw IoError("cannot write " + with_ext(stem, ".bin").string());
  for (double v : params.values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    bin.write(bytes, 8);
  }
  nlohmann::json meta{{"format", "pulse-checkpoint"},
                      {"version", 1},
                      {"dtype", "float64-le"},
                      {"count", params.values.size()},
                      {"in_channels", params.spec.in_channels},
                      {"widths", params.spec.widths},
                      {"kernel", params.spec.kernel},
                      {"layout", "per layer: weight[out][in][kernel] then bias[out]"}};
  std::ofstream js(with_ext(stem, ".json"));
  if (!js) throw IoError("cannot write " + with_ext(stem, ".json").string());
  js << meta.dump(2) << "\n";
  if (!bin || !js) throw IoError("short write on checkpoint " + stem.string());
}

ModelParams load_checkpoint(const std::filesystem::path& stem) {
  std::ifstream js(with_ext(stem, ".json"));
  if (!js) throw IoError("cannot read " + with_ext(stem, ".json").string());
  nlohmann::json meta;
  try {
    js >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFile(std::string("checkpoint sidecar: ") + e.what());
  }
  if (meta.value("version", 0) != 1) throw VersionMismatch("unsupported checkpoint version");
  ModelParams params;
  params.spec.in_channels = meta.at("in_channels").get<std::size_t>();
  params.spec.widths = meta.at("widths").get<std::vector<std::size_t>>();
  params.spec.kernel = meta.at("kernel").get<std::size_t>();
  params.spec.validate();
  const auto count = meta.at("count").get<std::size_t>();
  if (count != params.spec.parameter_count()) {
    throw CorruptFile("checkpoint count disagrees with its spec");
  }
  std::ifstream bin(with_ext(stem, ".bin"), std::ios::binary);
  if (!bin) throw IoError("cannot read " + with_ext(stem, ".bin").string());
  params.values.resize(count);
  for (auto& v : params.values) {
    unsigned char bytes[8];
    if (!bin.read(reinterpret_cast<char*>(bytes), 8)) {
      throw CorruptFile("checkpoint payload is truncated");
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
  if (bin.peek() != std::char_traits<char>::eof()) {
    throw CorruptFile("checkpoint payload has trailing bytes");
  }
  return params;
}

}  // namespace pulse
