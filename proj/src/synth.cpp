#include "pulse/synth.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "pulse/errors.hpp"
#include "pulse/log.hpp"
#include "pulse/rng.hpp"

namespace pulse {

void SynthSpec::validate() const {
  if (frames < 1 || width < 1 || height < 1 || channels < 1) {
    throw InvalidSpec("clip dimensions must be at least 1");
  }
  if (!(fps > 0.0)) throw InvalidSpec("fps must be positive");
  if (hr_bpm < 40 || hr_bpm > 180) throw InvalidSpec("hr_bpm must lie in [40, 180]");
  if (pulse_amp < 0.0 || harmonic_amp < 0.0 || noise_std < 0.0 || distractor_amp < 0.0) {
    throw InvalidSpec("amplitudes must be non-negative");
  }
  if (!(skin_fraction > 0.0 && skin_fraction <= 1.0)) {
    throw InvalidSpec("skin_fraction must lie in (0, 1]");
  }
  if (freq_jitter < 0.0 || freq_jitter >= 1.0) throw InvalidSpec("freq_jitter must lie in [0, 1)");
  if (distractor_wander < 0.0 || distractor_wander >= 1.0) {
    throw InvalidSpec("distractor_wander must lie in [0, 1)");
  }
}

double channel_pulse_gain(std::size_t channel) {
  static constexpr std::array<double, 3> gains{0.4, 1.0, 0.6};
  return gains[std::min(channel, gains.size() - 1)];
}

GeneratedClip gen_clip(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Rng phase_rng = rng.substream("phase");
  Rng mask_rng = rng.substream("mask");
  Rng noise_rng = rng.substream("noise");

  const std::size_t T = spec.frames;
  const double f_hr = spec.hr_bpm / 60.0;
  const double phase0 = phase_rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double jitter_sign = phase_rng.uniform() < 0.5 ? -1.0 : 1.0;
  const double distractor_phase = phase_rng.uniform(0.0, 2.0 * std::numbers::pi);

  GeneratedClip out;
  out.truth.fps = spec.fps;
  out.truth.samples.resize(T);
  // One full period of drift across the clip keeps the mean rate at hr_bpm.
  // The drift is odd about the clip centre, so the spectrum stays symmetric
  // around f_hr.
  double phi = phase0;
  for (std::size_t t = 0; t < T; ++t) {
    out.truth.samples[t] = std::sin(phi) + spec.harmonic_amp * std::sin(2.0 * phi);
    const double drift =
        jitter_sign * spec.freq_jitter *
        std::sin(2.0 * std::numbers::pi * (static_cast<double>(t) + 0.5) / static_cast<double>(T));
    phi += 2.0 * std::numbers::pi * f_hr * (1.0 + drift) / spec.fps;
  }

  const std::size_t pixels = spec.width * spec.height;
  std::vector<std::size_t> order(pixels);
  std::iota(order.begin(), order.end(), std::size_t{0});
  mask_rng.shuffle(order.begin(), order.end());
  const auto skin = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(spec.skin_fraction * static_cast<double>(pixels))));
  std::vector<double> mask(pixels, 0.0);
  for (std::size_t i = 0; i < skin; ++i) mask[order[i]] = 1.0;

  Clip& clip = out.clip;
  clip.frames = T;
  clip.width = spec.width;
  clip.height = spec.height;
  clip.channels = spec.channels;
  clip.fps = spec.fps;
  clip.data.resize(T * pixels * spec.channels);
  std::size_t clamped = 0;
  std::size_t idx = 0;
  double psi = distractor_phase;
  for (std::size_t t = 0; t < T; ++t) {
    const double bvp = out.truth.samples[t];
    const double flicker = spec.distractor_amp * std::sin(psi);
    const double wander =
        spec.distractor_wander * std::sin(6.0 * std::numbers::pi * static_cast<double>(t) /
                                              static_cast<double>(T) + distractor_phase);
    psi += 2.0 * std::numbers::pi * spec.distractor_freq * (1.0 + wander) / spec.fps;
    for (std::size_t p = 0; p < pixels; ++p) {
      for (std::size_t c = 0; c < spec.channels; ++c) {
        double v = 0.5 + spec.pulse_amp * channel_pulse_gain(c) * mask[p] * bvp + flicker;
        if (spec.noise_std > 0.0) v += spec.noise_std * noise_rng.normal();
        if (v < 0.0 || v > 1.0) {
          ++clamped;
          v = std::clamp(v, 0.0, 1.0);
        }
        clip.data[idx++] = v;
      }
    }
  }
  out.clamp_fraction = static_cast<double>(clamped) / static_cast<double>(clip.data.size());
  out.clamp_warning = out.clamp_fraction > 0.10;
  if (out.clamp_warning) {
    log::warn("ClampSaturation: " + std::to_string(100.0 * out.clamp_fraction) +
              "% of samples clamped (seed " + std::to_string(spec.seed) + ")");
  }
  return out;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

void put_f32(std::ostream& os, double v) { put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

double get_f32(const unsigned char* p) { return std::bit_cast<float>(get_u32(p)); }

}  // namespace

void write_clip(const std::filesystem::path& path, const Clip& clip, const BvpSignal& truth) {
  clip.validate();
  if (truth.samples.size() != clip.frames) {
    throw LengthMismatch("ground truth length differs from clip length");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kClipMagic, 4);
  put_u32(os, static_cast<std::uint32_t>(clip.frames));
  put_u32(os, static_cast<std::uint32_t>(clip.width));
  put_u32(os, static_cast<std::uint32_t>(clip.height));
  put_u32(os, static_cast<std::uint32_t>(clip.channels));
  put_u64(os, std::bit_cast<std::uint64_t>(clip.fps));
  for (double v : clip.data) put_f32(os, v);
  for (double v : truth.samples) put_f32(os, v);
  if (!os) throw IoError("short write on " + path.string());
}

ClipFile read_clip(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < kClipHeaderBytes) throw CorruptFile(path.string() + ": header truncated");
  if (std::memcmp(bytes.data(), kClipMagic, 3) != 0) {
    throw CorruptFile(path.string() + ": bad magic");
  }
  if (bytes[3] != static_cast<unsigned char>(kClipMagic[3])) {
    throw VersionMismatch(path.string() + ": format version '" +
                          std::string(1, static_cast<char>(bytes[3])) + "', expected '1'");
  }
  ClipFile out;
  Clip& clip = out.clip;
  clip.frames = get_u32(bytes.data() + 4);
  clip.width = get_u32(bytes.data() + 8);
  clip.height = get_u32(bytes.data() + 12);
  clip.channels = get_u32(bytes.data() + 16);
  clip.fps = std::bit_cast<double>(get_u64(bytes.data() + 20));
  clip.id = path.stem().string();
  if (clip.frames == 0 || clip.width == 0 || clip.height == 0 || clip.channels == 0) {
    throw CorruptFile(path.string() + ": zero dimension");
  }
  const std::size_t n_pixels = clip.frames * clip.frame_size();
  const std::size_t expected = kClipHeaderBytes + 4 * (n_pixels + clip.frames);
  if (bytes.size() != expected) {
    throw CorruptFile(path.string() + ": payload is " + std::to_string(bytes.size()) +
                      " bytes, expected " + std::to_string(expected));
  }
  const unsigned char* p = bytes.data() + kClipHeaderBytes;
  clip.data.resize(n_pixels);
  for (std::size_t i = 0; i < n_pixels; ++i, p += 4) clip.data[i] = get_f32(p);
  out.truth.fps = clip.fps;
  out.truth.samples.resize(clip.frames);
  for (std::size_t i = 0; i < clip.frames; ++i, p += 4) out.truth.samples[i] = get_f32(p);
  return out;
}

std::string split_name(Split split) {
  switch (split) {
    case Split::train_labeled:
      return "train_labeled";
    case Split::train_unlabeled:
      return "train_unlabeled";
    case Split::validation:
      return "validation";
    case Split::test:
      return "test";
  }
  return "test";
}

Split parse_split(const std::string& name) {
  if (name == "train_labeled") return Split::train_labeled;
  if (name == "train_unlabeled") return Split::train_unlabeled;
  if (name == "validation") return Split::validation;
  if (name == "test") return Split::test;
  throw CorruptFile("unknown split '" + name + "'");
}

std::size_t DatasetManifest::count(Split split) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [split](const ManifestEntry& e) { return e.split == split; }));
}

void DatasetManifest::validate() const {
  std::vector<std::string> ids;
  for (const auto& e : entries) {
    ids.push_back(e.clip_id);
    if ((e.split == Split::train_unlabeled) == e.has_label) {
      throw CorruptFile("clip " + e.clip_id + ": has_label disagrees with split " +
                        split_name(e.split));
    }
  }
  std::sort(ids.begin(), ids.end());
  const auto dup = std::adjacent_find(ids.begin(), ids.end());
  if (dup != ids.end()) throw CorruptFile("duplicate clip id " + *dup);
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << kManifestHeader << "\n";
  for (const auto& e : manifest.entries) {
    os << e.clip_id << ',' << e.path << ',' << e.hr_bpm << ',' << (e.has_label ? 1 : 0) << ','
       << split_name(e.split) << "\n";
  }
  if (!os) throw IoError("short write on " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kManifestHeader) {
    throw CorruptFile(path.string() + ": missing manifest header");
  }
  DatasetManifest manifest;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) throw CorruptFile(path.string() + ": bad row '" + line + "'");
    ManifestEntry e;
    e.clip_id = fields[0];
    e.path = fields[1];
    try {
      e.hr_bpm = std::stoi(fields[2]);
    } catch (const std::exception&) {
      throw CorruptFile(path.string() + ": bad hr_bpm in '" + line + "'");
    }
    e.has_label = fields[3] == "1";
    e.split = parse_split(fields[4]);
    manifest.entries.push_back(std::move(e));
  }
  manifest.validate();
  return manifest;
}

void DatasetConfig::validate() const {
  if (hr_min < 40 || hr_max > 180 || hr_min > hr_max) {
    throw ConfigError("hr_min/hr_max must satisfy 40 <= hr_min <= hr_max <= 180");
  }
  if (distractor_amp_max < 0.0) throw ConfigError("distractor_amp_max must be non-negative");
  if (!(distractor_freq_min > 0.0) || distractor_freq_max < distractor_freq_min) {
    throw ConfigError("distractor_freq_min/max must satisfy 0 < min <= max");
  }
  SynthSpec probe = base;
  probe.hr_bpm = hr_min;
  try {
    probe.validate();
  } catch (const InvalidSpec& e) {
    throw ConfigError(e.what());
  }
}

namespace {

const char* split_prefix(Split split) {
  switch (split) {
    case Split::train_labeled:
      return "lab";
    case Split::train_unlabeled:
      return "unl";
    case Split::validation:
      return "val";
    case Split::test:
      return "tst";
  }
  return "clip";
}

std::string clip_id(Split split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu", split_prefix(split), index);
  return buf;
}

}  // namespace

SynthSpec clip_spec(const DatasetConfig& config, Split split, std::size_t index) {
  Rng rng(Rng::mix(config.seed, clip_id(split, index)));
  SynthSpec spec = config.base;
  spec.seed = rng.next_u64();
  spec.hr_bpm = static_cast<int>(rng.uniform_int(config.hr_min, config.hr_max));
  spec.distractor_freq = rng.uniform(config.distractor_freq_min, config.distractor_freq_max);
  spec.distractor_amp = rng.uniform(0.0, config.distractor_amp_max);
  if (split == Split::train_unlabeled && config.unlabeled_noise_std >= 0.0) {
    spec.noise_std = config.unlabeled_noise_std;
  }
  return spec;
}

DatasetManifest gen_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "clips", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "clips").string() + ": " + ec.message());

  const std::size_t n_lab =
      config.fully_supervised ? config.n_labeled + config.n_unlabeled : config.n_labeled;
  const std::size_t n_unl = config.fully_supervised ? 0 : config.n_unlabeled;
  const std::array<std::pair<Split, std::size_t>, 4> plan{
      {{Split::train_labeled, n_lab},
       {Split::train_unlabeled, n_unl},
       {Split::validation, config.n_validation},
       {Split::test, config.n_test}}};

  DatasetManifest manifest;
  for (const auto& [split, count] : plan) {
    for (std::size_t i = 0; i < count; ++i) {
      const SynthSpec spec = clip_spec(config, split, i);
      auto generated = gen_clip(spec);
      ManifestEntry e;
      e.clip_id = clip_id(split, i);
      e.path = "clips/" + e.clip_id + ".pcb";
      e.hr_bpm = spec.hr_bpm;
      e.has_label = split != Split::train_unlabeled;
      e.split = split;
      generated.clip.id = e.clip_id;
      write_clip(out_dir / e.path, generated.clip, generated.truth);
      manifest.entries.push_back(std::move(e));
    }
  }
  write_manifest(out_dir / "manifest.csv", manifest);
  return manifest;
}

}  // namespace pulse
