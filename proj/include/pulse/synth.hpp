#pragma once

// Synthetic quasi-periodic clips with ground truth, the PCB1 clip file
// format, and dataset manifests.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pulse/model.hpp"
#include "pulse/signal.hpp"

namespace pulse {

struct SynthSpec {
  std::size_t frames = 300;
  std::size_t width = 8;
  std::size_t height = 8;
  std::size_t channels = 3;
  double fps = 30.0;
  int hr_bpm = 90;
  double pulse_amp = 0.01;
  double harmonic_amp = 0.3;
  double noise_std = 0.04;
  double distractor_freq = 0.0;
  double distractor_amp = 0.0;
  // Relative depth of the distractor's frequency wander (three sweeps per clip).
  double distractor_wander = 0.5;
  double skin_fraction = 0.6;
  double freq_jitter = 0.01;
  std::uint64_t seed = 1;

  void validate() const;
};

// Relative pulse strength per colour channel; channels past the table reuse
// its last entry. The distractor hits every channel equally.
double channel_pulse_gain(std::size_t channel);

struct GeneratedClip {
  Clip clip;
  BvpSignal truth;
  double clamp_fraction = 0.0;
  // More than 10% of the pixel samples were clamped into [0, 1].
  bool clamp_warning = false;
};

GeneratedClip gen_clip(const SynthSpec& spec);

// PCB1: "PCB1", u32 LE T, W, H, C, f64 LE fps, T*W*H*C f32 LE pixels,
// T f32 LE ground-truth samples.
inline constexpr char kClipMagic[4] = {'P', 'C', 'B', '1'};
inline constexpr std::size_t kClipHeaderBytes = 4 + 4 * 4 + 8;

struct ClipFile {
  Clip clip;
  BvpSignal truth;
};

void write_clip(const std::filesystem::path& path, const Clip& clip, const BvpSignal& truth);
ClipFile read_clip(const std::filesystem::path& path);

enum class Split { train_labeled, train_unlabeled, validation, test };

std::string split_name(Split split);
Split parse_split(const std::string& name);

struct ManifestEntry {
  std::string clip_id;
  std::string path;  // relative to the manifest's directory
  int hr_bpm = 0;
  bool has_label = true;
  Split split = Split::train_labeled;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  std::size_t count(Split split) const;
  void validate() const;
};

inline constexpr const char* kManifestHeader = "clip_id,path,hr_bpm,has_label,split";

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

struct DatasetConfig {
  std::size_t n_labeled = 24;
  std::size_t n_unlabeled = 96;
  std::size_t n_validation = 24;
  std::size_t n_test = 24;
  // Every training clip labeled: the unlabeled count joins the labeled split.
  bool fully_supervised = false;
  int hr_min = 40;
  int hr_max = 180;
  double distractor_amp_max = 0.01;
  double distractor_freq_min = 0.7;
  double distractor_freq_max = 2.9;
  // Noise level of the unlabeled split; negative means "same as base".
  double unlabeled_noise_std = -1.0;
  SynthSpec base;
  std::uint64_t seed = 1;

  void validate() const;
};

// Per-clip spec for the i-th clip of a split, fully determined by the config.
SynthSpec clip_spec(const DatasetConfig& config, Split split, std::size_t index);

// Writes clips/<id>.pcb and manifest.csv under out_dir.
DatasetManifest gen_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir);

}  // namespace pulse
