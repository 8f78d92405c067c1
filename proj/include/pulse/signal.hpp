#pragma once

// Frequency-domain and correlation math over pulse waveforms.
//
// The spectrum is evaluated by direct projection onto cosine/sine probes at
// exactly the heart-rate class frequencies, f_c = (bpm_low + c) / 60 Hz, so
// every class maps to one probe. Signals are mean-centered before projection.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace pulse {

struct BvpSignal {
  std::vector<double> samples;
  double fps = 30.0;

  std::size_t size() const { return samples.size(); }
};

// Heart-rate band [f_low, f_high] in Hz, split into one-BPM classes.
struct BandConfig {
  double f_low = 0.67;
  double f_high = 3.0;
  double delta_f = 0.1;

  int n_classes() const;
  int bpm_low() const;
  double class_freq(int c) const;
  // Number of classes on each side of the peak that fall within delta_f.
  int window_half_width() const;
  void validate() const;
};

struct HrClass {
  int class_index = 0;
  int bpm = 0;
};

struct PsdDistribution {
  std::vector<double> power;
  std::vector<double> class_freqs;
};

// Cached cosine/sine banks for one (length, fps, band) triple. Row c holds
// cos/sin(2*pi*f_c*t/fps) for t = 0..T-1.
class SpectralProbe {
 public:
  SpectralProbe(std::size_t length, double fps, const BandConfig& band);

  std::size_t length() const { return length_; }
  double fps() const { return fps_; }
  int n_classes() const { return n_classes_; }
  const std::vector<double>& cos_bank() const { return cos_bank_; }
  const std::vector<double>& sin_bank() const { return sin_bank_; }

  // Power per class of an already mean-centered signal.
  std::vector<double> project(std::span<const double> centered) const;

 private:
  std::size_t length_;
  double fps_;
  BandConfig band_;
  int n_classes_;
  std::vector<double> cos_bank_;
  std::vector<double> sin_bank_;
};

// Shared, immutable probe for (length, fps, band); memoized process-wide.
std::shared_ptr<const SpectralProbe> probe_for(std::size_t length, double fps,
                                               const BandConfig& band);

void validate_signal(std::span<const double> samples, double fps);

PsdDistribution psd_probe(const BvpSignal& signal, const BandConfig& band);
PsdDistribution psd_probe(std::span<const double> samples, double fps, const BandConfig& band);

// Index of the largest element; ties go to the lower index.
int argmax_lower(std::span<const double> values);

HrClass hr_class_of(const BvpSignal& signal, const BandConfig& band);
HrClass hr_class_of(const PsdDistribution& psd, const BandConfig& band);
HrClass class_from_bpm(int bpm, const BandConfig& band);

double snr(const PsdDistribution& psd, const BandConfig& band);

inline constexpr double kDefaultIprGridStep = 1.0 / 60.0;

double ipr(const BvpSignal& signal, const BandConfig& band,
           double full_grid_step = kDefaultIprGridStep);

double pearson_r(std::span<const double> a, std::span<const double> b);
inline double pearson_r(const BvpSignal& a, const BvpSignal& b) {
  return pearson_r(a.samples, b.samples);
}

std::vector<double> mean_centered(std::span<const double> samples);

}  // namespace pulse
