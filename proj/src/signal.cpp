#include "pulse/signal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>
#include <tuple>

#include "pulse/errors.hpp"

namespace pulse {

int BandConfig::n_classes() const {
  return static_cast<int>(std::lround((f_high - f_low) * 60.0)) + 1;
}

int BandConfig::bpm_low() const { return static_cast<int>(std::lround(f_low * 60.0)); }

double BandConfig::class_freq(int c) const { return (bpm_low() + c) / 60.0; }

int BandConfig::window_half_width() const {
  // delta_f is in Hz and classes are 1/60 Hz apart; the epsilon keeps
  // 0.1 * 60 from rounding down to 5.
  return static_cast<int>(std::floor(delta_f * 60.0 + 1e-9));
}

void BandConfig::validate() const {
  if (!(f_low > 0.0) || !(f_high > f_low)) {
    throw InvalidSpec("band requires 0 < f_low < f_high");
  }
  if (!(delta_f > 0.0)) throw InvalidSpec("band requires delta_f > 0");
}

SpectralProbe::SpectralProbe(std::size_t length, double fps, const BandConfig& band)
    : length_(length), fps_(fps), band_(band), n_classes_(band.n_classes()) {
  band.validate();
  if (length < 2) throw InvalidSpec("probe length must be at least 2");
  if (!(fps > 0.0)) throw InvalidSpec("fps must be positive");
  cos_bank_.resize(static_cast<std::size_t>(n_classes_) * length);
  sin_bank_.resize(cos_bank_.size());
  for (int c = 0; c < n_classes_; ++c) {
    const double omega = 2.0 * std::numbers::pi * band.class_freq(c) / fps;
    double* cr = cos_bank_.data() + static_cast<std::size_t>(c) * length;
    double* sr = sin_bank_.data() + static_cast<std::size_t>(c) * length;
    for (std::size_t t = 0; t < length; ++t) {
      const double angle = omega * static_cast<double>(t);
      cr[t] = std::cos(angle);
      sr[t] = std::sin(angle);
    }
  }
}

std::vector<double> SpectralProbe::project(std::span<const double> centered) const {
  if (centered.size() != length_) {
    throw LengthMismatch("probe built for length " + std::to_string(length_) + ", got " +
                         std::to_string(centered.size()));
  }
  std::vector<double> power(static_cast<std::size_t>(n_classes_));
  for (int c = 0; c < n_classes_; ++c) {
    const double* cr = cos_bank_.data() + static_cast<std::size_t>(c) * length_;
    const double* sr = sin_bank_.data() + static_cast<std::size_t>(c) * length_;
    double re = 0.0;
    double im = 0.0;
    for (std::size_t t = 0; t < length_; ++t) {
      re += centered[t] * cr[t];
      im += centered[t] * sr[t];
    }
    power[static_cast<std::size_t>(c)] = re * re + im * im;
  }
  return power;
}

std::shared_ptr<const SpectralProbe> probe_for(std::size_t length, double fps,
                                               const BandConfig& band) {
  using Key = std::tuple<std::size_t, double, double, double>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<const SpectralProbe>> cache;
  const Key key{length, fps, band.f_low, band.f_high};
  std::lock_guard lock(mutex);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto probe = std::make_shared<const SpectralProbe>(length, fps, band);
  cache.emplace(key, probe);
  return probe;
}

void validate_signal(std::span<const double> samples, double fps) {
  if (samples.size() < 2) throw LengthMismatch("signal needs at least 2 samples");
  if (!(fps > 0.0) || !std::isfinite(fps)) throw NonFiniteInput("fps must be finite and positive");
  for (double v : samples) {
    if (!std::isfinite(v)) throw NonFiniteInput("signal contains NaN or Inf");
  }
}

std::vector<double> mean_centered(std::span<const double> samples) {
  const double mean =
      std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  std::vector<double> out(samples.size());
  std::transform(samples.begin(), samples.end(), out.begin(),
                 [mean](double v) { return v - mean; });
  return out;
}

namespace {

bool is_constant(std::span<const double> samples) {
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  return *lo == *hi;
}

}  // namespace

PsdDistribution psd_probe(std::span<const double> samples, double fps, const BandConfig& band) {
  validate_signal(samples, fps);
  if (is_constant(samples)) throw DegenerateSignal("constant signal has no spectrum");
  const auto probe = probe_for(samples.size(), fps, band);
  PsdDistribution psd;
  psd.power = probe->project(mean_centered(samples));
  psd.class_freqs.resize(psd.power.size());
  for (std::size_t c = 0; c < psd.class_freqs.size(); ++c) {
    psd.class_freqs[c] = band.class_freq(static_cast<int>(c));
  }
  return psd;
}

PsdDistribution psd_probe(const BvpSignal& signal, const BandConfig& band) {
  return psd_probe(signal.samples, signal.fps, band);
}

int argmax_lower(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

HrClass class_from_bpm(int bpm, const BandConfig& band) {
  const int c = bpm - band.bpm_low();
  if (c < 0 || c >= band.n_classes()) {
    throw InvalidSpec("bpm " + std::to_string(bpm) + " outside the heart-rate band");
  }
  return {c, bpm};
}

HrClass hr_class_of(const PsdDistribution& psd, const BandConfig& band) {
  const int c = argmax_lower(psd.power);
  if (!(psd.power[static_cast<std::size_t>(c)] > 0.0)) {
    throw DegenerateSignal("spectrum has no positive power");
  }
  return {c, band.bpm_low() + c};
}

HrClass hr_class_of(const BvpSignal& signal, const BandConfig& band) {
  return hr_class_of(psd_probe(signal, band), band);
}

double snr(const PsdDistribution& psd, const BandConfig& band) {
  const auto& p = psd.power;
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (!(total > 0.0)) throw DegenerateSignal("band power is zero");
  const int peak = argmax_lower(p);
  const int half = band.window_half_width();
  const int lo = std::max(0, peak - half);
  const int hi = std::min(static_cast<int>(p.size()) - 1, peak + half);
  double near_peak = 0.0;
  for (int c = lo; c <= hi; ++c) near_peak += p[static_cast<std::size_t>(c)];
  return near_peak / total;
}

double ipr(const BvpSignal& signal, const BandConfig& band, double full_grid_step) {
  if (!(full_grid_step > 0.0)) throw InvalidSpec("IPR grid step must be positive");
  const auto in_band = psd_probe(signal, band);
  const auto centered = mean_centered(signal.samples);
  const double nyquist = signal.fps / 2.0;
  const double f_lo = band.class_freq(0);
  const double f_hi = band.class_freq(band.n_classes() - 1);
  // Probe points that land on a class frequency are already counted in-band.
  const double tol = 1e-9;
  double outside = 0.0;
  const auto steps = static_cast<long>(std::floor(nyquist / full_grid_step + 1e-9));
  for (long j = 0; j <= steps; ++j) {
    const double f = static_cast<double>(j) * full_grid_step;
    if (f >= f_lo - tol && f <= f_hi + tol) continue;
    const double omega = 2.0 * std::numbers::pi * f / signal.fps;
    double re = 0.0;
    double im = 0.0;
    for (std::size_t t = 0; t < centered.size(); ++t) {
      const double angle = omega * static_cast<double>(t);
      re += centered[t] * std::cos(angle);
      im += centered[t] * std::sin(angle);
    }
    outside += re * re + im * im;
  }
  const double inside = std::accumulate(in_band.power.begin(), in_band.power.end(), 0.0);
  const double total = inside + outside;
  if (!(total > 0.0)) throw DegenerateSignal("signal has no power on the probe grid");
  return outside / total;
}

double pearson_r(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw LengthMismatch("pearson_r on lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  if (a.empty()) throw LengthMismatch("pearson_r on empty signals");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw ConstantSignal("pearson_r needs non-constant inputs");
  return std::clamp(sab / (std::sqrt(saa) * std::sqrt(sbb)), -1.0, 1.0);
}

}  // namespace pulse
