#include "pulse/losses.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "pulse/errors.hpp"

namespace pulse {

void LossConfig::validate(std::size_t frames) const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
  if (weak_shift_max < 1 || weak_shift_max >= frames) {
    throw ConfigError("weak_shift_max must lie in [1, T)");
  }
  band.validate();
}

namespace {

ad::Var class_distribution(ad::Var predicted, const std::shared_ptr<const SpectralProbe>& probe) {
  ad::Var power = ad::psd_power(predicted, probe);
  const auto& pv = power.value();
  if (!(std::accumulate(pv.begin(), pv.end(), 0.0) > ad::kNormalizeEpsilon)) {
    throw DegenerateSignal("prediction has no band power");
  }
  return ad::normalize(power);
}

}  // namespace

ad::Var l_ce(ad::Var predicted, HrClass target, const std::shared_ptr<const SpectralProbe>& probe) {
  if (target.class_index < 0 || target.class_index >= probe->n_classes()) {
    throw InvalidSpec("target class " + std::to_string(target.class_index) + " out of range");
  }
  ad::Var p = class_distribution(predicted, probe);
  return ad::scale(ad::log(ad::index(p, static_cast<std::size_t>(target.class_index))), -1.0);
}

ad::Var pearson(ad::Var predicted, ad::Var truth) {
  if (predicted.size() != truth.size()) {
    throw LengthMismatch("pearson on lengths " + std::to_string(predicted.size()) + " and " +
                         std::to_string(truth.size()));
  }
  ad::Var a = ad::mean_center(predicted);
  ad::Var b = ad::mean_center(truth);
  ad::Var saa = ad::sum(ad::square(a));
  ad::Var sbb = ad::sum(ad::square(b));
  if (saa.item() == 0.0 || sbb.item() == 0.0) {
    throw ConstantSignal("pearson needs non-constant inputs");
  }
  return ad::sum(a * b) / (ad::sqrt(saa) * ad::sqrt(sbb));
}

ad::Var l_p(ad::Var predicted, ad::Var truth) {
  return ad::add_scalar(ad::scale(pearson(predicted, truth), -1.0), 1.0);
}

ad::Var l_s(ad::Var predicted, ad::Var truth_signal, HrClass truth_hr, const LossConfig& cfg,
            const std::shared_ptr<const SpectralProbe>& probe) {
  ad::Var ce = l_ce(predicted, truth_hr, probe);
  if (cfg.lambda == 0.0) return ce;
  return ce + ad::scale(l_p(predicted, truth_signal), cfg.lambda);
}

ad::Var consistency(ad::Var weak_pred, ad::Var strong_pred, bool stop_gradient_weak,
                    const std::shared_ptr<const SpectralProbe>& probe) {
  ad::Var q_w = class_distribution(weak_pred, probe);
  if (stop_gradient_weak) q_w = ad::detach(q_w);
  ad::Var q_s = class_distribution(strong_pred, probe);
  return ad::scale(ad::sum(q_w * ad::log(q_s)), -1.0);
}

Clip rotate_frames(const Clip& clip, std::size_t shift) {
  Clip out = clip;
  const std::size_t fs = clip.frame_size();
  for (std::size_t t = 0; t < clip.frames; ++t) {
    const std::size_t src = (t + shift) % clip.frames;
    std::copy_n(clip.data.begin() + static_cast<std::ptrdiff_t>(src * fs), fs,
                out.data.begin() + static_cast<std::ptrdiff_t>(t * fs));
  }
  return out;
}

PooledClip rotate_frames(const PooledClip& clip, std::size_t shift) {
  PooledClip out = clip;
  for (std::size_t c = 0; c < clip.channels; ++c) {
    const double* in = clip.data.data() + c * clip.frames;
    double* o = out.data.data() + c * clip.frames;
    for (std::size_t t = 0; t < clip.frames; ++t) o[t] = in[(t + shift) % clip.frames];
  }
  return out;
}

Clip reverse_frames(const Clip& clip) {
  Clip out = clip;
  const std::size_t fs = clip.frame_size();
  for (std::size_t t = 0; t < clip.frames; ++t) {
    const std::size_t src = clip.frames - 1 - t;
    std::copy_n(clip.data.begin() + static_cast<std::ptrdiff_t>(src * fs), fs,
                out.data.begin() + static_cast<std::ptrdiff_t>(t * fs));
  }
  return out;
}

PooledClip reverse_frames(const PooledClip& clip) {
  PooledClip out = clip;
  for (std::size_t c = 0; c < clip.channels; ++c) {
    double* o = out.data.data() + c * clip.frames;
    std::reverse(o, o + clip.frames);
  }
  return out;
}

namespace {

std::size_t draw_shift(std::size_t frames, std::size_t weak_shift_max, Rng& rng) {
  if (weak_shift_max < 1 || weak_shift_max >= frames) {
    throw ConfigError("weak_shift_max must lie in [1, T)");
  }
  return static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(weak_shift_max)));
}

}  // namespace

Augmented<Clip> weak_augment(const Clip& clip, std::size_t weak_shift_max, Rng& rng) {
  const std::size_t s = draw_shift(clip.frames, weak_shift_max, rng);
  return {rotate_frames(clip, s), s};
}

Augmented<PooledClip> weak_augment(const PooledClip& clip, std::size_t weak_shift_max, Rng& rng) {
  const std::size_t s = draw_shift(clip.frames, weak_shift_max, rng);
  return {rotate_frames(clip, s), s};
}

Clip strong_augment(const Clip& clip) { return reverse_frames(clip); }
PooledClip strong_augment(const PooledClip& clip) { return reverse_frames(clip); }

ad::Var l_c(ad::Tape& tape, ad::Var params, const ModelSpec& spec, const PooledClip& clip,
            const LossConfig& cfg, Rng& rng) {
  const auto weak = weak_augment(clip, cfg.weak_shift_max, rng);
  const auto strong = strong_augment(clip);
  const auto probe = probe_for(clip.frames, clip.fps, cfg.band);
  ad::Var weak_pred;
  if (cfg.stop_gradient_weak) {
    // Frozen copy of the parameters: the weak branch never needs a backward pass.
    ad::Var frozen = ad::detach(params);
    weak_pred = forward(tape, frozen, spec, weak.clip);
  } else {
    weak_pred = forward(tape, params, spec, weak.clip);
  }
  ad::Var strong_pred = forward(tape, params, spec, strong);
  return consistency(weak_pred, strong_pred, cfg.stop_gradient_weak, probe);
}

}  // namespace pulse
