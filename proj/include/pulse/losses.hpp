#pragma once

// Supervised, Pearson and consistency losses, plus the two temporal clip
// augmentations that feed the consistency term.

#include <cstddef>
#include <memory>
#include <span>

#include "pulse/autodiff.hpp"
#include "pulse/model.hpp"
#include "pulse/rng.hpp"
#include "pulse/signal.hpp"

namespace pulse {

struct LossConfig {
  double lambda = 0.01;
  BandConfig band;
  std::size_t weak_shift_max = 10;
  bool stop_gradient_weak = true;

  void validate(std::size_t frames) const;
};

// -log p[target] with p the sum-normalized class power of `predicted`.
ad::Var l_ce(ad::Var predicted, HrClass target, const std::shared_ptr<const SpectralProbe>& probe);

// Pearson correlation as a differentiable scalar.
ad::Var pearson(ad::Var predicted, ad::Var truth);

// 1 - r.
ad::Var l_p(ad::Var predicted, ad::Var truth);

// l_ce + lambda * l_p.
ad::Var l_s(ad::Var predicted, ad::Var truth_signal, HrClass truth_hr, const LossConfig& cfg,
            const std::shared_ptr<const SpectralProbe>& probe);

// Cross-entropy of the strong-branch distribution against the weak-branch
// one: -sum_c q_w[c] log q_s[c]. The weak branch is detached when
// `stop_gradient_weak` is set.
ad::Var consistency(ad::Var weak_pred, ad::Var strong_pred, bool stop_gradient_weak,
                    const std::shared_ptr<const SpectralProbe>& probe);

template <typename ClipT>
struct Augmented {
  ClipT clip;
  std::size_t shift = 0;
};

// Circular frame rotation: output frame t is input frame (t + shift) mod T.
Clip rotate_frames(const Clip& clip, std::size_t shift);
PooledClip rotate_frames(const PooledClip& clip, std::size_t shift);

Clip reverse_frames(const Clip& clip);
PooledClip reverse_frames(const PooledClip& clip);

// Rotation by s ~ uniform{1..weak_shift_max}.
Augmented<Clip> weak_augment(const Clip& clip, std::size_t weak_shift_max, Rng& rng);
Augmented<PooledClip> weak_augment(const PooledClip& clip, std::size_t weak_shift_max, Rng& rng);

Clip strong_augment(const Clip& clip);
PooledClip strong_augment(const PooledClip& clip);

// Consistency loss for one clip through the model. Draws one weak shift
// from `rng`.
ad::Var l_c(ad::Tape& tape, ad::Var params, const ModelSpec& spec, const PooledClip& clip,
            const LossConfig& cfg, Rng& rng);

}  // namespace pulse
