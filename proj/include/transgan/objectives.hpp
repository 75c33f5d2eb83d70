// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "transgan/rng.hpp"
#include "transgan/tensor.hpp"

TRANSGAN_BEGIN_NAMESPACE

enum class LossKind { WganGp, Hinge };

/// Per-image probabilities of the three augmentation families.
struct AugmentProbs {
  double translation = 1.0;
  double cutout = 0.3;
  double color = 1.0;

  friend bool operator==(const AugmentProbs&, const AugmentProbs&) = default;
};

struct LossConfig {
  LossKind kind = LossKind::WganGp;
  Real gp_weight = 10;
  /// Weight of the super-resolution MSE added to the generator loss.
  Real sr_weight = 50;
  AugmentProbs aug;

  void validate() const;
  friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

/// Maps an image batch [B, H, W, 3] to raw scores [B].
using Critic = std::function<Tensor(const Tensor&)>;

struct DiscriminatorLoss {
  Tensor total;
  /// mean D(fake) - mean D(real) (WGAN) or the hinge terms.
  Tensor adversarial;
  /// Unweighted gradient penalty; undefined for the hinge loss.
  Tensor penalty;
};

/// mean((||grad_x D(x_hat)||_2 - 1)^2) over the batch with
/// x_hat = eps * real + (1 - eps) * fake, one eps per image. The result is
/// differentiable with respect to the critic's parameters.
Tensor gradient_penalty(const Tensor& real, const Tensor& fake, const Critic& critic,
                        const std::vector<Real>& eps);

/// WGAN-GP critic loss with eps ~ U(0, 1) drawn per image from `rng`.
/// `fake` must already be detached from the generator graph.
DiscriminatorLoss d_loss_wgan_gp(const Tensor& real, const Tensor& fake, const Critic& critic,
                                 Rng& rng, Real gp_weight = 10);
DiscriminatorLoss d_loss_wgan_gp(const Tensor& real, const Tensor& fake, const Critic& critic,
                                 const std::vector<Real>& eps, Real gp_weight = 10);

/// -mean(fake_scores).
Tensor g_loss_wgan(const Tensor& fake_scores);

/// (mean relu(1 - real) + mean relu(1 + fake), -mean fake).
std::pair<Tensor, Tensor> hinge_losses(const Tensor& real_scores, const Tensor& fake_scores);

/// weight * mean((sr - hr)^2).
Tensor sr_auxiliary_loss(const Tensor& sr, const Tensor& hr, Real weight = 50);

/// Sampled augmentation parameters for one image.
struct ImageAugment {
  bool translate = false;
  int shift_y = 0, shift_x = 0;
  bool cutout = false;
  int center_y = 0, center_x = 0;
  bool color = false;
  Real brightness = 0;  // added, U(-0.5, 0.5)
  Real saturation = 1;  // about the per-pixel channel mean, U(0, 2)
  Real contrast = 1;    // about the per-image mean, U(0.5, 1.5)
};

struct AugmentPlan {
  std::size_t resolution = 0;
  std::vector<ImageAugment> images;
};

/// Draws one plan for a batch. Translation shifts are uniform integers in
/// [-ceil(H/8), ceil(H/8)] per axis; cutout zeroes a floor(H/2) square
/// around a uniform centre, clipped at the border.
AugmentPlan sample_augmentation(std::size_t batch, std::size_t resolution, const AugmentProbs& probs,
                                Rng& rng);

/// Applies color, then translation, then cutout. Differentiable in the
/// pixels; the sampled parameters are constants.
Tensor apply_augmentation(const Tensor& images, const AugmentPlan& plan);

Tensor diff_augment(const Tensor& images, const AugmentProbs& probs, Rng& rng);

TRANSGAN_END_NAMESPACE
