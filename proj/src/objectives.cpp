// SPDX-License-Identifier: Apache-2.0
#include "transgan/objectives.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "transgan/generator.hpp"
#include "transgan/ops.hpp"

TRANSGAN_BEGIN_NAMESPACE

void LossConfig::validate() const {
  auto check_prob = [](const char* key, double p) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ConfigError(std::string(key) + ": probability " + std::to_string(p) +
                        " outside [0, 1]");
  };
  check_prob("aug_translation", aug.translation);
  check_prob("aug_cutout", aug.cutout);
  check_prob("aug_color", aug.color);
  if (!(gp_weight >= 0)) throw ConfigError("gp_weight: must be non-negative");
  if (!(sr_weight >= 0)) throw ConfigError("sr_weight: must be non-negative");
}

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()) + " differ");
}

// Constant [B, ...] tensor holding values[b] throughout image b.
Tensor per_image_constant(const std::vector<Real>& values, const Shape& shape) {
  const auto per = shape_numel(shape) / values.size();
  std::vector<Real> data(shape_numel(shape));
  for (std::size_t b = 0; b < values.size(); ++b)
    std::fill_n(data.begin() + b * per, per, values[b]);
  return Tensor(shape, std::move(data));
}

}  // namespace

Tensor gradient_penalty(const Tensor& real, const Tensor& fake, const Critic& critic,
                        const std::vector<Real>& eps) {
  require_same_shape("gradient_penalty", real, fake);
  const auto batch = real.dim(0);
  if (eps.size() != batch) throw DimensionError("gradient_penalty: one eps per image required");
  const auto per = real.numel() / batch;
  std::vector<Real> mixed(real.numel());
  auto r = real.data(), f = fake.data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = b * per; i < (b + 1) * per; ++i)
      mixed[i] = eps[b] * r[i] + (1 - eps[b]) * f[i];
  Tensor interpolates(real.shape(), std::move(mixed), true);
  // The penalty is a gradient, so it needs a graph even under NoGradGuard.
  GradModeGuard record(true);

  Tensor scores = critic(interpolates);
  Tensor grads = input_gradient(sum(scores), interpolates);
  Tensor norms = sqrt(sum_last(square(reshape(grads, Shape{batch, per}))));
  return mean(square(add_scalar(norms, -1)));
}

DiscriminatorLoss d_loss_wgan_gp(const Tensor& real, const Tensor& fake, const Critic& critic,
                                 const std::vector<Real>& eps, Real gp_weight) {
  require_same_shape("d_loss_wgan_gp", real, fake);
  DiscriminatorLoss loss;
  loss.adversarial = sub(mean(critic(fake)), mean(critic(real)));
  loss.penalty = gradient_penalty(real.detach(), fake.detach(), critic, eps);
  loss.total = add(loss.adversarial, mul_scalar(loss.penalty, gp_weight));
  return loss;
}

DiscriminatorLoss d_loss_wgan_gp(const Tensor& real, const Tensor& fake, const Critic& critic,
                                 Rng& rng, Real gp_weight) {
  std::vector<Real> eps(real.dim(0));
  for (auto& e : eps) e = static_cast<Real>(rng.uniform());
  return d_loss_wgan_gp(real, fake, critic, eps, gp_weight);
}

Tensor g_loss_wgan(const Tensor& fake_scores) { return neg(mean(fake_scores)); }

std::pair<Tensor, Tensor> hinge_losses(const Tensor& real_scores, const Tensor& fake_scores) {
  Tensor d = add(mean(relu(add_scalar(neg(real_scores), 1))), mean(relu(add_scalar(fake_scores, 1))));
  return {d, neg(mean(fake_scores))};
}

Tensor sr_auxiliary_loss(const Tensor& sr, const Tensor& hr, Real weight) {
  require_same_shape("sr_auxiliary_loss", sr, hr);
  return mul_scalar(mean(square(sub(sr, hr))), weight);
}

AugmentPlan sample_augmentation(std::size_t batch, std::size_t resolution, const AugmentProbs& probs,
                                Rng& rng) {
  AugmentPlan plan;
  plan.resolution = resolution;
  plan.images.resize(batch);
  const int max_shift = static_cast<int>((resolution + 7) / 8);
  const int last = static_cast<int>(resolution) - 1;
  for (auto& a : plan.images) {
    // Draws are taken unconditionally so the stream position does not depend
    // on the probabilities.
    const bool color = rng.uniform() < probs.color;
    const auto brightness = static_cast<Real>(rng.uniform(-0.5, 0.5));
    const auto saturation = static_cast<Real>(rng.uniform(0.0, 2.0));
    const auto contrast = static_cast<Real>(rng.uniform(0.5, 1.5));
    const bool translate = rng.uniform() < probs.translation;
    const int dy = static_cast<int>(rng.uniform_int(-max_shift, max_shift));
    const int dx = static_cast<int>(rng.uniform_int(-max_shift, max_shift));
    const bool cutout = rng.uniform() < probs.cutout;
    const int cy = static_cast<int>(rng.uniform_int(0, last));
    const int cx = static_cast<int>(rng.uniform_int(0, last));
    if (color) {
      a.color = true;
      a.brightness = brightness;
      a.saturation = saturation;
      a.contrast = contrast;
    }
    if (translate) {
      a.translate = true;
      a.shift_y = dy;
      a.shift_x = dx;
    }
    if (cutout) {
      a.cutout = true;
      a.center_y = cy;
      a.center_x = cx;
    }
  }
  return plan;
}

Tensor apply_augmentation(const Tensor& images, const AugmentPlan& plan) {
  if (images.rank() != 4 || images.dim(0) != plan.images.size() ||
      images.dim(1) != plan.resolution || images.dim(2) != plan.resolution)
    throw DimensionError("apply_augmentation: batch " + shape_to_string(images.shape()) +
                         " does not match the sampled plan");
  const auto batch = images.dim(0), h = images.dim(1), w = images.dim(2), c = images.dim(3);
  const Shape& shape = images.shape();
  Tensor x = images;

  auto any = [&](auto pred) { return std::any_of(plan.images.begin(), plan.images.end(), pred); };

  if (any([](const ImageAugment& a) { return a.color; })) {
    std::vector<Real> bright(batch), sat(batch), con(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      bright[b] = plan.images[b].brightness;
      sat[b] = plan.images[b].saturation;
      con[b] = plan.images[b].contrast;
    }
    x = add(x, per_image_constant(bright, shape));

    // f * x + (1 - f) * mean keeps f = 1 an exact identity.
    Tensor pixel_mean = expand_last(mean_last(x), c);
    Tensor sat_f = per_image_constant(sat, shape);
    x = add(mul(sat_f, x), mul(add_scalar(neg(sat_f), 1), pixel_mean));

    Tensor flat = reshape(x, Shape{batch, h * w * c});
    Tensor image_mean = reshape(expand_last(mean_last(flat), h * w * c), shape);
    Tensor con_f = per_image_constant(con, shape);
    x = add(mul(con_f, x), mul(add_scalar(neg(con_f), 1), image_mean));
  }

  if (any([](const ImageAugment& a) { return a.translate; })) {
    std::vector<std::array<int, 2>> shifts(batch);
    for (std::size_t b = 0; b < batch; ++b) shifts[b] = {plan.images[b].shift_y, plan.images[b].shift_x};
    x = translate(x, shifts);
  }

  if (any([](const ImageAugment& a) { return a.cutout; })) {
    const int size = static_cast<int>(h / 2);
    std::vector<Real> keep(images.numel(), 1);
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& a = plan.images[b];
      if (!a.cutout) continue;
      const int y0 = std::max(0, a.center_y - size / 2), y1 = std::min<int>(h, a.center_y - size / 2 + size);
      const int x0 = std::max(0, a.center_x - size / 2), x1 = std::min<int>(w, a.center_x - size / 2 + size);
      for (int y = y0; y < y1; ++y)
        for (int xx = x0; xx < x1; ++xx)
          std::fill_n(keep.begin() + ((b * h + y) * w + xx) * c, c, Real(0));
    }
    x = mul(x, Tensor(shape, std::move(keep)));
  }
  return x;
}

Tensor diff_augment(const Tensor& images, const AugmentProbs& probs, Rng& rng) {
  if (images.rank() != 4) throw DimensionError("diff_augment: expected [B,H,W,3]");
  return apply_augmentation(images, sample_augmentation(images.dim(0), images.dim(1), probs, rng));
}

TRANSGAN_END_NAMESPACE
