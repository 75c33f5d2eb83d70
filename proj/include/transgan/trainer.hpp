// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "transgan/attention.hpp"
#include "transgan/discriminator.hpp"
#include "transgan/generator.hpp"
#include "transgan/io.hpp"
#include "transgan/objectives.hpp"

TRANSGAN_BEGIN_NAMESPACE

/// A loss term became NaN or infinite. The message names the term and step.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Piecewise-constant attention window keyed on the epoch.
struct LocalitySchedule {
  /// (first epoch, window), epochs strictly increasing, first entry at 0.
  std::vector<std::pair<std::size_t, AttentionWindow>> breakpoints;

  /// 8 from epoch 0, 10 from 20, 12 from 30, 14 from 40, unbounded from 50.
  static LocalitySchedule standard();
  /// Unbounded from epoch 0.
  static LocalitySchedule disabled();
  void validate() const;
};

AttentionWindow window_for_epoch(const LocalitySchedule& schedule, std::size_t epoch);

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m, v;
  std::uint64_t step = 0;
};

AdamState init_adam(const NamedParams& params);

/// Bias-corrected Adam applied in place to every parameter. An undefined
/// gradient counts as zero.
void adam_step(const std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamHyper& hyper);

struct TrainConfig {
  AdamHyper adam;
  std::size_t batch_g = 128;
  std::size_t batch_d = 64;
  /// Discriminator steps per generator step. 0 trains the generator on the
  /// super-resolution loss alone.
  std::size_t n_critic = 1;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  /// Adds the super-resolution loss to every generator step.
  bool mt_ct = true;
  LocalitySchedule schedule = LocalitySchedule::standard();
  /// Size of the fixed noise bank used for sample grids.
  std::size_t eval_samples = 64;
  std::string preset = "transgan-s";

  void validate() const;
};

struct TrainState {
  GeneratorConfig g_config;
  DiscriminatorConfig d_config;
  GeneratorParams g;
  DiscriminatorParams d;
  AdamState adam_g, adam_d;
  /// Completed epochs.
  std::size_t epoch = 0;
  /// Window in force during the last completed epoch; inference uses it.
  AttentionWindow window;
  Rng rng;
  /// [eval_samples, latent], drawn once at initialization.
  Tensor eval_noise;
};

TrainState init_state(const GeneratorConfig& g_config, const DiscriminatorConfig& d_config,
                      std::uint64_t seed, std::size_t eval_samples = 64);

struct EpochReport {
  /// Completed epochs including this one, counted from 1.
  std::size_t epoch = 0;
  double d_loss = 0, g_loss = 0, gp = 0, sr = 0;
  /// Window in force during the epoch.
  AttentionWindow window;
  double imgs_per_sec = 0;
  std::size_t d_steps = 0, g_steps = 0;
  /// Real images drawn from the dataset.
  std::size_t samples = 0;

  /// epoch=<n> d_loss=<f> g_loss=<f> gp=<f> sr=<f> window=<w> imgs_per_sec=<f>
  std::string log_line() const;
};

struct StepLosses {
  double total = 0, adversarial = 0, penalty = 0, sr = 0;
};

/// One critic update on `reals` against freshly generated fakes. Generator
/// parameters are left untouched.
StepLosses discriminator_step(TrainState& state, const Tensor& reals, AttentionWindow window,
                              const TrainConfig& train, const LossConfig& loss, std::size_t step);

/// One generator update: adversarial loss on `batch_g` fakes plus, with
/// MT-CT, the super-resolution loss on pairs pooled from the first
/// `batch_g` images of `reals`. With
/// `adversarial` false only the super-resolution term is optimized.
/// Discriminator parameters are left untouched.
StepLosses generator_step(TrainState& state, const Tensor& reals, AttentionWindow window,
                          const TrainConfig& train, const LossConfig& loss, std::size_t step,
                          bool adversarial = true);

/// One pass over `dataset` ([N, H, W, 3]) in shuffled mini-batches of
/// `batch_d`. Increments `state.epoch`.
EpochReport train_epoch(TrainState& state, const Tensor& dataset, const TrainConfig& train,
                        const LossConfig& loss);

/// Every tensor of the state under its checkpoint name.
std::vector<CheckpointTensor> state_tensors(const TrainState& state);
TrainState state_from_tensors(const std::vector<CheckpointTensor>& tensors);

void save_state(const TrainState& state, const std::filesystem::path& path);
TrainState load_state(const std::filesystem::path& path);

/// Generator parameters and configs only, for inference.
struct GeneratorCheckpoint {
  GeneratorConfig config;
  GeneratorParams params;
  std::size_t epoch = 0;
  AttentionWindow window;
  Tensor eval_noise;
};
GeneratorCheckpoint load_generator(const std::filesystem::path& path);

TRANSGAN_END_NAMESPACE
