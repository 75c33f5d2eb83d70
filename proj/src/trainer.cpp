// SPDX-License-Identifier: Apache-2.0
#include "transgan/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "transgan/ops.hpp"

TRANSGAN_BEGIN_NAMESPACE

// ---------------------------------------------------------------- schedule

LocalitySchedule LocalitySchedule::standard() {
  return {{{0, AttentionWindow::of(8)},
           {20, AttentionWindow::of(10)},
           {30, AttentionWindow::of(12)},
           {40, AttentionWindow::of(14)},
           {50, AttentionWindow::unbounded()}}};
}

LocalitySchedule LocalitySchedule::disabled() { return {{{0, AttentionWindow::unbounded()}}}; }

void LocalitySchedule::validate() const {
  if (breakpoints.empty() || breakpoints.front().first != 0)
    throw ConfigError("locality_schedule: must start at epoch 0");
  for (std::size_t i = 1; i < breakpoints.size(); ++i)
    if (breakpoints[i].first <= breakpoints[i - 1].first)
      throw ConfigError("locality_schedule: epochs must be strictly increasing");
}

AttentionWindow window_for_epoch(const LocalitySchedule& schedule, std::size_t epoch) {
  schedule.validate();
  auto it = std::upper_bound(schedule.breakpoints.begin(), schedule.breakpoints.end(), epoch,
                             [](std::size_t e, const auto& bp) { return e < bp.first; });
  return std::prev(it)->second;
}

// -------------------------------------------------------------------- adam

AdamState init_adam(const NamedParams& params) {
  AdamState s;
  for (const auto& [name, p] : params) {
    s.m.push_back(Tensor::zeros(p.shape()));
    s.v.push_back(Tensor::zeros(p.shape()));
  }
  return s;
}

void adam_step(const std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamHyper& hyper) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size())
    throw DimensionError("adam_step: parameter, gradient and moment counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].shape() != params[i].shape() || state.v[i].shape() != params[i].shape() ||
        (grads[i].defined() && grads[i].shape() != params[i].shape()))
      throw DimensionError("adam_step: shape mismatch at parameter " + std::to_string(i) + " " +
                           shape_to_string(params[i].shape()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = Tensor(params[i]).mutable_data();
    auto m = state.m[i].mutable_data();
    auto v = state.v[i].mutable_data();
    std::span<const Real> g;
    if (grads[i].defined()) g = grads[i].data();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double gk = g.empty() ? 0.0 : static_cast<double>(g[k]);
      const double mk = hyper.beta1 * static_cast<double>(m[k]) + (1.0 - hyper.beta1) * gk;
      const double vk = hyper.beta2 * static_cast<double>(v[k]) + (1.0 - hyper.beta2) * gk * gk;
      m[k] = static_cast<Real>(mk);
      v[k] = static_cast<Real>(vk);
      const double update = hyper.lr * (mk / c1) / (std::sqrt(vk / c2) + hyper.eps);
      theta[k] = static_cast<Real>(static_cast<double>(theta[k]) - update);
    }
  }
}

// ------------------------------------------------------------------ config

void TrainConfig::validate() const {
  if (!(adam.lr > 0) || !std::isfinite(adam.lr)) throw ConfigError("lr: must be positive");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1)) throw ConfigError("beta1: must lie in [0, 1)");
  if (!(adam.beta2 >= 0 && adam.beta2 < 1)) throw ConfigError("beta2: must lie in [0, 1)");
  if (!(adam.eps > 0)) throw ConfigError("adam_eps: must be positive");
  if (batch_g == 0) throw ConfigError("batch_g: must be positive");
  if (batch_d == 0) throw ConfigError("batch_d: must be positive");
  schedule.validate();
}

// ------------------------------------------------------------------- state

namespace {

std::vector<Tensor> tensors_of(const NamedParams& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

std::vector<Tensor> grads_of(const NamedParams& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t.grad());
  return out;
}

void zero_grads(const NamedParams& named) {
  for (const auto& [name, t] : named) Tensor(t).zero_grad();
}

// Stops gradients from accumulating into a network's parameters while the
// other network is being updated.
class FreezeGuard {
 public:
  explicit FreezeGuard(const NamedParams& params) : params_(params) {
    for (auto& [name, t] : params_) t.set_requires_grad(false);
  }
  ~FreezeGuard() {
    for (auto& [name, t] : params_) t.set_requires_grad(true);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  NamedParams params_;
};

Tensor normal_noise(std::size_t batch, std::size_t dim, Rng& rng) {
  std::vector<Real> z(batch * dim);
  for (auto& v : z) v = static_cast<Real>(rng.normal());
  return Tensor(Shape{batch, dim}, std::move(z));
}

Tensor gather_images(const Tensor& dataset, std::span<const std::size_t> rows) {
  const auto per = dataset.numel() / dataset.dim(0);
  Shape shape = dataset.shape();
  shape[0] = rows.size();
  std::vector<Real> out(rows.size() * per);
  auto src = dataset.data();
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(rows[i] * per), per,
                out.begin() + static_cast<std::ptrdiff_t>(i * per));
  return Tensor(std::move(shape), std::move(out));
}

double checked(const Tensor& t, const char* term, std::size_t epoch, std::size_t step) {
  const double v = static_cast<double>(t.item());
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "non-finite " << term << " (" << v << ") at epoch " << epoch << " step " << step;
    throw TrainingError(msg.str());
  }
  return v;
}

}  // namespace

TrainState init_state(const GeneratorConfig& g_config, const DiscriminatorConfig& d_config,
                      std::uint64_t seed, std::size_t eval_samples) {
  g_config.validate();
  d_config.validate();
  if (g_config.target_resolution != d_config.input_resolution)
    throw ConfigError("input_resolution: discriminator expects " +
                      std::to_string(d_config.input_resolution) + " but the generator emits " +
                      std::to_string(g_config.target_resolution));
  TrainState s;
  s.g_config = g_config;
  s.d_config = d_config;
  s.rng = Rng(seed);
  s.g = init_generator(g_config, s.rng);
  s.d = init_discriminator(d_config, s.rng);
  s.adam_g = init_adam(generator_parameters(s.g));
  s.adam_d = init_adam(discriminator_parameters(s.d));
  s.eval_noise = normal_noise(eval_samples, g_config.latent_dim, s.rng);
  return s;
}

// ------------------------------------------------------------------- steps

StepLosses discriminator_step(TrainState& state, const Tensor& reals, AttentionWindow window,
                              const TrainConfig& train, const LossConfig& loss, std::size_t step) {
  const auto d_named = discriminator_parameters(state.d);
  zero_grads(d_named);
  const auto batch = reals.dim(0);

  Tensor fake;
  {
    NoGradGuard no_grad;
    fake = generate(normal_noise(batch, state.g_config.latent_dim, state.rng), state.g,
                    state.g_config, window);
  }
  const AugmentPlan plan = sample_augmentation(batch, reals.dim(1), loss.aug, state.rng);
  const Tensor real_aug = apply_augmentation(reals, plan);
  const Tensor fake_aug = apply_augmentation(fake, plan);
  const Critic critic = [&](const Tensor& x) { return discriminate(x, state.d, state.d_config); };

  StepLosses out;
  Tensor total;
  if (loss.kind == LossKind::WganGp) {
    DiscriminatorLoss d = d_loss_wgan_gp(real_aug, fake_aug, critic, state.rng, loss.gp_weight);
    out.adversarial = checked(d.adversarial, "d_loss.adversarial", state.epoch, step);
    out.penalty = checked(d.penalty, "d_loss.gradient_penalty", state.epoch, step);
    total = d.total;
  } else {
    total = hinge_losses(critic(real_aug), critic(fake_aug)).first;
    out.adversarial = checked(total, "d_loss.hinge", state.epoch, step);
  }
  out.total = checked(total, "d_loss", state.epoch, step);
  backward(total);
  adam_step(tensors_of(d_named), grads_of(d_named), state.adam_d, train.adam);
  zero_grads(d_named);
  return out;
}

StepLosses generator_step(TrainState& state, const Tensor& reals, AttentionWindow window,
                          const TrainConfig& train, const LossConfig& loss, std::size_t step,
                          bool adversarial) {
  const auto g_named = generator_parameters(state.g);
  const auto d_named = discriminator_parameters(state.d);
  zero_grads(g_named);
  FreezeGuard freeze(d_named);

  StepLosses out;
  Tensor total;
  if (adversarial) {
    Tensor fake = generate(normal_noise(train.batch_g, state.g_config.latent_dim, state.rng),
                           state.g, state.g_config, window);
    const AugmentPlan plan = sample_augmentation(train.batch_g, fake.dim(1), loss.aug, state.rng);
    total = g_loss_wgan(discriminate(apply_augmentation(fake, plan), state.d, state.d_config));
    out.adversarial = checked(total, "g_loss.adversarial", state.epoch, step);
  }
  if (train.mt_ct || !adversarial) {
    const auto factor = state.g_config.target_resolution / state.g_config.initial_grid;
    // At most batch_g pairs, taken from the front of the real batch.
    const Tensor targets =
        reals.dim(0) > train.batch_g ? slice(reals, 0, 0, train.batch_g).detach() : reals;
    const Tensor lr = downsample_average(targets, factor);
    const Real weight = (!adversarial && loss.sr_weight == 0) ? Real(1) : loss.sr_weight;
    Tensor sr = sr_auxiliary_loss(super_resolve(lr, state.g, state.g_config, window), targets, weight);
    out.sr = checked(sr, "g_loss.super_resolution", state.epoch, step);
    total = total.defined() ? add(total, sr) : sr;
  }
  out.total = checked(total, "g_loss", state.epoch, step);
  backward(total);
  adam_step(tensors_of(g_named), grads_of(g_named), state.adam_g, train.adam);
  zero_grads(g_named);
  return out;
}

std::string EpochReport::log_line() const {
  std::ostringstream s;
  s << "epoch=" << epoch << " d_loss=" << d_loss << " g_loss=" << g_loss << " gp=" << gp
    << " sr=" << sr << " window=" << window.to_string() << " imgs_per_sec=" << imgs_per_sec;
  return s.str();
}

EpochReport train_epoch(TrainState& state, const Tensor& dataset, const TrainConfig& train,
                        const LossConfig& loss) {
  train.validate();
  loss.validate();
  if (!dataset.defined() || dataset.rank() != 4 || dataset.dim(0) == 0)
    throw DimensionError("train_epoch: dataset must be a non-empty [N,H,W,3] batch");
  const auto res = state.g_config.target_resolution;
  if (dataset.dim(1) != res || dataset.dim(2) != res || dataset.dim(3) != 3)
    throw DimensionError("train_epoch: dataset images are " + shape_to_string(dataset.shape()) +
                         ", the generator emits " + std::to_string(res) + "x" +
                         std::to_string(res) + "x3");
  const auto start = std::chrono::steady_clock::now();
  const auto n = dataset.dim(0);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(order[i], order[static_cast<std::size_t>(state.rng.uniform_int(0, static_cast<std::int64_t>(i)))]);

  EpochReport report;
  report.epoch = state.epoch;
  report.window = window_for_epoch(train.schedule, state.epoch);
  std::size_t step = 0;
  for (std::size_t begin = 0; begin < n; begin += train.batch_d, ++step) {
    const auto end = std::min(n, begin + train.batch_d);
    const Tensor reals = gather_images(dataset, std::span(order).subspan(begin, end - begin));
    report.samples += end - begin;
    if (train.n_critic == 0) {
      const auto g = generator_step(state, reals, report.window, train, loss, step, false);
      report.sr += g.sr;
      ++report.g_steps;
      continue;
    }
    const auto d = discriminator_step(state, reals, report.window, train, loss, step);
    report.d_loss += d.total;
    report.gp += d.penalty;
    ++report.d_steps;
    if (report.d_steps % train.n_critic == 0) {
      const auto g = generator_step(state, reals, report.window, train, loss, step, true);
      report.g_loss += g.adversarial;
      report.sr += g.sr;
      ++report.g_steps;
    }
  }
  if (report.d_steps) {
    report.d_loss /= static_cast<double>(report.d_steps);
    report.gp /= static_cast<double>(report.d_steps);
  }
  if (report.g_steps) {
    report.g_loss /= static_cast<double>(report.g_steps);
    report.sr /= static_cast<double>(report.g_steps);
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  report.imgs_per_sec = elapsed.count() > 0 ? static_cast<double>(report.samples) / elapsed.count() : 0;
  ++state.epoch;
  state.window = report.window;
  report.epoch = state.epoch;
  return report;
}

// -------------------------------------------------------------- checkpoint

namespace {

// Integers are stored as 16-bit limbs, each exactly representable in f32.
CheckpointTensor pack_u64(const std::string& name, std::uint64_t value) {
  CheckpointTensor t{name, {4}, {}};
  for (int i = 0; i < 4; ++i) t.values.push_back(static_cast<float>((value >> (16 * i)) & 0xFFFF));
  return t;
}

std::uint64_t unpack_u64(const CheckpointTensor& t) {
  if (t.values.size() != 4) throw FormatError("checkpoint: '" + t.name + "' is not a packed integer");
  std::uint64_t value = 0;
  for (int i = 0; i < 4; ++i) {
    const float limb = t.values[static_cast<std::size_t>(i)];
    if (!(limb >= 0 && limb <= 65535 && limb == std::floor(limb)))
      throw FormatError("checkpoint: '" + t.name + "' holds a malformed integer limb");
    value |= static_cast<std::uint64_t>(limb) << (16 * i);
  }
  return value;
}

// 0 encodes the unbounded window.
AttentionWindow window_from(const CheckpointTensor& t) {
  const auto size = unpack_u64(t);
  return size == 0 ? AttentionWindow::unbounded() : AttentionWindow::of(size);
}

CheckpointTensor pack_tensor(const std::string& name, const Tensor& t) {
  CheckpointTensor out{name, {}, {}};
  for (auto e : t.shape()) out.extents.push_back(e);
  auto d = t.data();
  out.values.assign(d.begin(), d.end());
  return out;
}

CheckpointTensor pack_sizes(const std::string& name, const std::vector<std::size_t>& values) {
  CheckpointTensor t{name, {values.size()}, {}};
  for (auto v : values) t.values.push_back(static_cast<float>(v));
  return t;
}

std::vector<std::size_t> unpack_sizes(const CheckpointTensor& t) {
  std::vector<std::size_t> out;
  for (float v : t.values) {
    if (!(v >= 0 && v == std::floor(v) && v < 16777216.0f))
      throw FormatError("checkpoint: '" + t.name + "' holds a non-integer entry");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<std::size_t> g_config_fields(const GeneratorConfig& c) {
  std::vector<std::size_t> f{c.initial_grid, c.initial_dim, c.target_resolution, c.latent_dim,
                             c.mlp_ratio,    c.head_count,  c.stage_depths.size()};
  f.insert(f.end(), c.stage_depths.begin(), c.stage_depths.end());
  return f;
}

GeneratorConfig g_config_from(const CheckpointTensor& t) {
  const auto f = unpack_sizes(t);
  if (f.size() < 7 || f.size() != 7 + f[6]) throw FormatError("checkpoint: malformed config.G");
  GeneratorConfig c;
  c.initial_grid = f[0];
  c.initial_dim = f[1];
  c.target_resolution = f[2];
  c.latent_dim = f[3];
  c.mlp_ratio = f[4];
  c.head_count = f[5];
  c.stage_depths.assign(f.begin() + 7, f.end());
  c.validate();
  return c;
}

DiscriminatorConfig d_config_from(const CheckpointTensor& t) {
  const auto f = unpack_sizes(t);
  if (f.size() != 6) throw FormatError("checkpoint: malformed config.D");
  DiscriminatorConfig c;
  c.patch_grid = f[0];
  c.embed_dim = f[1];
  c.depth = f[2];
  c.head_count = f[3];
  c.mlp_ratio = f[4];
  c.input_resolution = f[5];
  c.validate();
  return c;
}

class TensorTable {
 public:
  explicit TensorTable(const std::vector<CheckpointTensor>& tensors) {
    for (const auto& t : tensors)
      if (!by_name_.emplace(t.name, &t).second)
        throw FormatError("checkpoint: duplicate tensor '" + t.name + "'");
  }

  const CheckpointTensor& at(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw FormatError("checkpoint: missing tensor '" + name + "'");
    used_.insert(name);
    return *it->second;
  }

  void fill(const std::string& name, Tensor target) {
    const auto& src = at(name);
    Shape shape(src.extents.begin(), src.extents.end());
    if (shape != target.shape())
      throw FormatError("checkpoint: tensor '" + name + "' has shape " + shape_to_string(shape) +
                        ", expected " + shape_to_string(target.shape()));
    auto dst = target.mutable_data();
    std::transform(src.values.begin(), src.values.end(), dst.begin(),
                   [](float v) { return static_cast<Real>(v); });
  }

  Tensor tensor(const std::string& name) {
    const auto& src = at(name);
    std::vector<Real> data(src.values.begin(), src.values.end());
    return Tensor(Shape(src.extents.begin(), src.extents.end()), std::move(data));
  }

  void require_all_used() const {
    for (const auto& [name, t] : by_name_)
      if (!used_.count(name)) throw FormatError("checkpoint: unexpected tensor '" + name + "'");
  }

 private:
  std::map<std::string, const CheckpointTensor*> by_name_;
  std::set<std::string> used_;
};

void pack_adam(const std::string& prefix, const NamedParams& named, const AdamState& adam,
               std::vector<CheckpointTensor>& out) {
  for (std::size_t i = 0; i < named.size(); ++i) {
    out.push_back(pack_tensor(prefix + ".m." + named[i].first, adam.m[i]));
    out.push_back(pack_tensor(prefix + ".v." + named[i].first, adam.v[i]));
  }
  out.push_back(pack_u64(prefix + ".step", adam.step));
}

void fill_adam(const std::string& prefix, const NamedParams& named, AdamState& adam,
               TensorTable& table) {
  for (std::size_t i = 0; i < named.size(); ++i) {
    table.fill(prefix + ".m." + named[i].first, adam.m[i]);
    table.fill(prefix + ".v." + named[i].first, adam.v[i]);
  }
  adam.step = unpack_u64(table.at(prefix + ".step"));
}

}  // namespace

std::vector<CheckpointTensor> state_tensors(const TrainState& state) {
  std::vector<CheckpointTensor> out;
  out.push_back(pack_sizes("config.G", g_config_fields(state.g_config)));
  const auto& d = state.d_config;
  out.push_back(pack_sizes("config.D", {d.patch_grid, d.embed_dim, d.depth, d.head_count,
                                        d.mlp_ratio, d.input_resolution}));
  const auto g_named = generator_parameters(state.g);
  const auto d_named = discriminator_parameters(state.d);
  for (const auto& [name, t] : g_named) out.push_back(pack_tensor(name, t));
  for (const auto& [name, t] : d_named) out.push_back(pack_tensor(name, t));
  pack_adam("adam.G", g_named, state.adam_g, out);
  pack_adam("adam.D", d_named, state.adam_d, out);
  out.push_back(pack_u64("train.epoch", state.epoch));
  out.push_back(pack_u64("train.window", state.window.bounded() ? state.window.size() : 0));
  out.push_back(pack_u64("rng.seed", state.rng.seed()));
  out.push_back(pack_u64("rng.draws", state.rng.draws()));
  out.push_back(pack_tensor("eval_noise", state.eval_noise));
  return out;
}

TrainState state_from_tensors(const std::vector<CheckpointTensor>& tensors) {
  TensorTable table(tensors);
  TrainState s;
  s.g_config = g_config_from(table.at("config.G"));
  s.d_config = d_config_from(table.at("config.D"));
  Rng scratch(0);
  s.g = init_generator(s.g_config, scratch);
  s.d = init_discriminator(s.d_config, scratch);
  const auto g_named = generator_parameters(s.g);
  const auto d_named = discriminator_parameters(s.d);
  for (const auto& [name, t] : g_named) table.fill(name, t);
  for (const auto& [name, t] : d_named) table.fill(name, t);
  s.adam_g = init_adam(g_named);
  s.adam_d = init_adam(d_named);
  fill_adam("adam.G", g_named, s.adam_g, table);
  fill_adam("adam.D", d_named, s.adam_d, table);
  s.epoch = unpack_u64(table.at("train.epoch"));
  s.window = window_from(table.at("train.window"));
  s.rng = Rng::restore(unpack_u64(table.at("rng.seed")), unpack_u64(table.at("rng.draws")));
  s.eval_noise = table.tensor("eval_noise");
  table.require_all_used();
  return s;
}

void save_state(const TrainState& state, const std::filesystem::path& path) {
  write_checkpoint(path, state_tensors(state));
}

TrainState load_state(const std::filesystem::path& path) {
  return state_from_tensors(read_checkpoint(path));
}

GeneratorCheckpoint load_generator(const std::filesystem::path& path) {
  const auto tensors = read_checkpoint(path);
  TensorTable table(tensors);
  GeneratorCheckpoint c;
  c.config = g_config_from(table.at("config.G"));
  Rng scratch(0);
  c.params = init_generator(c.config, scratch);
  for (const auto& [name, t] : generator_parameters(c.params)) table.fill(name, t);
  c.epoch = unpack_u64(table.at("train.epoch"));
  c.window = window_from(table.at("train.window"));
  c.eval_noise = table.tensor("eval_noise");
  return c;
}

TRANSGAN_END_NAMESPACE
