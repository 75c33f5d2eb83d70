// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "transgan/trainer.hpp"

using namespace transgan;
namespace fs = std::filesystem;

namespace {

GeneratorConfig small_generator() {
  GeneratorConfig c;
  c.initial_grid = 4;
  c.initial_dim = 16;
  c.stage_depths = {1, 1};
  c.target_resolution = 8;
  c.latent_dim = 8;
  c.mlp_ratio = 2;
  c.head_count = 2;
  return c;
}

DiscriminatorConfig small_discriminator() {
  DiscriminatorConfig c;
  c.patch_grid = 4;
  c.embed_dim = 8;
  c.depth = 1;
  c.head_count = 2;
  c.mlp_ratio = 2;
  c.input_resolution = 8;
  return c;
}

TrainConfig small_train() {
  TrainConfig t;
  t.batch_d = 8;
  t.batch_g = 4;
  t.eval_samples = 4;
  t.schedule = {{{0, AttentionWindow::of(2)}, {1, AttentionWindow::of(3)}, {2, AttentionWindow::unbounded()}}};
  return t;
}

bool bit_equal(const std::vector<CheckpointTensor>& a, const std::vector<CheckpointTensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].extents != b[i].extents ||
        a[i].values.size() != b[i].values.size())
      return false;
    if (std::memcmp(a[i].values.data(), b[i].values.data(), 4 * a[i].values.size()) != 0) return false;
  }
  return true;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "transgan-test-trainer";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("standard locality schedule") {
  const auto s = LocalitySchedule::standard();
  const std::vector<std::pair<std::size_t, AttentionWindow>> expected{
      {0, AttentionWindow::of(8)},   {19, AttentionWindow::of(8)},  {20, AttentionWindow::of(10)},
      {29, AttentionWindow::of(10)}, {30, AttentionWindow::of(12)}, {39, AttentionWindow::of(12)},
      {40, AttentionWindow::of(14)}, {49, AttentionWindow::of(14)}, {50, AttentionWindow::unbounded()},
      {1000, AttentionWindow::unbounded()}};
  for (const auto& [epoch, window] : expected) {
    INFO("epoch " << epoch);
    CHECK(window_for_epoch(s, epoch) == window);
  }
  CHECK(window_for_epoch(LocalitySchedule::disabled(), 0) == AttentionWindow::unbounded());
  LocalitySchedule bad{{{1, AttentionWindow::of(2)}}};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  LocalitySchedule unordered{{{0, AttentionWindow::of(2)}, {5, AttentionWindow::of(3)}, {5, AttentionWindow::of(4)}}};
  CHECK_THROWS_AS(unordered.validate(), ConfigError);
}

TEST_CASE("adam matches a hand-computed trajectory") {
  Tensor p(Shape{2}, {1.0f, -2.0f}, true);
  NamedParams named{{"p", p}};
  AdamState state = init_adam(named);
  AdamHyper h;
  h.lr = 0.1;
  h.beta1 = 0.5;
  h.beta2 = 0.9;
  h.eps = 1e-8;
  const double g1[2] = {0.5, -1.0}, g2[2] = {-0.25, 2.0};
  double theta[2] = {1.0, -2.0}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 2; ++t) {
    const double* g = t == 1 ? g1 : g2;
    adam_step({p}, {Tensor(Shape{2}, {float(g[0]), float(g[1])})}, state, h);
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.5 * m[i] + 0.5 * g[i];
      v[i] = 0.9 * v[i] + 0.1 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.5, t)), vh = v[i] / (1 - std::pow(0.9, t));
      theta[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK(p[0] == doctest::Approx(theta[0]).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(theta[1]).epsilon(1e-6));
  }
  CHECK(state.step == 2);
  // Undefined gradient: moments decay, no failure.
  CHECK_NOTHROW(adam_step({p}, {Tensor()}, state, h));
  CHECK_THROWS_AS(adam_step({p}, {Tensor::zeros({3})}, state, h), DimensionError);
}

TEST_CASE("train config validation") {
  TrainConfig t;
  t.batch_d = 0;
  CHECK_THROWS_WITH_AS(t.validate(), doctest::Contains("batch_d"), ConfigError);
  t = TrainConfig{};
  t.adam.beta2 = 1;
  CHECK_THROWS_WITH_AS(t.validate(), doctest::Contains("beta2"), ConfigError);
}

TEST_CASE("mismatched resolutions are rejected") {
  auto d = small_discriminator();
  d.input_resolution = 16;
  d.patch_grid = 4;
  CHECK_THROWS_AS(init_state(small_generator(), d, 1), ConfigError);
}

TEST_CASE("steps update only their own network") {
  TrainState s = init_state(small_generator(), small_discriminator(), 3, 4);
  const Tensor reals = synth_dataset("shapes", 8, 8, 1);
  const auto before = state_tensors(s);
  const auto train = small_train();
  const LossConfig loss;

  auto snapshot = [](const NamedParams& named) {
    std::vector<std::vector<Real>> out;
    for (const auto& [n, t] : named) out.emplace_back(t.data().begin(), t.data().end());
    return out;
  };
  const auto g0 = snapshot(generator_parameters(s.g));
  const auto d0 = snapshot(discriminator_parameters(s.d));
  const auto d_losses = discriminator_step(s, reals, AttentionWindow::of(2), train, loss, 0);
  CHECK(std::isfinite(d_losses.total));
  CHECK(snapshot(generator_parameters(s.g)) == g0);
  const auto d1 = snapshot(discriminator_parameters(s.d));
  CHECK(d1 != d0);
  const auto g_losses = generator_step(s, reals, AttentionWindow::of(2), train, loss, 0);
  CHECK(g_losses.sr > 0);
  CHECK(snapshot(discriminator_parameters(s.d)) == d1);
  CHECK(snapshot(generator_parameters(s.g)) != g0);
  for (const auto& [n, t] : generator_parameters(s.g)) CHECK(t.requires_grad());
  for (const auto& [n, t] : discriminator_parameters(s.d)) CHECK(t.requires_grad());
}

TEST_CASE("an epoch covers the dataset and logs one line") {
  TrainState s = init_state(small_generator(), small_discriminator(), 4, 4);
  const Tensor data = synth_dataset("shapes", 20, 8, 2);
  auto train = small_train();
  const auto r = train_epoch(s, data, train, LossConfig{});
  CHECK(r.epoch == 1);
  CHECK(s.epoch == 1);
  CHECK(r.samples == 20);
  CHECK(r.d_steps == 3);  // 8 + 8 + 4
  CHECK(r.g_steps == 3);
  CHECK(r.window == AttentionWindow::of(2));
  const auto line = r.log_line();
  for (const char* key : {"epoch=1 ", "d_loss=", "g_loss=", "gp=", "sr=", "window=2", "imgs_per_sec="})
    CHECK(line.find(key) != std::string::npos);

  train.n_critic = 2;
  const auto r2 = train_epoch(s, data, train, LossConfig{});
  CHECK(r2.d_steps == 3);
  CHECK(r2.g_steps == 1);
  CHECK(r2.window == AttentionWindow::of(3));

  train.n_critic = 0;
  const auto r3 = train_epoch(s, data, train, LossConfig{});
  CHECK(r3.d_steps == 0);
  CHECK(r3.g_steps == 3);
  CHECK_THROWS_AS(train_epoch(s, synth_dataset("shapes", 2, 16, 1), train, LossConfig{}), DimensionError);
}

TEST_CASE("hinge loss trains") {
  TrainState s = init_state(small_generator(), small_discriminator(), 4, 4);
  LossConfig loss;
  loss.kind = LossKind::Hinge;
  const auto r = train_epoch(s, synth_dataset("shapes", 8, 8, 2), small_train(), loss);
  CHECK(std::isfinite(r.d_loss));
  CHECK(r.gp == 0);
}

TEST_CASE("non-finite losses name the term") {
  TrainState s = init_state(small_generator(), small_discriminator(), 5, 4);
  Tensor(s.d.head.weight).mutable_data()[0] = std::numeric_limits<Real>::quiet_NaN();
  try {
    discriminator_step(s, synth_dataset("shapes", 8, 8, 1), AttentionWindow::of(2), small_train(),
                       LossConfig{}, 7);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    const std::string what = e.what();
    CHECK(what.find("d_loss") != std::string::npos);
    CHECK(what.find("epoch 0 step 7") != std::string::npos);
  }
}

TEST_CASE("state round trip is bit-exact") {
  TrainState s = init_state(small_generator(), small_discriminator(), 6, 4);
  train_epoch(s, synth_dataset("shapes", 16, 8, 2), small_train(), LossConfig{});
  const auto tensors = state_tensors(s);
  const auto path = scratch("state.tgck");
  save_state(s, path);
  TrainState back = load_state(path);
  CHECK(bit_equal(state_tensors(back), tensors));
  CHECK(back.rng == s.rng);
  CHECK(back.epoch == 1);
  CHECK(back.adam_g.step == s.adam_g.step);
  CHECK(back.g_config == s.g_config);
  CHECK(back.d_config == s.d_config);

  const auto gen = load_generator(path);
  CHECK(gen.config == s.g_config);
  CHECK(gen.epoch == 1);
  CHECK(gen.window == AttentionWindow::of(2));
  CHECK(back.window == AttentionWindow::of(2));

  auto extra = tensors;
  extra.push_back({"bogus", {1}, {0}});
  CHECK_THROWS_WITH_AS(state_from_tensors(extra), doctest::Contains("unexpected"), FormatError);
  auto missing = tensors;
  missing.pop_back();
  CHECK_THROWS_AS(state_from_tensors(missing), FormatError);
}

TEST_CASE("resumed training matches uninterrupted training") {
  const Tensor data = synth_dataset("shapes", 16, 8, 2);
  const auto train = small_train();
  TrainState straight = init_state(small_generator(), small_discriminator(), 8, 4);
  for (int e = 0; e < 3; ++e) train_epoch(straight, data, train, LossConfig{});

  TrainState first = init_state(small_generator(), small_discriminator(), 8, 4);
  train_epoch(first, data, train, LossConfig{});
  const auto path = scratch("resume.tgck");
  save_state(first, path);
  TrainState resumed = load_state(path);
  for (int e = 0; e < 2; ++e) train_epoch(resumed, data, train, LossConfig{});
  CHECK(bit_equal(state_tensors(resumed), state_tensors(straight)));
}
