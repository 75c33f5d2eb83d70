// SPDX-License-Identifier: Apache-2.0
// Acceptance runner: one PASS/FAIL line per criterion.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "checks.hpp"
#include "transgan/config.hpp"
#include "transgan/metrics.hpp"
#include "transgan/ops.hpp"

using namespace transgan;
namespace fs = std::filesystem;

namespace acceptance {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Tensor noise(const Shape& shape, Rng& rng) {
  std::vector<Real> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<Real>(rng.normal());
  return Tensor(shape, std::move(v));
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), sizeof(Real) * a.numel()) == 0;
}

bool bit_equal(const std::vector<CheckpointTensor>& a, const std::vector<CheckpointTensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].name != b[i].name || a[i].extents != b[i].extents || a[i].values.size() != b[i].values.size() ||
        std::memcmp(a[i].values.data(), b[i].values.data(), 4 * a[i].values.size()) != 0)
      return false;
  return true;
}

const Shape* find(const ShapeTrace& trace, const std::string& name) {
  for (const auto& [n, s] : trace)
    if (n == name) return &s;
  return nullptr;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "transgan-acceptance";
  fs::create_directories(dir);
  return dir / name;
}

// ------------------------------------------------------------------- shapes

Outcome shape_conformance() {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  NoGradGuard guard;
  Rng rng(1);

  const auto xl = GeneratorConfig::preset("transgan-xl");
  {
    const auto g = init_generator(xl, rng);
    ShapeTrace trace;
    const Tensor img = generate(noise({1, xl.latent_dim}, rng), g, xl, AttentionWindow::unbounded(), &trace);
    auto at = [&](const std::string& name, const Shape& s) {
      const Shape* got = find(trace, name);
      expect(got && *got == s, "G " + name);
    };
    at("input_mlp", {64, 1024});
    at("stage0.block4", {64, 1024});
    at("stage1.pixelshuffle", {256, 256});
    at("stage1.block3", {256, 256});
    at("stage2.pixelshuffle", {1024, 64});
    at("stage2.block1", {1024, 64});
    at("to_rgb", {32, 32, 3});
    expect(img.shape() == Shape{1, 32, 32, 3}, "G output");
  }
  {
    const auto config = DiscriminatorConfig::preset("transgan-xl");
    const auto d = init_discriminator(config, rng);
    ShapeTrace trace;
    const Tensor scores = discriminate(noise({1, 32, 32, 3}, rng), d, config, &trace);
    std::size_t blocks = 0;
    for (std::size_t b = 0; find(trace, "block" + std::to_string(b)); ++b) {
      expect(*find(trace, "block" + std::to_string(b)) == Shape{65, 384}, "D block" + std::to_string(b));
      ++blocks;
    }
    expect(blocks == 7, "D block count");
    expect(find(trace, "embed") && *find(trace, "embed") == Shape{65, 384}, "D embed");
    expect(find(trace, "head") && *find(trace, "head") == Shape{1}, "D head");
    expect(scores.shape() == Shape{1}, "D output");
  }
  const auto stl = GeneratorConfig::preset("transgan-s").with_variant("stl");
  expect(stl.stage_tokens(0) == 144, "STL tokens");
  {
    const auto g = init_generator(stl, rng);
    const Tensor img = generate(noise({1, stl.latent_dim}, rng), g, stl);
    expect(img.shape() == Shape{1, 48, 48, 3}, "STL output");
  }
  const auto celeba = GeneratorConfig::preset("transgan-s").with_variant("celeba");
  expect(celeba.stage_depths == std::vector<std::size_t>{5, 3, 3, 2}, "CelebA depths");
  {
    const auto g = init_generator(celeba, rng);
    const Tensor img = generate(noise({1, celeba.latent_dim}, rng), g, celeba);
    expect(img.shape() == Shape{1, 64, 64, 3}, "CelebA output");
  }

  std::ostringstream s;
  s << "XL G 64x1024 -> 256x256 -> 1024x64 -> 32x32x3, D 65x384 x7 -> 1, STL 144 tokens, "
       "CelebA {5,3,3,2} at 64x64";
  for (const auto& f : failures) s << "; mismatch: " << f;
  return {failures.empty(), s.str()};
}

// ----------------------------------------------------------------- locality

Outcome locality_schedule() {
  const auto schedule = LocalitySchedule::standard();
  const std::vector<std::pair<std::size_t, std::size_t>> expected{
      {0, 8}, {19, 8}, {20, 10}, {29, 10}, {30, 12}, {39, 12}, {40, 14}, {49, 14}, {50, 0}, {1000, 0}};
  bool mapping = true;
  std::ostringstream s;
  for (const auto& [epoch, size] : expected) {
    const auto w = window_for_epoch(schedule, epoch);
    const auto want = size ? AttentionWindow::of(size) : AttentionWindow::unbounded();
    mapping = mapping && w == want;
    s << (epoch ? " " : "") << epoch << ":" << w.to_string();
  }

  bool identical = true;
  Rng rng(5);
  for (std::size_t side : {2, 4, 8, 16}) {
    const std::size_t n = side * side;
    const Tensor q = noise({2, n, 8}, rng), k = noise({2, n, 8}, rng), v = noise({2, n, 8}, rng);
    const Tensor plain = attention(q, k, v);
    for (std::size_t w : {side, side + 1, 2 * side}) {
      const AttentionMask mask{AttentionWindow::of(w), side};
      identical = identical && bit_equal(plain, attention(q, k, v, &mask));
    }
  }
  const auto config = GeneratorConfig::preset("tiny");
  const auto g = init_generator(config, rng);
  const Tensor z = noise({2, config.latent_dim}, rng);
  {
    NoGradGuard guard;
    identical = identical && bit_equal(generate(z, g, config), generate(z, g, config, AttentionWindow::of(32)));
  }
  s << "; window >= side bit-identical: " << (identical ? "yes" : "no");
  return {mapping && identical, s.str()};
}

// ----------------------------------------------------------------- training

struct SeedRun {
  double fd0 = 0, fd_final = 0, seconds = 0;
  bool finite = true;
  std::string error;
};

SeedRun train_seed(const RunConfig& config, const Tensor& data, const Tensor& reference,
                   std::uint64_t seed, std::size_t epochs, bool verbose) {
  constexpr std::size_t kSamples = 512;
  TrainState state = init_state(config.generator, config.discriminator, seed, 4);
  Rng noise_rng(999);
  const Tensor z = noise({kSamples, config.generator.latent_dim}, noise_rng);
  auto proxy_fd = [&] {
    NoGradGuard guard;
    // Sampling uses the window the generator was last trained under.
    const auto window = state.epoch ? state.window : window_for_epoch(config.train.schedule, 0);
    return image_frechet(generate(z, state.g, state.g_config, window), reference);
  };

  SeedRun run;
  run.fd0 = proxy_fd();
  auto train = config.train;
  train.seed = seed;
  const auto start = Clock::now();
  try {
    for (std::size_t e = 0; e < epochs; ++e) {
      const auto report = train_epoch(state, data, train, config.loss);
      for (double v : {report.d_loss, report.g_loss, report.gp, report.sr})
        run.finite = run.finite && std::isfinite(v);
      if (verbose) std::cerr << "  seed " << seed << " " << report.log_line() << "\n";
    }
  } catch (const TrainingError& e) {
    run.finite = false;
    run.error = e.what();
  }
  run.seconds = seconds_since(start);
  run.fd_final = proxy_fd();
  return run;
}

Outcome training_signal(std::size_t seeds, std::size_t epochs, bool verbose) {
  const RunConfig config = parse_run_config(ConfigEntries{{"preset", "tiny"}});
  const Tensor data = synth_dataset("shapes", 2048, 32, 1);
  const Tensor reference = slice(data, 0, 0, 512).detach();
  std::size_t hits = 0;
  bool finite = true, fast = true;
  std::ostringstream s;
  s << "aug (" << config.loss.aug.translation << "," << config.loss.aug.cutout << ","
    << config.loss.aug.color << "), " << epochs << " epochs;";
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    const auto run = train_seed(config, data, reference, seed, epochs, verbose);
    const double ratio = run.fd_final / run.fd0;
    hits += ratio <= 0.5;
    finite = finite && run.finite;
    fast = fast && run.seconds < 1800;
    s << " seed " << seed << ": fd " << run.fd0 << " -> " << run.fd_final << " (ratio " << ratio << ", "
      << static_cast<int>(run.seconds) << " s)";
    if (!run.error.empty()) s << " [" << run.error << "]";
    s << ";";
    if (verbose) std::cerr << "  seed " << seed << " ratio " << ratio << "\n";
  }
  const std::size_t needed = seeds >= 5 ? 4 : seeds;
  s << " " << hits << "/" << seeds << " at <= 0.5, losses " << (finite ? "finite" : "NOT finite");
  return {hits >= needed && finite && fast && epochs >= 30 && seeds >= 5, s.str()};
}

// -------------------------------------------------------------------- MT-CT

struct SrRun {
  double first = 0, last = 0;
  bool frozen = true;
};

SrRun sr_only(double lr, std::size_t steps) {
  auto config = parse_run_config(ConfigEntries{{"preset", "tiny"}});
  config.train.batch_g = 1;
  config.train.adam.lr = lr;
  TrainState state = init_state(config.generator, config.discriminator, 1, 4);
  std::vector<Tensor> d_before;
  for (const auto& [name, t] : discriminator_parameters(state.d)) d_before.push_back(t.clone());
  const Tensor image = synth_dataset("shapes", 1, 32, 5);
  SrRun run;
  for (std::size_t step = 0; step <= steps; ++step) {
    // Losses are reported before each update, so step `steps` sees the
    // result of `steps` updates.
    const auto l = generator_step(state, image, AttentionWindow::of(8), config.train, config.loss, step, false);
    const double mse = l.sr / config.loss.sr_weight;
    if (step == 0) run.first = mse;
    run.last = mse;
  }
  std::size_t i = 0;
  for (const auto& [name, t] : discriminator_parameters(state.d)) run.frozen = run.frozen && bit_equal(t, d_before[i++]);
  run.frozen = run.frozen && state.adam_d.step == 0;
  return run;
}

Outcome mt_ct_sanity() {
  constexpr std::size_t kSteps = 200;
  const auto main = sr_only(1e-3, kSteps);
  const auto base = sr_only(1e-4, kSteps);
  const double reduction = main.first / main.last;
  std::ostringstream s;
  s << "lambda 50, Adam lr 1e-3: MSE " << main.first << " -> " << main.last << " (" << reduction
    << "x in " << kSteps << " steps); training lr 1e-4: " << base.first << " -> " << base.last << " ("
    << base.first / base.last << "x); D " << (main.frozen && base.frozen ? "unchanged" : "CHANGED");
  return {reduction >= 10 && main.frozen && base.frozen, s.str()};
}

// -------------------------------------------------------------------- FLOPs

Outcome flops_reconciliation() {
  const double s_macs = static_cast<double>(count_macs(GeneratorConfig::preset("transgan-s")).total());
  const double ratio = s_macs / 0.68e9;
  bool monotone = true;
  std::uint64_t previous = 0;
  std::ostringstream s;
  s << "S " << s_macs / 1e9 << " G MACs (" << ratio << "x of 0.68 G);";
  for (const char* name : {"transgan-s", "transgan-m", "transgan-l", "transgan-xl"}) {
    const auto total = count_macs(GeneratorConfig::preset(name)).total();
    monotone = monotone && total > previous;
    previous = total;
    s << " " << name << " " << total / 1e9;
  }
  FlopsReport r;
  add_block_macs(r, "block", 64, 384, 4);
  const std::uint64_t n = 64, c = 384;
  const bool ledger = r.subtotal(MacCategory::AttentionProjections) == 4 * n * c * c &&
                      r.subtotal(MacCategory::AttentionScores) == 2 * n * n * c &&
                      r.subtotal(MacCategory::Mlp) == 8 * n * c * c &&
                      r.total() == 12 * n * c * c + 2 * n * n * c;
  s << "; block (64 tokens, 384 wide) ledger " << r.total() << (ledger ? " exact" : " MISMATCH");
  return {ratio >= 0.5 && ratio <= 2 && monotone && ledger, s.str()};
}

// ------------------------------------------------------------------ formats

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

std::vector<std::uint8_t> seeded_grid(const Tensor& data) {
  TrainState state = init_state(small_generator(), small_discriminator(), 11, 4);
  train_epoch(state, data, small_train(), LossConfig{});
  NoGradGuard guard;
  return encode_ppm_grid(generate(state.eval_noise, state.g, state.g_config, state.window), 2);
}

Outcome formats() {
  std::ostringstream s;
  const Tensor data = synth_dataset("shapes", 16, 8, 2);

  // Checkpoint round trip.
  TrainState state = init_state(small_generator(), small_discriminator(), 6, 4);
  train_epoch(state, data, small_train(), LossConfig{});
  const auto path = scratch("state.tgck");
  save_state(state, path);
  const TrainState back = load_state(path);
  const bool round_trip = bit_equal(state_tensors(back), state_tensors(state)) && back.rng == state.rng &&
                          back.adam_g.step == state.adam_g.step && back.adam_d.step == state.adam_d.step &&
                          back.epoch == state.epoch;
  s << "checkpoint round trip (" << state_tensors(state).size() << " tensors incl. Adam moments and rng) "
    << (round_trip ? "bit-exact" : "DIFFERS");

  // CIFAR-10 fixture: record r has label r, red byte (p + r) % 256,
  // green 255 - red, blue 128.
  std::vector<std::uint8_t> bytes;
  for (std::size_t r = 0; r < 2; ++r) {
    bytes.push_back(static_cast<std::uint8_t>(r));
    for (std::size_t p = 0; p < 1024; ++p) bytes.push_back(static_cast<std::uint8_t>((p + r) % 256));
    for (std::size_t p = 0; p < 1024; ++p) bytes.push_back(static_cast<std::uint8_t>(255 - (p + r) % 256));
    for (std::size_t p = 0; p < 1024; ++p) bytes.push_back(128);
  }
  const auto cifar = decode_cifar10(bytes);
  auto real_of = [](unsigned b) { return static_cast<Real>(b) / static_cast<Real>(127.5) - 1; };
  bool cifar_ok = cifar.images.shape() == Shape{2, 32, 32, 3} && cifar.labels == std::vector<std::uint8_t>{0, 1};
  for (std::size_t r = 0; r < 2 && cifar_ok; ++r)
    for (std::size_t p = 0; p < 1024; ++p) {
      const unsigned red = (p + r) % 256;
      const Real* px = cifar.images.data().data() + (r * 1024 + p) * 3;
      cifar_ok = cifar_ok && px[0] == real_of(red) && px[1] == real_of(255 - red) && px[2] == real_of(128);
    }
  s << "; CIFAR-10 fixture " << (cifar_ok ? "exact" : "MISMATCH");

  // Same seed, same PPM bytes.
  const auto grid_a = seeded_grid(data), grid_b = seeded_grid(data);
  const bool ppm_ok = grid_a == grid_b;
  s << "; PPM " << grid_a.size() << " bytes " << (ppm_ok ? "identical" : "DIFFER") << " across runs";

  // Resume after one epoch of three.
  const auto train = small_train();
  TrainState straight = init_state(small_generator(), small_discriminator(), 8, 4);
  for (int e = 0; e < 3; ++e) train_epoch(straight, data, train, LossConfig{});
  TrainState first = init_state(small_generator(), small_discriminator(), 8, 4);
  train_epoch(first, data, train, LossConfig{});
  const auto resume_path = scratch("resume.tgck");
  save_state(first, resume_path);
  TrainState resumed = load_state(resume_path);
  for (int e = 0; e < 2; ++e) train_epoch(resumed, data, train, LossConfig{});
  const bool resume_ok = bit_equal(state_tensors(resumed), state_tensors(straight));
  s << "; resume " << (resume_ok ? "bit-exact" : "DIFFERS");
  return {round_trip && cifar_ok && ppm_ok && resume_ok, s.str()};
}

}  // namespace
}  // namespace acceptance

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks; prints one PASS/FAIL line per criterion"};
  std::vector<int> only;
  std::size_t seeds = 5, epochs = 30;
  bool verbose = false;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 9));
  app.add_option("--seeds", seeds, "Training seeds for criterion 5");
  app.add_option("--epochs", epochs, "Training epochs for criterion 5");
  app.add_flag("-v,--verbose", verbose, "Log training progress to stderr");
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected(only.begin(), only.end());
  const std::vector<std::pair<const char*, std::function<acceptance::Outcome()>>> criteria{
      {"gradient suite", acceptance::gradient_suite},
      {"double backprop", acceptance::double_backprop},
      {"shape conformance", acceptance::shape_conformance},
      {"locality schedule", acceptance::locality_schedule},
      {"training signal", [&] { return acceptance::training_signal(seeds, epochs, verbose); }},
      {"MT-CT sanity", acceptance::mt_ct_sanity},
      {"FLOPs reconciliation", acceptance::flops_reconciliation},
      {"formats", acceptance::formats},
      {"metric correctness", acceptance::metric_correctness},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    acceptance::Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    all = all && outcome.pass;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": "
              << outcome.detail << std::endl;
  }
  return all ? 0 : 1;
}
