// SPDX-License-Identifier: Apache-2.0
// transgan: train, sample and evaluate pure-transformer GANs.
#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "transgan/config.hpp"
#include "transgan/metrics.hpp"
#include "transgan/ops.hpp"

namespace fs = std::filesystem;
using namespace transgan;

namespace {

constexpr std::size_t kChunk = 64;

Tensor load_dataset(const RunConfig& c) {
  if (c.data == DataSource::Synth)
    return synth_dataset(c.synth_kind, c.synth_count, c.generator.target_resolution, c.data_seed);
  const fs::path path(c.data_path);
  return fs::is_directory(path) ? read_cifar10_directory(path).images
                                : read_cifar10_binary(path).images;
}

Tensor first_rows(const Tensor& images, std::size_t begin, std::size_t count) {
  if (begin + count > images.dim(0))
    throw std::invalid_argument("dataset holds " + std::to_string(images.dim(0)) +
                                " images, requested rows [" + std::to_string(begin) + ", " +
                                std::to_string(begin + count) + ")");
  return slice(images, 0, begin, count).detach();
}

// Generates in chunks so large requests stay within memory. Attention uses
// the window the checkpoint was last trained under.
Tensor sample_images(const GeneratorCheckpoint& ckpt, const Tensor& z) {
  NoGradGuard no_grad;
  std::vector<Tensor> parts;
  for (std::size_t begin = 0; begin < z.dim(0); begin += kChunk) {
    const auto end = std::min(z.dim(0), begin + kChunk);
    parts.push_back(generate(slice(z, 0, begin, end - begin), ckpt.params, ckpt.config, ckpt.window));
  }
  return parts.size() == 1 ? parts.front() : concat(parts, 0);
}

Tensor seeded_noise(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Real> z(n * dim);
  for (auto& v : z) v = static_cast<Real>(rng.normal());
  return Tensor(Shape{n, dim}, std::move(z));
}

std::size_t default_cols(std::size_t count) {
  return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
}

void append_line(const fs::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  out << line << "\n";
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  std::optional<std::string> config;
  std::vector<std::string> sets;
  std::optional<std::string> preset, variant, data, data_path, out;
  std::optional<std::size_t> epochs, batch_g, batch_d, n_critic;
  std::optional<std::string> resume;
};

int cmd_train(const TrainArgs& a, std::optional<std::uint64_t> seed) {
  ConfigEntries overrides;
  for (const auto& s : a.sets) {
    const auto parsed = parse_config_text(s, "--set");
    overrides.insert(overrides.end(), parsed.begin(), parsed.end());
  }
  auto put = [&](const char* key, const auto& value) {
    if (value) {
      std::ostringstream s;
      s << *value;
      overrides.emplace_back(key, s.str());
    }
  };
  put("preset", a.preset);
  put("variant", a.variant);
  put("data", a.data);
  put("data_path", a.data_path);
  put("out_dir", a.out);
  put("epochs", a.epochs);
  put("batch_g", a.batch_g);
  put("batch_d", a.batch_d);
  put("n_critic", a.n_critic);
  put("seed", seed);

  std::optional<fs::path> config_path;
  if (a.config) config_path = *a.config;
  const RunConfig c = parse_run_config(config_path, overrides);
  const fs::path out(c.out_dir);
  fs::create_directories(out);
  std::cout << c.echo() << std::flush;
  {
    const auto text = c.echo();
    write_file_atomic(out / "config.txt",
                      std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  }

  const Tensor dataset = load_dataset(c);
  TrainState state;
  if (a.resume) {
    state = load_state(*a.resume);
    if (!(state.g_config == c.generator))
      throw ConfigError("preset: checkpoint generator layout differs from the run config");
    if (!(state.d_config == c.discriminator))
      throw ConfigError("preset: checkpoint discriminator layout differs from the run config");
  } else {
    state = init_state(c.generator, c.discriminator, c.train.seed, c.train.eval_samples);
  }

  const auto log = out / "metrics.log";
  while (state.epoch < c.train.epochs) {
    const EpochReport report = train_epoch(state, dataset, c.train, c.loss);
    const auto line = report.log_line();
    std::cout << line << std::endl;
    append_line(log, line);
    if (state.eval_noise.numel() > 0) {
      Tensor grid;
      {
        NoGradGuard no_grad;
        grid = generate(state.eval_noise, state.g, state.g_config, report.window);
      }
      write_ppm_grid(grid, default_cols(grid.dim(0)),
                     out / ("samples-epoch-" + std::to_string(state.epoch) + ".ppm"));
    }
    if (state.epoch % c.checkpoint_every == 0 || state.epoch == c.train.epochs)
      save_state(state, out / ("ckpt-epoch-" + std::to_string(state.epoch) + ".tgck"));
  }
  return 0;
}

// --------------------------------------------------------------- generate

int cmd_generate(const std::string& checkpoint, std::size_t count, std::optional<std::size_t> cols,
                 std::uint64_t seed, const std::string& out) {
  if (count == 0) throw std::invalid_argument("--count must be at least 1");
  const auto ckpt = load_generator(checkpoint);
  const Tensor images =
      sample_images(ckpt, seeded_noise(count, ckpt.config.latent_dim, seed));
  write_ppm_grid(images, cols.value_or(default_cols(count)), out);
  std::cout << "wrote " << count << " samples to " << out << "\n";
  return 0;
}

// ---------------------------------------------------------- super-resolve

int cmd_super_resolve(const std::string& checkpoint, const std::string& input, const std::string& out) {
  const auto ckpt = load_generator(checkpoint);
  const auto& config = ckpt.config;
  Tensor image = read_ppm(input);
  if (image.dim(0) != image.dim(1)) throw DimensionError("super-resolve: input must be square");
  if (image.dim(0) == config.target_resolution)
    image = downsample_average(reshape(image, Shape{1, image.dim(0), image.dim(1), 3}),
                               config.target_resolution / config.initial_grid);
  if (image.dim(image.rank() - 2) != config.initial_grid)
    throw DimensionError("super-resolve: input must be " + std::to_string(config.initial_grid) +
                         "x" + std::to_string(config.initial_grid) + " or " +
                         std::to_string(config.target_resolution) + "x" +
                         std::to_string(config.target_resolution));
  Tensor hr;
  {
    NoGradGuard no_grad;
    hr = super_resolve(image, ckpt.params, config, ckpt.window);
  }
  write_ppm_grid(hr, 1, out);
  std::cout << "wrote " << hr.dim(hr.rank() - 3) << "x" << hr.dim(hr.rank() - 2) << " image to " << out
            << "\n";
  return 0;
}

// ----------------------------------------------------------- eval-frechet

struct FrechetArgs {
  std::optional<std::string> checkpoint;
  std::string against = "generator";
  std::optional<std::string> config;
  std::vector<std::string> sets;
  std::string data = "synth";
  std::optional<std::string> data_path;
  std::optional<std::string> preset;
  std::size_t n = 1000;
  std::size_t offset = 0;
};

int cmd_eval_frechet(const FrechetArgs& a, std::uint64_t seed) {
  if (a.n < 2) throw std::invalid_argument("--n must be at least 2");
  ConfigEntries overrides;
  for (const auto& s : a.sets) {
    const auto parsed = parse_config_text(s, "--set");
    overrides.insert(overrides.end(), parsed.begin(), parsed.end());
  }
  overrides.emplace_back("data", a.data);
  if (a.data_path) overrides.emplace_back("data_path", *a.data_path);
  if (a.preset) overrides.emplace_back("preset", *a.preset);

  overrides.emplace_back("synth_count", std::to_string(a.n + a.offset));
  std::optional<fs::path> config_path;
  if (a.config) config_path = *a.config;
  const RunConfig c = parse_run_config(config_path, overrides);

  std::optional<GeneratorCheckpoint> ckpt;
  if (a.checkpoint) ckpt = load_generator(*a.checkpoint);
  // Synthetic references are rendered at the checkpoint's resolution.
  const auto res = ckpt ? ckpt->config.target_resolution : c.generator.target_resolution;
  const Tensor dataset = c.data == DataSource::Synth
                             ? synth_dataset(c.synth_kind, c.synth_count, res, c.data_seed)
                             : load_dataset(c);
  const Tensor reference = first_rows(dataset, 0, a.n);
  Tensor other;
  if (a.against == "data") {
    other = first_rows(dataset, a.offset, a.n);
  } else if (a.against == "generator") {
    if (!ckpt) throw std::invalid_argument("--checkpoint is required with --against generator");
    other = sample_images(*ckpt, seeded_noise(a.n, ckpt->config.latent_dim, seed));
  } else {
    throw std::invalid_argument("--against must be 'data' or 'generator'");
  }
  std::cout << std::setprecision(9) << "frechet=" << image_frechet(other, reference) << "\n";
  return 0;
}

// ------------------------------------------------------------------ flops

int cmd_flops(const std::string& preset, const std::string& variant, const std::string& network,
              const std::string& format) {
  const auto g = GeneratorConfig::preset(preset).with_variant(variant);
  auto d = DiscriminatorConfig::preset(preset);
  d.input_resolution = g.target_resolution;
  FlopsReport report;
  if (network == "g" || network == "both") report = count_macs(g);
  if (network == "d" || network == "both") {
    const auto dr = count_macs(d);
    report.entries.insert(report.entries.end(), dr.entries.begin(), dr.entries.end());
  }
  if (network != "g" && network != "d" && network != "both")
    throw std::invalid_argument("--network must be g, d or both");
  if (format == "kv") std::cout << report.key_values();
  else if (format == "table") std::cout << report.table();
  else throw std::invalid_argument("--format must be table or kv");
  return 0;
}

// ----------------------------------------------------- inspect-checkpoint

int cmd_inspect(const std::string& path) {
  const auto bytes = read_file(path);
  const auto tensors = decode_checkpoint(bytes);
  std::uint64_t g_params = 0, d_params = 0, g_count = 0, d_count = 0;
  std::cout << "file=" << path << "\nbytes=" << bytes.size() << "\nversion=" << kCheckpointVersion
            << "\ntensors=" << tensors.size() << "\n";
  for (const auto& t : tensors) {
    std::uint64_t n = 1;
    std::string shape = "[";
    for (std::size_t i = 0; i < t.extents.size(); ++i) {
      n *= t.extents[i];
      shape += (i ? "," : "") + std::to_string(t.extents[i]);
    }
    shape += "]";
    if (t.name.starts_with("G.")) g_params += n, ++g_count;
    if (t.name.starts_with("D.")) d_params += n, ++d_count;
    std::cout << t.name << " " << shape << "\n";
  }
  const auto state = state_from_tensors(tensors);
  std::cout << "epoch=" << state.epoch << "\ngenerator_tensors=" << g_count
            << "\ngenerator_parameters=" << g_params << "\ndiscriminator_tensors=" << d_count
            << "\ndiscriminator_parameters=" << d_params << "\nadam_steps_g=" << state.adam_g.step
            << "\nadam_steps_d=" << state.adam_d.step << "\nrng_seed=" << state.rng.seed()
            << "\nrng_draws=" << state.rng.draws() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pure-transformer GAN: training, sampling and evaluation"};
  app.require_subcommand(1);
  bool deterministic = false;
  std::optional<std::uint64_t> seed;
  app.add_flag("--deterministic", deterministic,
               "Reproducible execution (all kernels are single-threaded and ordered)");
  app.add_option("--seed", seed, "Random seed");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a generator/discriminator pair");
  t->add_option("--config", train.config, "key=value config file");
  t->add_option("--set", train.sets, "Extra key=value override (repeatable)");
  t->add_option("--preset", train.preset, "tiny, transgan-s, transgan-m, transgan-l, transgan-xl");
  t->add_option("--variant", train.variant, "cifar, stl or celeba layout");
  t->add_option("--data", train.data, "synth or cifar");
  t->add_option("--data-path", train.data_path, "CIFAR-10 batch file or directory");
  t->add_option("--epochs", train.epochs, "Total epochs");
  t->add_option("--batch-g", train.batch_g, "Generator batch size");
  t->add_option("--batch-d", train.batch_d, "Discriminator batch size");
  t->add_option("--n-critic", train.n_critic, "Discriminator steps per generator step");
  t->add_option("--out", train.out, "Output directory");
  t->add_option("--resume", train.resume, "Continue from a checkpoint");
  t->add_option("--seed", seed, "Random seed");

  std::string g_ckpt, g_out = "samples.ppm";
  std::size_t g_count = 16;
  std::optional<std::size_t> g_cols;
  auto* g = app.add_subcommand("generate", "Sample a PPM grid from a checkpoint");
  g->add_option("--checkpoint", g_ckpt, "Checkpoint file")->required();
  g->add_option("--count", g_count, "Number of samples");
  g->add_option("--cols", g_cols, "Grid columns");
  g->add_option("--out", g_out, "Output PPM");
  g->add_option("--seed", seed, "Noise seed");

  std::string sr_ckpt, sr_in, sr_out = "sr.ppm";
  auto* sr = app.add_subcommand("super-resolve", "Upsample a low-resolution PPM with the generator");
  sr->add_option("--checkpoint", sr_ckpt, "Checkpoint file")->required();
  sr->add_option("--input", sr_in, "Input PPM (low- or full-resolution)")->required();
  sr->add_option("--out", sr_out, "Output PPM");

  FrechetArgs fr;
  auto* f = app.add_subcommand("eval-frechet", "Proxy Frechet distance against a dataset");
  f->add_option("--checkpoint", fr.checkpoint, "Generator checkpoint");
  f->add_option("--against", fr.against, "generator (default) or data");
  f->add_option("--config", fr.config, "key=value config file for the dataset");
  f->add_option("--set", fr.sets, "Extra key=value override (repeatable)");
  f->add_option("--data", fr.data, "synth or cifar");
  f->add_option("--data-path", fr.data_path, "CIFAR-10 batch file or directory");
  f->add_option("--preset", fr.preset, "Preset used to size synthetic data");
  f->add_option("--n", fr.n, "Samples per side");
  f->add_option("--offset", fr.offset, "First dataset row of the comparison slice (--against data)");
  f->add_option("--seed", seed, "Noise seed");

  std::string fl_preset = "transgan-s", fl_variant = "cifar", fl_network = "g", fl_format = "table";
  auto* fl = app.add_subcommand("flops", "Count multiply-accumulates of a preset");
  fl->add_option("preset", fl_preset, "Preset name");
  fl->add_option("--variant", fl_variant, "cifar, stl or celeba");
  fl->add_option("--network", fl_network, "g (default), d or both");
  fl->add_option("--format", fl_format, "table or kv");

  std::string in_path;
  auto* in = app.add_subcommand("inspect-checkpoint", "List a checkpoint's contents");
  in->add_option("path", in_path, "Checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);
  (void)deterministic;
  try {
    if (t->parsed()) return cmd_train(train, seed);
    if (g->parsed()) return cmd_generate(g_ckpt, g_count, g_cols, seed.value_or(0), g_out);
    if (sr->parsed()) return cmd_super_resolve(sr_ckpt, sr_in, sr_out);
    if (f->parsed()) return cmd_eval_frechet(fr, seed.value_or(0));
    if (fl->parsed()) return cmd_flops(fl_preset, fl_variant, fl_network, fl_format);
    if (in->parsed()) return cmd_inspect(in_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
