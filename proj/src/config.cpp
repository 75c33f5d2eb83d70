// SPDX-License-Identifier: Apache-2.0
#include "transgan/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

TRANSGAN_BEGIN_NAMESPACE

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty())
    throw ConfigError(key + ": cannot parse '" + value + "' as a non-negative integer");
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || value.empty())
    throw ConfigError(key + ": cannot parse '" + value + "' as a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError(key + ": cannot parse '" + value + "' as a boolean");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string format_list(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string format_real(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "preset",      "variant",         "data",         "data_path",     "synth_kind",
      "synth_count", "data_seed",       "lr",           "beta1",         "beta2",
      "adam_eps",    "batch_g",         "batch_d",      "n_critic",      "epochs",
      "seed",        "mt_ct",           "locality",     "eval_samples",  "loss",
      "gp_weight",   "sr_weight",       "aug_translation", "aug_cutout", "aug_color",
      "g_dim",       "g_depths",        "g_heads",      "latent_dim",    "mlp_ratio",
      "d_embed_dim", "d_depth",         "d_heads",      "out_dir",       "checkpoint_every"};
  return keys;
}

ConfigEntries parse_config_text(std::string_view text, const std::string& source) {
  ConfigEntries out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(number) + ": expected key=value, got '" +
                        content + "'");
    auto key = trim(std::string_view(content).substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(number) + ": empty key");
    out.emplace_back(std::move(key), trim(std::string_view(content).substr(eq + 1)));
  }
  return out;
}

ConfigEntries read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), path.string());
}

RunConfig parse_run_config(const ConfigEntries& file, const ConfigEntries& overrides) {
  std::map<std::string, std::string> merged;
  for (const auto* source : {&file, &overrides})
    for (const auto& [key, value] : *source) {
      const auto& keys = config_keys();
      if (std::find(keys.begin(), keys.end(), key) == keys.end())
        throw ConfigError(key + ": unknown key");
      merged[key] = value;
    }
  auto take = [&](const char* key) -> const std::string* {
    auto it = merged.find(key);
    return it == merged.end() ? nullptr : &it->second;
  };

  RunConfig c;
  if (auto v = take("preset")) c.preset = *v;
  if (auto v = take("variant")) c.variant = *v;
  if (c.variant != "cifar" && c.variant != "stl" && c.variant != "celeba")
    throw ConfigError("variant: unknown variant '" + c.variant + "' (cifar, stl, celeba)");
  c.generator = GeneratorConfig::preset(c.preset).with_variant(c.variant);
  c.discriminator = DiscriminatorConfig::preset(c.preset);
  c.discriminator.input_resolution = c.generator.target_resolution;
  c.train.preset = c.preset;
  if (c.preset == "tiny") {
    c.train.batch_g = 16;
    c.train.batch_d = 32;
    c.train.eval_samples = 64;
  }

  if (auto v = take("data")) {
    if (*v == "synth") c.data = DataSource::Synth;
    else if (*v == "cifar") c.data = DataSource::Cifar;
    else throw ConfigError("data: unknown source '" + *v + "' (synth, cifar)");
  }
  if (auto v = take("data_path")) c.data_path = *v;
  if (auto v = take("synth_kind")) {
    if (*v != "shapes" && *v != "rects" && *v != "ellipses")
      throw ConfigError("synth_kind: unknown kind '" + *v + "' (shapes, rects, ellipses)");
    c.synth_kind = *v;
  }
  if (auto v = take("synth_count")) c.synth_count = parse_size("synth_count", *v);
  if (auto v = take("data_seed")) c.data_seed = parse_u64("data_seed", *v);

  if (auto v = take("lr")) c.train.adam.lr = parse_real("lr", *v);
  if (auto v = take("beta1")) c.train.adam.beta1 = parse_real("beta1", *v);
  if (auto v = take("beta2")) c.train.adam.beta2 = parse_real("beta2", *v);
  if (auto v = take("adam_eps")) c.train.adam.eps = parse_real("adam_eps", *v);
  if (auto v = take("batch_g")) c.train.batch_g = parse_size("batch_g", *v);
  if (auto v = take("batch_d")) c.train.batch_d = parse_size("batch_d", *v);
  if (auto v = take("n_critic")) c.train.n_critic = parse_size("n_critic", *v);
  if (auto v = take("epochs")) c.train.epochs = parse_size("epochs", *v);
  if (auto v = take("seed")) c.train.seed = parse_u64("seed", *v);
  if (auto v = take("mt_ct")) c.train.mt_ct = parse_bool("mt_ct", *v);
  if (auto v = take("locality"))
    c.train.schedule = parse_bool("locality", *v) ? LocalitySchedule::standard() : LocalitySchedule::disabled();
  if (auto v = take("eval_samples")) c.train.eval_samples = parse_size("eval_samples", *v);

  if (auto v = take("loss")) {
    if (*v == "wgan-gp") c.loss.kind = LossKind::WganGp;
    else if (*v == "hinge") c.loss.kind = LossKind::Hinge;
    else throw ConfigError("loss: unknown loss '" + *v + "' (wgan-gp, hinge)");
  }
  if (auto v = take("gp_weight")) c.loss.gp_weight = static_cast<Real>(parse_real("gp_weight", *v));
  if (auto v = take("sr_weight")) c.loss.sr_weight = static_cast<Real>(parse_real("sr_weight", *v));
  if (auto v = take("aug_translation")) c.loss.aug.translation = parse_real("aug_translation", *v);
  if (auto v = take("aug_cutout")) c.loss.aug.cutout = parse_real("aug_cutout", *v);
  if (auto v = take("aug_color")) c.loss.aug.color = parse_real("aug_color", *v);

  if (auto v = take("g_dim")) c.generator.initial_dim = parse_size("g_dim", *v);
  if (auto v = take("g_depths")) c.generator.stage_depths = parse_list("g_depths", *v);
  if (auto v = take("g_heads")) c.generator.head_count = parse_size("g_heads", *v);
  c.generator.latent_dim = c.generator.initial_dim;
  if (auto v = take("latent_dim")) c.generator.latent_dim = parse_size("latent_dim", *v);
  if (auto v = take("mlp_ratio")) {
    c.generator.mlp_ratio = parse_size("mlp_ratio", *v);
    c.discriminator.mlp_ratio = c.generator.mlp_ratio;
  }
  if (auto v = take("d_embed_dim")) c.discriminator.embed_dim = parse_size("d_embed_dim", *v);
  if (auto v = take("d_depth")) c.discriminator.depth = parse_size("d_depth", *v);
  if (auto v = take("d_heads")) c.discriminator.head_count = parse_size("d_heads", *v);

  if (auto v = take("out_dir")) c.out_dir = *v;
  if (auto v = take("checkpoint_every")) c.checkpoint_every = parse_size("checkpoint_every", *v);

  // Target resolution follows the stage count the variant chose.
  c.generator.target_resolution = c.generator.stage_side(c.generator.stages() - 1);
  c.discriminator.input_resolution = c.generator.target_resolution;

  if (c.generator.latent_dim == 0) throw ConfigError("latent_dim: must be positive");
  if (c.synth_count == 0) throw ConfigError("synth_count: must be positive");
  if (c.checkpoint_every == 0) throw ConfigError("checkpoint_every: must be positive");
  if (c.data == DataSource::Cifar && c.data_path.empty())
    throw ConfigError("data_path: required when data=cifar");
  if (c.data == DataSource::Cifar && c.generator.target_resolution != kCifarSide)
    throw ConfigError("variant: CIFAR-10 images are 32x32, the '" + c.variant +
                      "' layout emits " + std::to_string(c.generator.target_resolution));
  c.generator.validate();
  c.discriminator.validate();
  c.train.validate();
  c.loss.validate();
  return c;
}

RunConfig parse_run_config(const std::optional<std::filesystem::path>& path,
                           const ConfigEntries& overrides) {
  return parse_run_config(path ? read_config_file(*path) : ConfigEntries{}, overrides);
}

std::string RunConfig::echo() const {
  std::ostringstream s;
  const auto& g = generator;
  const auto& d = discriminator;
  s << "preset=" << preset << "\n"
    << "variant=" << variant << "\n"
    << "data=" << (data == DataSource::Synth ? "synth" : "cifar") << "\n"
    << "data_path=" << data_path << "\n"
    << "synth_kind=" << synth_kind << "\n"
    << "synth_count=" << synth_count << "\n"
    << "data_seed=" << data_seed << "\n"
    << "lr=" << format_real(train.adam.lr) << "\n"
    << "beta1=" << format_real(train.adam.beta1) << "\n"
    << "beta2=" << format_real(train.adam.beta2) << "\n"
    << "adam_eps=" << format_real(train.adam.eps) << "\n"
    << "batch_g=" << train.batch_g << "\n"
    << "batch_d=" << train.batch_d << "\n"
    << "n_critic=" << train.n_critic << "\n"
    << "epochs=" << train.epochs << "\n"
    << "seed=" << train.seed << "\n"
    << "mt_ct=" << (train.mt_ct ? "true" : "false") << "\n"
    << "locality=" << (train.schedule.breakpoints.size() > 1 ? "true" : "false") << "\n"
    << "eval_samples=" << train.eval_samples << "\n"
    << "loss=" << (loss.kind == LossKind::WganGp ? "wgan-gp" : "hinge") << "\n"
    << "gp_weight=" << format_real(loss.gp_weight) << "\n"
    << "sr_weight=" << format_real(loss.sr_weight) << "\n"
    << "aug_translation=" << format_real(loss.aug.translation) << "\n"
    << "aug_cutout=" << format_real(loss.aug.cutout) << "\n"
    << "aug_color=" << format_real(loss.aug.color) << "\n"
    << "g_dim=" << g.initial_dim << "\n"
    << "g_depths=" << format_list(g.stage_depths) << "\n"
    << "g_heads=" << g.head_count << "\n"
    << "latent_dim=" << g.latent_dim << "\n"
    << "mlp_ratio=" << g.mlp_ratio << "\n"
    << "d_embed_dim=" << d.embed_dim << "\n"
    << "d_depth=" << d.depth << "\n"
    << "d_heads=" << d.head_count << "\n"
    << "out_dir=" << out_dir << "\n"
    << "checkpoint_every=" << checkpoint_every << "\n";
  return s.str();
}

TRANSGAN_END_NAMESPACE
