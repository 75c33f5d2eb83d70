// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "transgan/trainer.hpp"

TRANSGAN_BEGIN_NAMESPACE

enum class DataSource { Synth, Cifar };

/// Everything a training run needs, fully resolved.
struct RunConfig {
  std::string preset = "transgan-s";
  std::string variant = "cifar";
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  TrainConfig train;
  LossConfig loss;

  DataSource data = DataSource::Synth;
  std::string data_path;
  std::string synth_kind = "shapes";
  std::size_t synth_count = 2048;
  std::uint64_t data_seed = 1;

  std::string out_dir = "run";
  /// Write ckpt-epoch-N every this many epochs (the last epoch always).
  std::size_t checkpoint_every = 1;

  /// One key=value line per setting, in a fixed order.
  std::string echo() const;
};

/// Ordered key=value pairs; later entries for the same key win.
using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/// key=value per line; blank lines and `#` comments are ignored.
ConfigEntries parse_config_text(std::string_view text, const std::string& source = "config");
ConfigEntries read_config_file(const std::filesystem::path& path);

/// Defaults, then `file`, then `overrides`. `preset` and `variant` are
/// applied first and every other key refines the result. Errors name the
/// offending key.
RunConfig parse_run_config(const ConfigEntries& file, const ConfigEntries& overrides = {});
RunConfig parse_run_config(const std::optional<std::filesystem::path>& path,
                           const ConfigEntries& overrides);

/// Every key accepted by parse_run_config.
const std::vector<std::string>& config_keys();

TRANSGAN_END_NAMESPACE
