// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "transgan/config.hpp"

using namespace transgan;

TEST_CASE("config text parsing") {
  const auto entries = parse_config_text("# comment\n\n lr = 0.0002 \nepochs=3 # trailing\n", "f");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0] == std::pair<std::string, std::string>{"lr", "0.0002"});
  CHECK(entries[1] == std::pair<std::string, std::string>{"epochs", "3"});
  CHECK_THROWS_WITH_AS(parse_config_text("a=1\nnonsense\n", "run.cfg"),
                       doctest::Contains("run.cfg:2"), ConfigError);
}

TEST_CASE("defaults and the tiny preset") {
  const auto base = parse_run_config(ConfigEntries{});
  CHECK(base.generator == GeneratorConfig::preset("transgan-s"));
  CHECK(base.train.adam.lr == 1e-4);
  CHECK(base.train.adam.beta1 == 0);
  CHECK(base.train.adam.beta2 == 0.9);
  CHECK(base.loss.gp_weight == 10);
  CHECK(base.loss.sr_weight == 50);
  CHECK(base.loss.aug == AugmentProbs{1.0, 0.3, 1.0});

  const auto tiny = parse_run_config(ConfigEntries{{"preset", "tiny"}});
  CHECK(tiny.generator.initial_dim == 64);
  CHECK(tiny.generator.stage_depths == std::vector<std::size_t>{2, 1, 1});
  CHECK(tiny.generator.target_resolution == 32);
  CHECK(tiny.discriminator.input_resolution == 32);
}

TEST_CASE("overrides win over the file") {
  const auto c = parse_run_config(ConfigEntries{{"epochs", "3"}, {"batch_d", "16"}},
                                  ConfigEntries{{"epochs", "5"}});
  CHECK(c.train.epochs == 5);
  CHECK(c.train.batch_d == 16);
}

TEST_CASE("variants re-target the generator") {
  const auto stl = parse_run_config(ConfigEntries{{"variant", "stl"}});
  CHECK(stl.generator.initial_grid == 12);
  CHECK(stl.generator.target_resolution == 48);
  CHECK(stl.discriminator.input_resolution == 48);
  const auto celeba = parse_run_config(ConfigEntries{{"variant", "celeba"}});
  CHECK(celeba.generator.stage_depths == std::vector<std::size_t>{5, 3, 3, 2});
  CHECK(celeba.generator.target_resolution == 64);
}

TEST_CASE("errors name the key") {
  auto fails_on = [](ConfigEntries e, const char* key) {
    INFO(key);
    CHECK_THROWS_WITH_AS(parse_run_config(e), doctest::Contains(key), ConfigError);
  };
  fails_on({{"learning_rate", "1"}}, "learning_rate");
  fails_on({{"lr", "fast"}}, "lr");
  fails_on({{"batch_g", "-1"}}, "batch_g");
  fails_on({{"mt_ct", "maybe"}}, "mt_ct");
  fails_on({{"loss", "bce"}}, "loss");
  fails_on({{"g_dim", "100"}}, "initial_dim");
  fails_on({{"d_heads", "5"}}, "d_heads");
  fails_on({{"data", "cifar"}}, "data_path");
  fails_on({{"aug_color", "2"}}, "aug_color");
  fails_on({{"preset", "giant"}}, "preset");
}

TEST_CASE("echo lists every resolved setting") {
  const auto c = parse_run_config(ConfigEntries{{"preset", "tiny"}, {"seed", "9"}});
  const auto text = c.echo();
  CHECK(text.find("seed=9\n") != std::string::npos);
  CHECK(text.find("g_depths=2,1,1\n") != std::string::npos);
  // The echo parses back to the same configuration.
  const auto again = parse_run_config(parse_config_text(text));
  CHECK(again.echo() == text);
  for (const auto& key : config_keys()) CHECK(text.find(key + "=") != std::string::npos);
}
