#pragma once

// Plain-text run configuration: one `key = value` per line, `#` starts a
// comment. Unknown keys are rejected. See README for every key and default.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pulse/synth.hpp"
#include "pulse/trainer.hpp"

namespace pulse {

struct RunConfig {
  DatasetConfig data;
  TrainConfig train;
  std::filesystem::path data_dir = "data";
  std::vector<std::uint64_t> ablate_seeds{1, 2, 3, 4, 5};
};

// Desk-scale defaults used when a key is absent.
RunConfig default_run_config();

// Applies one key/value pair; throws ConfigError naming the key.
void apply_config_value(RunConfig& config, const std::string& key, const std::string& value);

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

// Every key with its current value, in a stable order.
std::string dump_run_config(const RunConfig& config);

// Sets the dataset and training seeds together.
void override_seed(RunConfig& config, std::uint64_t seed);

}  // namespace pulse
