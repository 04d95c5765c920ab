#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "b2u/trainer.hpp"

namespace b2u {

/// Keys accepted in a run config, in canonical order. They are exactly the
/// keys written by TrainerConfig::canonical().
const std::vector<std::string_view>& run_config_keys();

/// Set one field from its textual value. Unknown keys and malformed values throw ConfigError.
void apply_setting(TrainerConfig& config, std::string_view key, std::string_view value);

/// Line-based "key = value"; '#' starts a comment; omitted keys keep their defaults.
/// Errors name the line number.
TrainerConfig parse_run_config(std::string_view text, TrainerConfig base = {});

TrainerConfig load_run_config(const std::filesystem::path& path, TrainerConfig base = {});

}  // namespace b2u
