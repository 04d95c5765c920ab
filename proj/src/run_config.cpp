#include "b2u/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "b2u/error.hpp"

namespace b2u {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
    T value{};
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size()) {
        throw ConfigError("bad value '" + std::string(text) + "' for key '" + std::string(key) + "'");
    }
    return value;
}

}  // namespace

const std::vector<std::string_view>& run_config_keys() {
    static const std::vector<std::string_view> keys = {
        "epochs", "batch_size", "lr0", "weight_decay", "grid_s", "patch",
        "seed", "noise", "eta", "lambda_s", "lambda_f", "ablation_mode",
        "lambda_granularity", "in_channels", "base_channels", "depth", "leaky_slope"};
    return keys;
}

void apply_setting(TrainerConfig& c, std::string_view key, std::string_view value) {
    if (key == "epochs") c.epochs = parse_number<int>(key, value);
    else if (key == "batch_size") c.batch_size = parse_number<int>(key, value);
    else if (key == "lr0") c.lr0 = parse_number<double>(key, value);
    else if (key == "weight_decay") c.weight_decay = parse_number<double>(key, value);
    else if (key == "grid_s") c.grid_s = parse_number<int>(key, value);
    else if (key == "patch") c.patch = parse_number<int>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "noise") c.noise = NoiseSpec::parse(value);
    else if (key == "eta") c.loss.eta = parse_number<double>(key, value);
    else if (key == "lambda_s") c.loss.lambda_s = parse_number<double>(key, value);
    else if (key == "lambda_f") c.loss.lambda_f = parse_number<double>(key, value);
    else if (key == "ablation_mode") c.ablation_mode = parse_ablation_mode(value);
    else if (key == "lambda_granularity") c.lambda_granularity = parse_lambda_granularity(value);
    else if (key == "in_channels") c.net.in_channels = parse_number<int>(key, value);
    else if (key == "base_channels") c.net.base_channels = parse_number<int>(key, value);
    else if (key == "depth") c.net.depth = parse_number<int>(key, value);
    else if (key == "leaky_slope") c.net.leaky_slope = parse_number<float>(key, value);
    else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

TrainerConfig parse_run_config(std::string_view text, TrainerConfig base) {
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        try {
            apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return base;
}

TrainerConfig load_run_config(const std::filesystem::path& path, TrainerConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot open config");
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return parse_run_config(text.str(), base);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace b2u
