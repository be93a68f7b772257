#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hag/decoding.hpp"
#include "hag/rng.hpp"

namespace hag {

// The enumerable grid of candidate configs. Axis lists are strictly
// increasing and stay inside the HyperparamConfig bounds.
struct ConfigSpace {
    std::vector<double> temperature_values;
    std::vector<double> top_p_values;
    std::vector<int> top_k_values;
    std::vector<double> repetition_penalty_values;

    std::size_t size() const {
        return temperature_values.size() * top_p_values.size() * top_k_values.size() *
               repetition_penalty_values.size();
    }
};

// Library default when no backend states its own: grid temperature default
// 0.6, the rest mirroring common decoder settings. Recorded in run manifests.
inline constexpr HyperparamConfig kDefaultConfig{0.6, 0.9, 50, 1.0};

// Default grid: 11 temperatures (0.1..1.9 step 0.2 plus the 0.6 default),
// 10 top_p, 10 top_k, 6 repetition penalties; 6600 configs total.
ConfigSpace default_space();

void validate_space(const ConfigSpace& space); // throws ValidationError

// Full Cartesian product in lexicographic axis order (temperature, top_p,
// top_k, repetition_penalty); stable across runs.
std::vector<HyperparamConfig> enumerate_space(const ConfigSpace& space);

HyperparamConfig config_at(const ConfigSpace& space, std::size_t index);

HyperparamConfig random_config(const ConfigSpace& space, Rng& rng);

enum class ParseStatus { ok, clamped, fallback };

std::string_view to_string(ParseStatus status);
ParseStatus parse_status_from_string(std::string_view text);

struct ParsedConfig {
    HyperparamConfig config;
    ParseStatus status = ParseStatus::ok;
};

// Pulls a config out of free-form model text: first brace-delimited object,
// single or double quotes, top_k coerced to integer, every field clamped to
// its bounds (off-grid values are kept, not snapped). Never throws; anything
// unusable degrades to the fallback config with status "fallback".
ParsedConfig parse_config_text(std::string_view text,
                               const HyperparamConfig& fallback = kDefaultConfig);

// Canonical single-line form, fixed key order, minimal decimal digits:
// {'temperature': 0.6, 'top_p': 0.9, 'top_k': 50, 'repetition_penalty': 1.2}
// Round-trips through parse_config_text with status "ok".
std::string render_config_text(const HyperparamConfig& config);

// Shortest decimal rendering that parses back to the same double; real-valued
// fields keep at least one fractional digit.
std::string format_minimal(double value, bool force_decimal_point = true);

nlohmann::json config_to_json(const HyperparamConfig& config);
HyperparamConfig config_from_json(const nlohmann::json& value); // throws DataError

// JSON object with the four axis arrays.
ConfigSpace load_space_file(const std::filesystem::path& path);
std::string space_to_json(const ConfigSpace& space);

// JSON object with the four config keys (a backend defaults file).
HyperparamConfig load_config_file(const std::filesystem::path& path);

} // namespace hag
