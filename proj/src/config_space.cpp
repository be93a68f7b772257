#include "hag/config_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hag/error.hpp"

namespace hag {

using nlohmann::json;

ConfigSpace default_space() {
    ConfigSpace space;
    space.temperature_values = {0.1, 0.3, 0.5, 0.6, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7, 1.9};
    space.top_p_values = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    space.top_k_values = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    space.repetition_penalty_values = {1.0, 1.1, 1.2, 1.3, 1.4, 1.5};
    return space;
}

namespace {

template <typename T>
void check_axis(const std::vector<T>& values, const char* name) {
    if (values.empty()) {
        throw ValidationError(std::string("config space axis '") + name + "' is empty");
    }
    if (!std::is_sorted(values.begin(), values.end()) ||
        std::adjacent_find(values.begin(), values.end()) != values.end()) {
        throw ValidationError(std::string("config space axis '") + name +
                              "' must be strictly increasing");
    }
}

} // namespace

void validate_space(const ConfigSpace& space) {
    check_axis(space.temperature_values, "temperature");
    check_axis(space.top_p_values, "top_p");
    check_axis(space.top_k_values, "top_k");
    check_axis(space.repetition_penalty_values, "repetition_penalty");
    // axes are sorted, so the two corner configs cover every per-field bound
    validate_config({space.temperature_values.front(), space.top_p_values.front(),
                     space.top_k_values.front(), space.repetition_penalty_values.front()});
    validate_config({space.temperature_values.back(), space.top_p_values.back(),
                     space.top_k_values.back(), space.repetition_penalty_values.back()});
}

std::vector<HyperparamConfig> enumerate_space(const ConfigSpace& space) {
    std::vector<HyperparamConfig> configs;
    configs.reserve(space.size());
    for (double t : space.temperature_values) {
        for (double p : space.top_p_values) {
            for (int k : space.top_k_values) {
                for (double r : space.repetition_penalty_values) {
                    configs.push_back({t, p, k, r});
                }
            }
        }
    }
    return configs;
}

HyperparamConfig config_at(const ConfigSpace& space, std::size_t index) {
    if (index >= space.size()) {
        throw ValidationError("config index out of range");
    }
    const std::size_t nr = space.repetition_penalty_values.size();
    const std::size_t nk = space.top_k_values.size();
    const std::size_t np = space.top_p_values.size();
    const std::size_t r = index % nr;
    const std::size_t k = (index / nr) % nk;
    const std::size_t p = (index / (nr * nk)) % np;
    const std::size_t t = index / (nr * nk * np);
    return {space.temperature_values[t], space.top_p_values[p], space.top_k_values[k],
            space.repetition_penalty_values[r]};
}

HyperparamConfig random_config(const ConfigSpace& space, Rng& rng) {
    return config_at(space, uniform_index(rng, space.size()));
}

std::string_view to_string(ParseStatus status) {
    switch (status) {
    case ParseStatus::ok: return "ok";
    case ParseStatus::clamped: return "clamped";
    case ParseStatus::fallback: return "fallback";
    }
    return "fallback";
}

ParseStatus parse_status_from_string(std::string_view text) {
    if (text == "ok") return ParseStatus::ok;
    if (text == "clamped") return ParseStatus::clamped;
    if (text == "fallback") return ParseStatus::fallback;
    throw ValidationError("unknown parse status: " + std::string(text));
}

std::string format_minimal(double value, bool force_decimal_point) {
    char buffer[64];
    std::string fallback;
    bool found = false;
    for (int precision = 1; precision <= 17; ++precision) {
        std::snprintf(buffer, sizeof(buffer), "%.*g", precision, value);
        if (std::strtod(buffer, nullptr) == value) {
            if (fallback.empty()) {
                fallback = buffer; // shortest round-trip, possibly exponent form
            }
            if (std::string_view(buffer).find('e') == std::string_view::npos) {
                found = true;
                break;
            }
        }
    }
    std::string text(found ? std::string(buffer) : fallback);
    if (force_decimal_point && text.find('.') == std::string::npos &&
        text.find('e') == std::string::npos && text.find("inf") == std::string::npos &&
        text.find("nan") == std::string::npos) {
        text += ".0";
    }
    return text;
}

namespace {

// Numeric field from a parsed object; accepts numbers and numeric strings.
bool extract_number(const json& object, const char* key, double& out) {
    auto it = object.find(key);
    if (it == object.end()) {
        return false;
    }
    if (it->is_number()) {
        out = it->get<double>();
    } else if (it->is_string()) {
        const std::string& s = it->get_ref<const std::string&>();
        char* end = nullptr;
        out = std::strtod(s.c_str(), &end);
        if (end == s.c_str() || (end && *end != '\0')) {
            return false;
        }
    } else {
        return false;
    }
    return std::isfinite(out);
}

} // namespace

ParsedConfig parse_config_text(std::string_view text, const HyperparamConfig& fallback) {
    try {
        const std::size_t open = text.find('{');
        if (open == std::string_view::npos) {
            return {fallback, ParseStatus::fallback};
        }
        int depth = 0;
        std::size_t close = std::string_view::npos;
        for (std::size_t i = open; i < text.size(); ++i) {
            if (text[i] == '{') {
                ++depth;
            } else if (text[i] == '}') {
                if (--depth == 0) {
                    close = i;
                    break;
                }
            }
        }
        if (close == std::string_view::npos) {
            return {fallback, ParseStatus::fallback};
        }
        std::string candidate(text.substr(open, close - open + 1));
        std::replace(candidate.begin(), candidate.end(), '\'', '"');
        const json object = json::parse(candidate, nullptr, /*allow_exceptions=*/false);
        if (object.is_discarded() || !object.is_object()) {
            return {fallback, ParseStatus::fallback};
        }
        double temperature = 0, top_p = 0, top_k = 0, repetition_penalty = 0;
        if (!extract_number(object, "temperature", temperature) ||
            !extract_number(object, "top_p", top_p) || !extract_number(object, "top_k", top_k) ||
            !extract_number(object, "repetition_penalty", repetition_penalty)) {
            return {fallback, ParseStatus::fallback};
        }
        const double rounded_k = std::nearbyint(top_k);
        HyperparamConfig raw{temperature, top_p,
                             static_cast<int>(std::clamp(rounded_k, -1.0e9, 1.0e9)),
                             repetition_penalty};
        const HyperparamConfig clamped = clamp_config(raw);
        return {clamped, clamped == raw ? ParseStatus::ok : ParseStatus::clamped};
    } catch (...) {
        return {fallback, ParseStatus::fallback};
    }
}

std::string render_config_text(const HyperparamConfig& config) {
    std::string out = "{'temperature': ";
    out += format_minimal(config.temperature);
    out += ", 'top_p': ";
    out += format_minimal(config.top_p);
    out += ", 'top_k': ";
    out += std::to_string(config.top_k);
    out += ", 'repetition_penalty': ";
    out += format_minimal(config.repetition_penalty);
    out += "}";
    return out;
}

json config_to_json(const HyperparamConfig& config) {
    return json{{"temperature", config.temperature},
                {"top_p", config.top_p},
                {"top_k", config.top_k},
                {"repetition_penalty", config.repetition_penalty}};
}

HyperparamConfig config_from_json(const json& value) {
    try {
        return {value.at("temperature").get<double>(), value.at("top_p").get<double>(),
                value.at("top_k").get<int>(), value.at("repetition_penalty").get<double>()};
    } catch (const json::exception& e) {
        throw DataError(std::string("config JSON: ") + e.what());
    }
}

namespace {

json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    const json value = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded()) {
        throw DataError("invalid JSON in " + path.string());
    }
    return value;
}

} // namespace

ConfigSpace load_space_file(const std::filesystem::path& path) {
    const json value = load_json_file(path);
    if (!value.is_object()) {
        throw DataError(path.string() + ": space file must be a JSON object");
    }
    ConfigSpace space;
    try {
        space.temperature_values = value.at("temperature").get<std::vector<double>>();
        space.top_p_values = value.at("top_p").get<std::vector<double>>();
        space.top_k_values = value.at("top_k").get<std::vector<int>>();
        space.repetition_penalty_values =
            value.at("repetition_penalty").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    validate_space(space);
    return space;
}

std::string space_to_json(const ConfigSpace& space) {
    json value;
    value["temperature"] = space.temperature_values;
    value["top_p"] = space.top_p_values;
    value["top_k"] = space.top_k_values;
    value["repetition_penalty"] = space.repetition_penalty_values;
    return value.dump();
}

HyperparamConfig load_config_file(const std::filesystem::path& path) {
    const json value = load_json_file(path);
    if (!value.is_object()) {
        throw DataError(path.string() + ": config file must be a JSON object");
    }
    HyperparamConfig config;
    try {
        config.temperature = value.at("temperature").get<double>();
        config.top_p = value.at("top_p").get<double>();
        config.top_k = value.at("top_k").get<int>();
        config.repetition_penalty = value.at("repetition_penalty").get<double>();
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    validate_config(config);
    return config;
}

} // namespace hag
