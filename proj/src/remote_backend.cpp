#include "hag/remote_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "hag/error.hpp"

namespace hag {

using nlohmann::json;

EndpointSpec load_endpoint_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open endpoint spec " + path.string());
    }
    const json value = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded() || !value.is_object()) {
        throw ConfigError("invalid JSON in endpoint spec " + path.string());
    }
    EndpointSpec spec;
    try {
        spec.base_url = value.at("base_url").get<std::string>();
        spec.model = value.at("model").get<std::string>();
        if (value.contains("path")) spec.path = value.at("path").get<std::string>();
        if (value.contains("auth_env")) spec.auth_env = value.at("auth_env").get<std::string>();
        if (value.contains("timeout_seconds")) {
            spec.timeout_seconds = value.at("timeout_seconds").get<int>();
        }
        if (value.contains("max_parallel")) {
            spec.max_parallel = value.at("max_parallel").get<int>();
        }
        if (value.contains("defaults")) {
            const json& d = value.at("defaults");
            HyperparamConfig config{d.at("temperature").get<double>(),
                                    d.at("top_p").get<double>(), d.at("top_k").get<int>(),
                                    d.at("repetition_penalty").get<double>()};
            validate_config(config);
            spec.defaults = config;
        }
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (spec.base_url.empty() || spec.model.empty()) {
        throw ConfigError(path.string() + ": base_url and model are required");
    }
    return spec;
}

RemoteBackend::RemoteBackend(EndpointSpec spec, int max_attempts, int backoff_ms)
    : spec_(std::move(spec)), max_attempts_(std::max(1, max_attempts)),
      backoff_ms_(std::max(0, backoff_ms)),
      in_flight_(std::clamp(spec_.max_parallel, 1, kMaxParallelCap)) {}

std::string RemoteBackend::id() const {
    return "remote:" + spec_.model;
}

HyperparamConfig RemoteBackend::default_config() const {
    if (!spec_.defaults) {
        throw ConfigError("remote backend '" + spec_.model +
                          "' has no defaults file entry; add a \"defaults\" object to the "
                          "endpoint spec");
    }
    return *spec_.defaults;
}

namespace {

const char* const kDroppableFields[] = {"top_k", "repetition_penalty", "seed", "stop"};

std::string body_excerpt(const std::string& body) {
    constexpr std::size_t kLimit = 200;
    if (body.size() <= kLimit) {
        return body;
    }
    return body.substr(0, kLimit) + "...";
}

bool transient_status(int status) {
    return status >= 500 || status == 408 || status == 429;
}

} // namespace

GenerationResult RemoteBackend::generate(const GenerationRequest& request) {
    validate_request(request);

    json payload;
    payload["model"] = spec_.model;
    payload["messages"] = json::array({json{{"role", "user"}, {"content", request.prompt_text}}});
    payload["max_tokens"] = request.max_new_tokens;
    payload["temperature"] = request.config.temperature;
    payload["top_p"] = request.config.top_p;
    payload["top_k"] = request.config.top_k;
    payload["repetition_penalty"] = request.config.repetition_penalty;
    payload["seed"] = request.seed;
    if (!request.stop_sequences.empty()) {
        payload["stop"] = request.stop_sequences;
    }

    GenerationResult result;
    result.backend_id = id();
    result.config_echo = request.config;

    httplib::Headers headers;
    if (!spec_.auth_env.empty()) {
        if (const char* token = std::getenv(spec_.auth_env.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
    }

    int attempts = 0;
    std::string last_failure;
    while (attempts < max_attempts_) {
        httplib::Client client(spec_.base_url);
        client.set_connection_timeout(spec_.timeout_seconds, 0);
        client.set_read_timeout(spec_.timeout_seconds, 0);

        in_flight_.acquire();
        const auto response = client.Post(spec_.path, headers, payload.dump(), "application/json");
        in_flight_.release();
        if (!response) {
            ++attempts;
            last_failure = "connection failed: " + httplib::to_string(response.error());
            if (attempts < max_attempts_) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(backoff_ms_ << (attempts - 1)));
            }
            continue;
        }
        if (response->status >= 200 && response->status < 300) {
            const json body = json::parse(response->body, nullptr, /*allow_exceptions=*/false);
            if (body.is_discarded()) {
                throw RemoteError("endpoint returned unparsable JSON: " +
                                  body_excerpt(response->body));
            }
            try {
                const json& choice = body.at("choices").at(0);
                if (choice.contains("message")) {
                    result.text = choice.at("message").at("content").get<std::string>();
                } else {
                    result.text = choice.at("text").get<std::string>();
                }
            } catch (const json::exception& e) {
                throw RemoteError(std::string("unexpected response shape: ") + e.what() + ": " +
                                  body_excerpt(response->body));
            }
            if (body.contains("usage") && body["usage"].contains("completion_tokens")) {
                result.token_count = body["usage"]["completion_tokens"].get<int>();
            } else {
                result.token_count = static_cast<int>(result.text.size());
            }
            return result;
        }
        if (transient_status(response->status)) {
            ++attempts;
            last_failure = "status " + std::to_string(response->status) + ": " +
                           body_excerpt(response->body);
            if (attempts < max_attempts_) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(backoff_ms_ << (attempts - 1)));
            }
            continue;
        }
        // a 4xx naming an extension field means the endpoint rejects it:
        // drop the field, record the degradation, and try again
        bool dropped = false;
        for (const char* field : kDroppableFields) {
            if (payload.contains(field) && response->body.find(field) != std::string::npos) {
                payload.erase(field);
                result.warnings.push_back(std::string(field) + " unsupported by endpoint");
                dropped = true;
            }
        }
        if (dropped) {
            continue;
        }
        throw RemoteError("endpoint returned status " + std::to_string(response->status) + ": " +
                          body_excerpt(response->body));
    }
    throw TransportError("remote generation failed after " + std::to_string(max_attempts_) +
                         " attempts; last: " + last_failure);
}

} // namespace hag
