#pragma once

#include <filesystem>
#include <optional>
#include <semaphore>
#include <string>

#include "hag/backend.hpp"
#include "hag/decoding.hpp"

namespace hag {

// Where and how to reach a chat-completion endpoint. The auth token is read
// from the named environment variable, never from files or flags.
struct EndpointSpec {
    std::string base_url;                  // e.g. http://127.0.0.1:8080
    std::string path = "/v1/chat/completions";
    std::string auth_env;                  // env var holding the bearer token
    std::string model;
    int timeout_seconds = 60;
    int max_parallel = 4;
    std::optional<HyperparamConfig> defaults; // from the backend defaults file
};

EndpointSpec load_endpoint_spec(const std::filesystem::path& path);

// One chat-completion call per request. temperature/top_p ride the standard
// fields; top_k and repetition_penalty go out as extension fields and are
// dropped (with a warning) when the endpoint rejects them by name. Transient
// failures retry with bounded exponential backoff; at most max_parallel
// requests are in flight at once regardless of caller concurrency.
class RemoteBackend final : public GenerationBackend {
public:
    explicit RemoteBackend(EndpointSpec spec, int max_attempts = 3, int backoff_ms = 250);

    GenerationResult generate(const GenerationRequest& request) override;
    std::string id() const override;
    // Requires a defaults file entry; remote endpoints do not expose one.
    HyperparamConfig default_config() const override;

    const EndpointSpec& spec() const { return spec_; }

    static constexpr int kMaxParallelCap = 256;

private:
    EndpointSpec spec_;
    int max_attempts_;
    int backoff_ms_;
    std::counting_semaphore<kMaxParallelCap> in_flight_;
};

} // namespace hag
