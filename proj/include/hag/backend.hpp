#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "hag/decoding.hpp"

namespace hag {

// One generation call: y = M(prompt; config).
struct GenerationRequest {
    std::string prompt_text;
    HyperparamConfig config;
    int max_new_tokens = 96;
    std::uint64_t seed = 0;
    std::vector<std::string> stop_sequences;
};

void validate_request(const GenerationRequest& request); // throws ValidationError

struct GenerationResult {
    std::string text;
    int token_count = 0;
    std::string backend_id;
    HyperparamConfig config_echo; // the config that was actually applied
    std::vector<std::string> warnings;
};

class GenerationBackend {
public:
    virtual ~GenerationBackend() = default;

    virtual GenerationResult generate(const GenerationRequest& request) = 0;
    virtual std::string id() const = 0;
    virtual HyperparamConfig default_config() const = 0;
};

// Replays a fixed response list in order and records every request.
class ScriptedBackend final : public GenerationBackend {
public:
    explicit ScriptedBackend(std::vector<std::string> script,
                             HyperparamConfig default_config = kScriptedDefault);

    GenerationResult generate(const GenerationRequest& request) override;
    std::string id() const override { return "scripted"; }
    HyperparamConfig default_config() const override { return default_config_; }

    const std::vector<GenerationRequest>& requests() const { return requests_; }
    std::size_t remaining() const;

    static constexpr HyperparamConfig kScriptedDefault{0.6, 0.9, 50, 1.0};

private:
    std::vector<std::string> script_;
    std::vector<GenerationRequest> requests_;
    std::size_t cursor_ = 0;
    HyperparamConfig default_config_;
    mutable std::mutex mutex_;
};

// Deterministic double whose output is a pure function of the request; used
// for oracle stages and search fixtures where call order must not matter.
class CallbackBackend final : public GenerationBackend {
public:
    using Responder = std::function<std::string(const GenerationRequest&)>;

    explicit CallbackBackend(Responder responder, std::string id = "callback",
                             HyperparamConfig default_config = ScriptedBackend::kScriptedDefault)
        : responder_(std::move(responder)), id_(std::move(id)),
          default_config_(default_config) {}

    GenerationResult generate(const GenerationRequest& request) override;
    std::string id() const override { return id_; }
    HyperparamConfig default_config() const override { return default_config_; }

private:
    Responder responder_;
    std::string id_;
    HyperparamConfig default_config_;
};

// Runs fn(0..count) with at most `parallelism` workers. Results must be
// written into per-index slots by the caller so schedules cannot reorder
// anything observable.
void parallel_for(std::size_t count, int parallelism,
                  const std::function<void(std::size_t)>& fn);

} // namespace hag
