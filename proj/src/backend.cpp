#include "hag/backend.hpp"

#include <atomic>
#include <exception>
#include <thread>

#include "hag/error.hpp"

namespace hag {

void validate_request(const GenerationRequest& request) {
    if (request.prompt_text.empty()) {
        throw ValidationError("generation request with empty prompt");
    }
    if (request.max_new_tokens < 1) {
        throw ValidationError("max_new_tokens must be >= 1");
    }
    validate_config(request.config);
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> script,
                                 HyperparamConfig default_config)
    : script_(std::move(script)), default_config_(default_config) {
    if (script_.empty()) {
        throw ValidationError("scripted backend needs a non-empty script");
    }
}

GenerationResult ScriptedBackend::generate(const GenerationRequest& request) {
    validate_request(request);
    std::lock_guard<std::mutex> lock(mutex_);
    if (cursor_ >= script_.size()) {
        throw ScriptExhausted("scripted backend exhausted after " +
                              std::to_string(script_.size()) + " responses");
    }
    requests_.push_back(request);
    GenerationResult result;
    result.text = script_[cursor_++];
    result.token_count = static_cast<int>(result.text.size());
    result.backend_id = id();
    result.config_echo = request.config;
    return result;
}

std::size_t ScriptedBackend::remaining() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return script_.size() - cursor_;
}

GenerationResult CallbackBackend::generate(const GenerationRequest& request) {
    validate_request(request);
    GenerationResult result;
    result.text = responder_(request);
    result.token_count = static_cast<int>(result.text.size());
    result.backend_id = id_;
    result.config_echo = request.config;
    return result;
}

void parallel_for(std::size_t count, int parallelism,
                  const std::function<void(std::size_t)>& fn) {
    if (count == 0) {
        return;
    }
    const std::size_t workers =
        std::min<std::size_t>(count, static_cast<std::size_t>(std::max(parallelism, 1)));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) {
                    return;
                }
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace hag
