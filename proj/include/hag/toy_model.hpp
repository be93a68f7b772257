#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "hag/backend.hpp"
#include "hag/config_space.hpp"
#include "hag/decoding.hpp"

namespace hag {

// Character-level n-gram model: a desk-scale stand-in for a real generator.
// `order` is the number of conditioning characters; additive smoothing keeps
// every next-char logit finite over the whole vocabulary.
struct ToyModel {
    int order = 3;
    std::string vocabulary; // sorted distinct corpus characters
    std::map<std::string, std::map<char, int>> counts; // context -> next-char counts
    double smoothing_alpha = 0.05;

    // Full-vocabulary logits for the last min(order, |context|) characters.
    LogitVector next_logits(std::string_view context) const;

    TokenId token_of(char c) const; // -1 when the char is not in vocabulary
};

ToyModel toy_train(const std::string& corpus, int order, double smoothing_alpha = 0.05);

// Versioned JSON; identical models serialize to identical bytes.
std::string toy_model_to_json(const ToyModel& model);
ToyModel toy_model_from_json(const std::string& text);
void save_toy_model(const ToyModel& model, const std::filesystem::path& path);
ToyModel load_toy_model(const std::filesystem::path& path);

// Autoregressive sampling through the decoding transform pipeline. The
// repetition-penalty context is the generated suffix, not the prompt.
GenerationResult toy_generate(const ToyModel& model, const GenerationRequest& request);

class ToyBackend final : public GenerationBackend {
public:
    explicit ToyBackend(ToyModel model, HyperparamConfig default_config = kDefaultConfig)
        : model_(std::move(model)), default_config_(default_config) {}

    GenerationResult generate(const GenerationRequest& request) override {
        return toy_generate(model_, request);
    }
    std::string id() const override { return "toy"; }
    HyperparamConfig default_config() const override { return default_config_; }

    const ToyModel& model() const { return model_; }

private:
    ToyModel model_;
    HyperparamConfig default_config_;
};

} // namespace hag
