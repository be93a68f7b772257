#include "hag/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "hag/error.hpp"

namespace hag {

bool config_in_bounds(const HyperparamConfig& c) {
    return std::isfinite(c.temperature) && c.temperature >= HyperparamConfig::kTemperatureMin &&
           c.temperature <= HyperparamConfig::kTemperatureMax && std::isfinite(c.top_p) &&
           c.top_p > 0.0 && c.top_p <= HyperparamConfig::kTopPMax &&
           c.top_k >= HyperparamConfig::kTopKMin && c.top_k <= HyperparamConfig::kTopKMax &&
           std::isfinite(c.repetition_penalty) &&
           c.repetition_penalty >= HyperparamConfig::kRepetitionPenaltyMin &&
           c.repetition_penalty <= HyperparamConfig::kRepetitionPenaltyMax;
}

void validate_config(const HyperparamConfig& c) {
    if (!config_in_bounds(c)) {
        throw ValidationError("hyperparameter config out of bounds: temperature=" +
                              std::to_string(c.temperature) + " top_p=" + std::to_string(c.top_p) +
                              " top_k=" + std::to_string(c.top_k) +
                              " repetition_penalty=" + std::to_string(c.repetition_penalty));
    }
}

HyperparamConfig clamp_config(const HyperparamConfig& c) {
    HyperparamConfig out = c;
    out.temperature = std::clamp(c.temperature, HyperparamConfig::kTemperatureMin,
                                 HyperparamConfig::kTemperatureMax);
    out.top_p = std::clamp(c.top_p, HyperparamConfig::kTopPMin, HyperparamConfig::kTopPMax);
    out.top_k = std::clamp(c.top_k, HyperparamConfig::kTopKMin, HyperparamConfig::kTopKMax);
    out.repetition_penalty = std::clamp(c.repetition_penalty,
                                        HyperparamConfig::kRepetitionPenaltyMin,
                                        HyperparamConfig::kRepetitionPenaltyMax);
    return out;
}

void validate_logits(const LogitVector& logits) {
    if (logits.scores.empty()) {
        throw ValidationError("empty logit vector");
    }
    for (double s : logits.scores) {
        if (!std::isfinite(s)) {
            throw ValidationError("logit vector contains a non-finite score");
        }
    }
}

bool probs_valid(const ProbVector& probs, double tolerance) {
    if (probs.probs.empty()) {
        return false;
    }
    double sum = 0.0;
    bool any_positive = false;
    for (double p : probs.probs) {
        if (!(p >= 0.0) || p > 1.0 + tolerance) {
            return false;
        }
        any_positive = any_positive || p > 0.0;
        sum += p;
    }
    return any_positive && std::abs(sum - 1.0) <= tolerance;
}

LogitVector apply_temperature(const LogitVector& logits, double temperature) {
    if (!std::isfinite(temperature) || temperature <= 0.0) {
        throw ValidationError("temperature must be positive and finite");
    }
    LogitVector out = logits;
    for (double& s : out.scores) {
        s /= temperature;
    }
    return out;
}

LogitVector apply_repetition_penalty(const LogitVector& logits,
                                     std::span<const TokenId> generated_context,
                                     double penalty) {
    if (!std::isfinite(penalty) || penalty < 1.0) {
        throw ValidationError("repetition penalty must be >= 1.0");
    }
    LogitVector out = logits;
    std::unordered_set<TokenId> seen(generated_context.begin(), generated_context.end());
    for (TokenId id : seen) {
        if (id < 0 || static_cast<std::size_t>(id) >= out.scores.size()) {
            continue;
        }
        double& s = out.scores[static_cast<std::size_t>(id)];
        if (s > 0.0) {
            s /= penalty;
        } else if (s < 0.0) {
            s *= penalty;
        }
    }
    return out;
}

LogitVector apply_top_k(const LogitVector& logits, int k) {
    if (k < 1) {
        throw ValidationError("top_k must be >= 1");
    }
    const std::size_t vocab = logits.scores.size();
    if (static_cast<std::size_t>(k) >= vocab) {
        return logits;
    }
    std::vector<std::size_t> order(vocab);
    std::iota(order.begin(), order.end(), 0);
    auto better = [&](std::size_t a, std::size_t b) {
        if (logits.scores[a] != logits.scores[b]) {
            return logits.scores[a] > logits.scores[b];
        }
        return a < b; // cutoff ties keep the lower token id
    };
    std::nth_element(order.begin(), order.begin() + k, order.end(), better);
    LogitVector out;
    out.scores.assign(vocab, kMaskedLogit);
    for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
        out.scores[order[i]] = logits.scores[order[i]];
    }
    return out;
}

ProbVector softmax(const LogitVector& logits) {
    if (logits.scores.empty()) {
        throw ValidationError("softmax of an empty logit vector");
    }
    double max_score = kMaskedLogit;
    for (double s : logits.scores) {
        max_score = std::max(max_score, s);
    }
    if (!std::isfinite(max_score)) {
        throw ValidationError("degenerate distribution: every token is masked");
    }
    ProbVector out;
    out.probs.resize(logits.scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.scores.size(); ++i) {
        out.probs[i] = std::exp(logits.scores[i] - max_score);
        sum += out.probs[i];
    }
    for (double& p : out.probs) {
        p /= sum;
    }
    return out;
}

ProbVector apply_top_p(const ProbVector& probs, double p) {
    if (!std::isfinite(p) || p <= 0.0 || p > 1.0) {
        throw ValidationError("top_p must be in (0, 1]");
    }
    const std::size_t vocab = probs.probs.size();
    if (vocab == 0) {
        throw ValidationError("top_p of an empty distribution");
    }
    std::vector<std::size_t> order(vocab);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (probs.probs[a] != probs.probs[b]) {
            return probs.probs[a] > probs.probs[b];
        }
        return a < b;
    });
    double cumulative = 0.0;
    std::size_t cutoff = vocab;
    for (std::size_t i = 0; i < vocab; ++i) {
        cumulative += probs.probs[order[i]];
        if (cumulative >= p) {
            cutoff = i + 1;
            break;
        }
    }
    double dropped = 0.0;
    for (std::size_t i = cutoff; i < vocab; ++i) {
        dropped += probs.probs[order[i]];
    }
    if (dropped == 0.0) {
        return probs; // nothing with mass was removed; keep the input bit-exact
    }
    ProbVector out;
    out.probs.assign(vocab, 0.0);
    double kept = 0.0;
    for (std::size_t i = 0; i < cutoff; ++i) {
        kept += probs.probs[order[i]];
    }
    for (std::size_t i = 0; i < cutoff; ++i) {
        out.probs[order[i]] = probs.probs[order[i]] / kept;
    }
    return out;
}

TokenId sample_token(const ProbVector& probs, Rng& rng) {
    double total = 0.0;
    for (double p : probs.probs) {
        if (!(p >= 0.0)) {
            throw ValidationError("negative probability in sample_token");
        }
        total += p;
    }
    if (total <= 0.0) {
        throw ValidationError("degenerate distribution: no token has positive probability");
    }
    const double u = canonical_unit(rng) * total;
    double cumulative = 0.0;
    TokenId last_positive = -1;
    for (std::size_t i = 0; i < probs.probs.size(); ++i) {
        if (probs.probs[i] <= 0.0) {
            continue;
        }
        last_positive = static_cast<TokenId>(i);
        cumulative += probs.probs[i];
        if (u < cumulative) {
            return last_positive;
        }
    }
    return last_positive; // u landed in the rounding tail
}

ProbVector transform_pipeline(const LogitVector& logits,
                              std::span<const TokenId> generated_context,
                              const HyperparamConfig& config) {
    validate_logits(logits);
    validate_config(config);
    LogitVector step = apply_repetition_penalty(logits, generated_context,
                                                config.repetition_penalty);
    step = apply_temperature(step, config.temperature);
    step = apply_top_k(step, config.top_k);
    return apply_top_p(softmax(step), config.top_p);
}

} // namespace hag
