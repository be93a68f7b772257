#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "hag/rng.hpp"

namespace hag {

using TokenId = std::int32_t;

// Sentinel for filtered-out tokens: exp(-inf) is exactly 0, so masked entries
// carry zero probability after normalization.
inline constexpr double kMaskedLogit = -std::numeric_limits<double>::infinity();

// Per-token scores from a model. Raw logits must be finite; kMaskedLogit only
// appears in the outputs of filtering transforms.
struct LogitVector {
    std::vector<double> scores;

    std::size_t vocab_size() const { return scores.size(); }
};

// Distribution over token ids: entries in [0,1], sum 1 within 1e-9,
// non-empty support.
struct ProbVector {
    std::vector<double> probs;

    std::size_t vocab_size() const { return probs.size(); }
};

// One point in the decoding space. Field order matters: the defaulted
// comparison is the lexicographic tie-break order used everywhere.
struct HyperparamConfig {
    double temperature = 0.6;
    double top_p = 0.9;
    int top_k = 50;
    double repetition_penalty = 1.0;

    static constexpr double kTemperatureMin = 0.1; // grid minimum; T->0 is not a legal config
    static constexpr double kTemperatureMax = 2.0;
    static constexpr double kTopPMin = 0.1; // clamp floor; validation accepts any value in (0, 1]
    static constexpr double kTopPMax = 1.0;
    static constexpr int kTopKMin = 1;
    static constexpr int kTopKMax = 100;
    static constexpr double kRepetitionPenaltyMin = 1.0;
    static constexpr double kRepetitionPenaltyMax = 1.5;

    auto operator<=>(const HyperparamConfig&) const = default;
};

bool config_in_bounds(const HyperparamConfig& config);
void validate_config(const HyperparamConfig& config); // throws ValidationError
// Pulls each field into its legal range. Fields must be finite.
HyperparamConfig clamp_config(const HyperparamConfig& config);

void validate_logits(const LogitVector& logits); // finite everywhere
bool probs_valid(const ProbVector& probs, double tolerance = 1e-9);

// Divides every score by temperature. Temperature must be positive and finite.
LogitVector apply_temperature(const LogitVector& logits, double temperature);

// Discounts tokens already present in generated_context: positive logits are
// divided by the penalty, negative ones multiplied. Each seen token is
// penalized once; unseen tokens are untouched.
LogitVector apply_repetition_penalty(const LogitVector& logits,
                                     std::span<const TokenId> generated_context,
                                     double penalty);

// Masks all but the k highest-scoring tokens. Ties at the cutoff keep the
// lower token id. k >= vocab_size is the identity.
LogitVector apply_top_k(const LogitVector& logits, int k);

ProbVector softmax(const LogitVector& logits);

// Keeps the minimal prefix of tokens, in descending-probability order (ties
// by lower id), whose cumulative mass reaches p, renormalized to sum 1.
ProbVector apply_top_p(const ProbVector& probs, double p);

TokenId sample_token(const ProbVector& probs, Rng& rng);

// repetition_penalty -> temperature -> top_k -> softmax -> top_p.
// The all-identity config {T=1, p=1, k>=vocab, rp=1} reduces to plain softmax.
ProbVector transform_pipeline(const LogitVector& logits,
                              std::span<const TokenId> generated_context,
                              const HyperparamConfig& config);

} // namespace hag
