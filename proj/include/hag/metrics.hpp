#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hag {

// Sentence BLEU with a fixed recipe: lowercase alphanumeric-run tokens
// (whitespace and punctuation are boundaries), modified n-gram precisions
// clipped against the best reference, add-one smoothing when an order >= 2
// has zero matches, brevity penalty against the closest reference length.
// Report metadata records the recipe so scores stay interpretable.
struct BleuOptions {
    int max_ngram_order = 4; // in [1, 4]
};

std::vector<std::string> bleu_tokenize(std::string_view text);

// In [0, 1]. Empty candidate scores 0; an empty reference list is an error.
double bleu(const std::string& candidate, const std::vector<std::string>& references,
            const BleuOptions& options = {});

// Mean leave-one-out BLEU: each sample scored against all the others.
// Lower means more diverse output. Needs at least two samples.
double self_bleu(const std::vector<std::string>& samples, const BleuOptions& options = {});

struct MeanVar {
    double mean = 0.0;
    double variance = 0.0; // population variance
};

MeanVar mean_and_variance(std::span<const double> values);

} // namespace hag
