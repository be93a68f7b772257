#include "hag/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "hag/error.hpp"

namespace hag {

std::vector<std::string> bleu_tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        const unsigned char uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc)) {
            current += static_cast<char>(std::tolower(uc));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

namespace {

// n-grams keyed by tokens joined with an unprintable separator
std::unordered_map<std::string, int> ngram_counts(const std::vector<std::string>& tokens, int n) {
    std::unordered_map<std::string, int> counts;
    if (static_cast<int>(tokens.size()) < n) {
        return counts;
    }
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (int j = 1; j < n; ++j) {
            key += '\x1f';
            key += tokens[i + j];
        }
        ++counts[key];
    }
    return counts;
}

} // namespace

double bleu(const std::string& candidate, const std::vector<std::string>& references,
            const BleuOptions& options) {
    if (references.empty()) {
        throw ValidationError("bleu needs at least one reference");
    }
    if (options.max_ngram_order < 1 || options.max_ngram_order > 4) {
        throw ValidationError("bleu max_ngram_order must be in [1, 4]");
    }
    const std::vector<std::string> cand = bleu_tokenize(candidate);
    if (cand.empty()) {
        return 0.0;
    }
    std::vector<std::vector<std::string>> refs;
    refs.reserve(references.size());
    for (const std::string& r : references) {
        refs.push_back(bleu_tokenize(r));
    }

    double log_sum = 0.0;
    for (int n = 1; n <= options.max_ngram_order; ++n) {
        const auto cand_counts = ngram_counts(cand, n);
        std::unordered_map<std::string, int> clipped;
        for (const auto& ref : refs) {
            for (const auto& [gram, count] : ngram_counts(ref, n)) {
                auto& best = clipped[gram];
                best = std::max(best, count);
            }
        }
        long long total = 0;
        long long matches = 0;
        for (const auto& [gram, count] : cand_counts) {
            total += count;
            auto it = clipped.find(gram);
            if (it != clipped.end()) {
                matches += std::min(count, it->second);
            }
        }
        double precision;
        if (matches == 0 && n >= 2) {
            precision = static_cast<double>(matches + 1) / static_cast<double>(total + 1);
        } else if (total == 0) {
            precision = 0.0;
        } else {
            precision = static_cast<double>(matches) / static_cast<double>(total);
        }
        if (precision == 0.0) {
            return 0.0;
        }
        log_sum += std::log(precision) / options.max_ngram_order;
    }

    // closest reference length; ties pick the shorter one
    const long long c = static_cast<long long>(cand.size());
    long long r = static_cast<long long>(refs.front().size());
    for (const auto& ref : refs) {
        const long long len = static_cast<long long>(ref.size());
        if (std::llabs(len - c) < std::llabs(r - c) || (std::llabs(len - c) == std::llabs(r - c) && len < r)) {
            r = len;
        }
    }
    const double brevity =
        c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
    return brevity * std::exp(log_sum);
}

double self_bleu(const std::vector<std::string>& samples, const BleuOptions& options) {
    if (samples.size() < 2) {
        throw ValidationError("self_bleu needs at least two samples");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::vector<std::string> others;
        others.reserve(samples.size() - 1);
        for (std::size_t j = 0; j < samples.size(); ++j) {
            if (j != i) {
                others.push_back(samples[j]);
            }
        }
        sum += bleu(samples[i], others, options);
    }
    return sum / static_cast<double>(samples.size());
}

MeanVar mean_and_variance(std::span<const double> values) {
    if (values.empty()) {
        throw ValidationError("mean_and_variance of an empty list");
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    const double mean = sum / static_cast<double>(values.size());
    double squares = 0.0;
    for (double v : values) {
        squares += (v - mean) * (v - mean);
    }
    return {mean, squares / static_cast<double>(values.size())};
}

} // namespace hag
