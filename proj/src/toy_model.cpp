#include "hag/toy_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hag/error.hpp"

namespace hag {

using nlohmann::json;

LogitVector ToyModel::next_logits(std::string_view context) const {
    const std::size_t keep = std::min<std::size_t>(context.size(), static_cast<std::size_t>(order));
    const std::string key(context.substr(context.size() - keep));
    const auto row = counts.find(key);
    LogitVector logits;
    logits.scores.resize(vocabulary.size());
    for (std::size_t i = 0; i < vocabulary.size(); ++i) {
        int count = 0;
        if (row != counts.end()) {
            const auto it = row->second.find(vocabulary[i]);
            if (it != row->second.end()) {
                count = it->second;
            }
        }
        logits.scores[i] = std::log(count + smoothing_alpha);
    }
    return logits;
}

TokenId ToyModel::token_of(char c) const {
    const auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), c);
    if (it == vocabulary.end() || *it != c) {
        return -1;
    }
    return static_cast<TokenId>(it - vocabulary.begin());
}

ToyModel toy_train(const std::string& corpus, int order, double smoothing_alpha) {
    if (corpus.empty()) {
        throw DataError("toy_train needs a non-empty corpus");
    }
    if (order < 1 || order > 5) {
        throw ValidationError("toy model order must be in [1, 5]");
    }
    if (!(smoothing_alpha > 0.0) || !std::isfinite(smoothing_alpha)) {
        throw ValidationError("smoothing_alpha must be positive");
    }
    ToyModel model;
    model.order = order;
    model.smoothing_alpha = smoothing_alpha;
    const std::set<char> distinct(corpus.begin(), corpus.end());
    model.vocabulary.assign(distinct.begin(), distinct.end());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const std::size_t start = i >= static_cast<std::size_t>(order) ? i - order : 0;
        const std::string context = corpus.substr(start, i - start);
        ++model.counts[context][corpus[i]];
    }
    return model;
}

std::string toy_model_to_json(const ToyModel& model) {
    json value;
    value["format_version"] = 1;
    value["order"] = model.order;
    value["smoothing_alpha"] = model.smoothing_alpha;
    value["vocabulary"] = model.vocabulary;
    json counts = json::object();
    for (const auto& [context, row] : model.counts) {
        json row_json = json::object();
        for (const auto& [next, count] : row) {
            row_json[std::string(1, next)] = count;
        }
        counts[context] = row_json;
    }
    value["counts"] = counts;
    return value.dump();
}

ToyModel toy_model_from_json(const std::string& text) {
    const json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded() || !value.is_object()) {
        throw DataError("invalid toy model JSON");
    }
    try {
        if (value.at("format_version").get<int>() != 1) {
            throw DataError("unsupported toy model format version");
        }
        ToyModel model;
        model.order = value.at("order").get<int>();
        model.smoothing_alpha = value.at("smoothing_alpha").get<double>();
        model.vocabulary = value.at("vocabulary").get<std::string>();
        for (const auto& [context, row] : value.at("counts").items()) {
            for (const auto& [next, count] : row.items()) {
                if (next.size() != 1) {
                    throw DataError("toy model count key must be a single character");
                }
                model.counts[context][next[0]] = count.get<int>();
            }
        }
        return model;
    } catch (const json::exception& e) {
        throw DataError(std::string("toy model JSON: ") + e.what());
    }
}

void save_toy_model(const ToyModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write toy model to " + path.string());
    }
    out << toy_model_to_json(model) << '\n';
}

ToyModel load_toy_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open toy model " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return toy_model_from_json(buffer.str());
}

GenerationResult toy_generate(const ToyModel& model, const GenerationRequest& request) {
    validate_request(request);
    if (model.vocabulary.empty()) {
        throw DataError("toy model has an empty vocabulary");
    }
    Rng rng(request.seed);
    std::string window = request.prompt_text; // conditioning text
    std::string generated;
    std::vector<TokenId> generated_ids;
    GenerationResult result;
    result.backend_id = "toy";
    result.config_echo = request.config;

    for (int step = 0; step < request.max_new_tokens; ++step) {
        const LogitVector logits = model.next_logits(window);
        const ProbVector probs = transform_pipeline(logits, generated_ids, request.config);
        const TokenId token = sample_token(probs, rng);
        const char c = model.vocabulary[static_cast<std::size_t>(token)];
        generated += c;
        generated_ids.push_back(token);
        window += c;

        bool stopped = false;
        for (const auto& stop : request.stop_sequences) {
            if (!stop.empty() && generated.size() >= stop.size() &&
                generated.compare(generated.size() - stop.size(), stop.size(), stop) == 0) {
                generated.erase(generated.size() - stop.size());
                stopped = true;
                break;
            }
        }
        if (stopped) {
            break;
        }
    }
    result.text = generated;
    result.token_count = static_cast<int>(generated.size());
    return result;
}

} // namespace hag
