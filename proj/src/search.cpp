#include "hag/search.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "hag/error.hpp"

namespace hag {

using nlohmann::json;

std::uint64_t config_seed_key(const HyperparamConfig& config) {
    std::uint64_t h = std::bit_cast<std::uint64_t>(config.temperature);
    h = hash_combine(h, std::bit_cast<std::uint64_t>(config.top_p));
    h = hash_combine(h, static_cast<std::uint64_t>(config.top_k));
    h = hash_combine(h, std::bit_cast<std::uint64_t>(config.repetition_penalty));
    return h;
}

std::uint64_t sample_seed(std::uint64_t base_seed, const std::string& instance_id,
                          const HyperparamConfig& config, int sample_index) {
    const std::uint64_t derived =
        hash_combine(hash_combine(mix64(base_seed), fnv1a(instance_id)), config_seed_key(config));
    return derived + static_cast<std::uint64_t>(sample_index);
}

json score_record_to_json(const ScoreRecord& record) {
    return json{{"instance_id", record.instance_id},
                {"config", config_to_json(record.config)},
                {"sample_scores", record.sample_scores},
                {"mean_score", record.mean_score}};
}

ScoreRecord score_record_from_json(const json& value) {
    try {
        ScoreRecord record;
        record.instance_id = value.at("instance_id").get<std::string>();
        record.config = config_from_json(value.at("config"));
        record.sample_scores = value.at("sample_scores").get<std::vector<double>>();
        record.mean_score = value.at("mean_score").get<double>();
        return record;
    } catch (const json::exception& e) {
        throw DataError(std::string("score record: ") + e.what());
    }
}

std::string ScoreCache::key(const std::string& instance_id, const HyperparamConfig& config) {
    return instance_id + '|' + render_config_text(config);
}

void ScoreCache::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        return;
    }
    std::lock_guard<std::mutex> lock(mutex_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const json value = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (value.is_discarded()) {
            continue; // a torn tail line from an interrupted run
        }
        ScoreRecord record = score_record_from_json(value);
        records_[key(record.instance_id, record.config)] = std::move(record);
    }
}

void ScoreCache::open_append(const std::filesystem::path& path) {
    std::lock_guard<std::mutex> lock(mutex_);
    append_.open(path, std::ios::app);
    if (!append_) {
        throw DataError("cannot open checkpoint " + path.string());
    }
}

void ScoreCache::close() {
    std::lock_guard<std::mutex> lock(mutex_);
    if (append_.is_open()) {
        append_.close();
    }
}

void ScoreCache::rewrite_sorted(const std::filesystem::path& path) const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw DataError("cannot rewrite checkpoint " + path.string());
    }
    for (const auto& [k, record] : records_) {
        out << score_record_to_json(record).dump() << '\n';
    }
}

std::optional<ScoreRecord> ScoreCache::find(const std::string& instance_id,
                                            const HyperparamConfig& config) const {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = records_.find(key(instance_id, config));
    if (it == records_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void ScoreCache::put(const ScoreRecord& record) {
    std::lock_guard<std::mutex> lock(mutex_);
    records_[key(record.instance_id, record.config)] = record;
    if (append_.is_open()) {
        append_ << score_record_to_json(record).dump() << '\n';
        append_.flush();
    }
}

std::size_t ScoreCache::size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return records_.size();
}

Evaluator::Evaluator(GenerationBackend& backend, ScoringContext scoring,
                     SamplingProtocol protocol, ScoreCache* cache,
                     PromptRenderer prompt_renderer)
    : backend_(backend), scoring_(scoring), protocol_(std::move(protocol)), cache_(cache),
      prompt_renderer_(std::move(prompt_renderer)) {
    if (protocol_.samples_per_config < 1) {
        throw ValidationError("samples_per_config must be >= 1");
    }
}

ScoreRecord Evaluator::evaluate(const TaskInstance& instance, const HyperparamConfig& config) {
    if (cache_) {
        if (auto cached = cache_->find(instance.instance_id, config)) {
            return *cached;
        }
    }
    ScoreRecord record;
    record.instance_id = instance.instance_id;
    record.config = config;
    record.sample_scores.resize(static_cast<std::size_t>(protocol_.samples_per_config));
    const double scale = metric_scale(instance.task_kind);
    GenerationRequest request;
    request.prompt_text =
        prompt_renderer_ ? prompt_renderer_(instance) : instance.input_text;
    request.config = config;
    request.max_new_tokens = protocol_.max_new_tokens;
    request.stop_sequences = protocol_.stop_sequences;
    for (int i = 0; i < protocol_.samples_per_config; ++i) {
        request.seed = sample_seed(protocol_.base_seed, instance.instance_id, config, i);
        const GenerationResult generation = backend_.generate(request);
        record.sample_scores[static_cast<std::size_t>(i)] =
            score_response(instance, generation.text, scoring_).value * scale;
    }
    double sum = 0.0;
    for (double s : record.sample_scores) {
        sum += s;
    }
    record.mean_score = sum / static_cast<double>(record.sample_scores.size());
    if (cache_) {
        cache_->put(record);
    }
    return record;
}

SearchPlan load_plan_file(const std::filesystem::path& path, TaskKind task) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open search plan " + path.string());
    }
    const json value = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded() || !value.is_object()) {
        throw DataError("invalid JSON in search plan " + path.string());
    }
    SearchPlan plan;
    try {
        if (value.contains("prune_subset_size")) {
            plan.prune_subset_size = value.at("prune_subset_size").get<int>();
        }
        if (value.contains("greedy_keep")) plan.greedy_keep = value.at("greedy_keep").get<int>();
        if (value.contains("train_size")) plan.train_size = value.at("train_size").get<int>();
        if (value.contains("samples_per_config")) {
            plan.samples_per_config = value.at("samples_per_config").get<int>();
        }
        if (value.contains("prune_threshold")) {
            plan.prune_threshold = value.at("prune_threshold").get<double>();
        }
        if (value.contains("thresholds")) {
            const json& thresholds = value.at("thresholds");
            const std::string name(to_string(task));
            if (thresholds.contains(name)) {
                plan.prune_threshold = thresholds.at(name).get<double>();
            }
        }
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    if (plan.prune_subset_size < 1 || plan.greedy_keep < 1 || plan.train_size < 1 ||
        plan.samples_per_config < 1) {
        throw ValidationError("search plan sizes must be >= 1");
    }
    return plan;
}

std::vector<Candidate> prune(const ConfigSpace& space, std::span<const TaskInstance> subset,
                             Evaluator& evaluator, double threshold) {
    if (subset.empty()) {
        throw ValidationError("prune needs at least one probe instance");
    }
    validate_space(space);
    const std::size_t config_count = space.size();
    std::vector<double> cumulative(config_count, 0.0);
    parallel_for(config_count, evaluator.protocol().parallelism, [&](std::size_t c) {
        const HyperparamConfig config = config_at(space, c);
        double sum = 0.0;
        for (const TaskInstance& instance : subset) {
            sum += evaluator.evaluate(instance, config).mean_score;
        }
        cumulative[c] = sum;
    });
    std::vector<Candidate> survivors;
    for (std::size_t c = 0; c < config_count; ++c) {
        const double subset_mean = cumulative[c] / static_cast<double>(subset.size());
        if (subset_mean >= threshold) {
            survivors.push_back({config_at(space, c), cumulative[c]});
        }
    }
    if (survivors.empty()) {
        throw SearchError("pruning threshold " + format_minimal(threshold, false) +
                          " removed all " + std::to_string(config_count) +
                          " configurations; lower the threshold");
    }
    return survivors;
}

std::vector<Candidate> greedy_select(std::vector<Candidate> survivors, int keep) {
    if (survivors.empty()) {
        throw ValidationError("greedy_select on an empty survivor list");
    }
    if (keep < 1) {
        throw ValidationError("greedy_select keep must be >= 1");
    }
    std::sort(survivors.begin(), survivors.end(), [](const Candidate& a, const Candidate& b) {
        if (a.cumulative_score != b.cumulative_score) {
            return a.cumulative_score > b.cumulative_score;
        }
        return a.config < b.config;
    });
    if (survivors.size() > static_cast<std::size_t>(keep)) {
        survivors.resize(static_cast<std::size_t>(keep));
    }
    return survivors;
}

std::vector<TrainingPair> assign_targets(std::span<const Candidate> candidates,
                                         std::span<const TaskInstance> instances,
                                         Evaluator& evaluator,
                                         const HyperparamConfig& default_config) {
    if (candidates.empty() || instances.empty()) {
        throw ValidationError("assign_targets needs candidates and instances");
    }
    const std::size_t n_inst = instances.size();
    const std::size_t n_cand = candidates.size();
    std::vector<std::vector<double>> means(n_inst, std::vector<double>(n_cand, 0.0));
    parallel_for(n_inst * n_cand, evaluator.protocol().parallelism, [&](std::size_t cell) {
        const std::size_t i = cell / n_cand;
        const std::size_t j = cell % n_cand;
        means[i][j] = evaluator.evaluate(instances[i], candidates[j].config).mean_score;
    });

    // the default's record is identical whether or not it sits in the
    // candidate list: seeds key on config content
    std::vector<double> default_means(n_inst, 0.0);
    std::optional<std::size_t> default_index;
    for (std::size_t j = 0; j < n_cand; ++j) {
        if (candidates[j].config == default_config) {
            default_index = j;
            break;
        }
    }
    parallel_for(n_inst, evaluator.protocol().parallelism, [&](std::size_t i) {
        default_means[i] = default_index
                               ? means[i][*default_index]
                               : evaluator.evaluate(instances[i], default_config).mean_score;
    });

    auto winner_set = [&](std::size_t i) {
        std::vector<std::size_t> winners;
        double best = means[i][0];
        for (std::size_t j = 1; j < n_cand; ++j) {
            best = std::max(best, means[i][j]);
        }
        for (std::size_t j = 0; j < n_cand; ++j) {
            if (means[i][j] == best) {
                winners.push_back(j);
            }
        }
        return winners;
    };

    // pass 1: count outright per-instance wins
    std::vector<int> win_count(n_cand, 0);
    for (std::size_t i = 0; i < n_inst; ++i) {
        const auto winners = winner_set(i);
        if (winners.size() == 1) {
            ++win_count[winners.front()];
        }
    }

    // pass 2: resolve ties toward the most frequent winner, then lexicographic
    std::vector<TrainingPair> pairs;
    pairs.reserve(n_inst);
    for (std::size_t i = 0; i < n_inst; ++i) {
        const auto winners = winner_set(i);
        std::size_t chosen = winners.front();
        for (const std::size_t j : winners) {
            if (win_count[j] > win_count[chosen] ||
                (win_count[j] == win_count[chosen] && candidates[j].config < candidates[chosen].config)) {
                chosen = j;
            }
        }
        TrainingPair pair;
        pair.task = instances[i].task_kind;
        pair.input_text = instances[i].input_text;
        pair.target_config = candidates[chosen].config;
        pair.rendered_target = render_config_text(pair.target_config);
        pair.best_score = means[i][chosen];
        pair.default_score = default_means[i];
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

double upper_bound(std::span<const Candidate> candidates,
                   std::span<const TaskInstance> instances, Evaluator& evaluator) {
    if (candidates.empty() || instances.empty()) {
        throw ValidationError("upper_bound needs candidates and instances");
    }
    const std::size_t n_inst = instances.size();
    const std::size_t n_cand = candidates.size();
    std::vector<double> best(n_inst, 0.0);
    std::vector<std::vector<double>> means(n_inst, std::vector<double>(n_cand, 0.0));
    parallel_for(n_inst * n_cand, evaluator.protocol().parallelism, [&](std::size_t cell) {
        const std::size_t i = cell / n_cand;
        const std::size_t j = cell % n_cand;
        means[i][j] = evaluator.evaluate(instances[i], candidates[j].config).mean_score;
    });
    double total = 0.0;
    for (std::size_t i = 0; i < n_inst; ++i) {
        best[i] = *std::max_element(means[i].begin(), means[i].end());
        total += best[i];
    }
    return total / static_cast<double>(n_inst);
}

YieldReport yield_report(std::span<const TrainingPair> pairs) {
    if (pairs.empty()) {
        throw ValidationError("yield_report on an empty pair list");
    }
    YieldReport report;
    for (const TrainingPair& pair : pairs) {
        report.best_scores.push_back(pair.best_score);
        report.default_scores.push_back(pair.default_score);
        report.mean_best += pair.best_score;
        report.mean_default += pair.default_score;
    }
    report.mean_best /= static_cast<double>(pairs.size());
    report.mean_default /= static_cast<double>(pairs.size());
    if (report.mean_default != 0.0) {
        report.improvement_defined = true;
        report.improvement_pct = (report.mean_best - report.mean_default) /
                                 std::abs(report.mean_default) * 100.0;
    }
    return report;
}

json yield_report_to_json(const YieldReport& report) {
    json value;
    value["mean_best"] = report.mean_best;
    value["mean_default"] = report.mean_default;
    value["improvement_pct"] =
        report.improvement_defined ? json(report.improvement_pct) : json(nullptr);
    value["best_scores"] = report.best_scores;
    value["default_scores"] = report.default_scores;
    return value;
}

void write_training_pairs(const std::filesystem::path& path,
                          std::span<const TrainingPair> pairs) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write training pairs to " + path.string());
    }
    for (const TrainingPair& pair : pairs) {
        json record;
        record["instruction"] = pair.input_text;
        record["output"] = pair.rendered_target;
        record["meta"] = json{{"best_score", pair.best_score},
                              {"default_score", pair.default_score},
                              {"task", std::string(to_string(pair.task))}};
        out << record.dump() << '\n';
    }
}

std::vector<TrainingPair> read_training_pairs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open training pairs " + path.string());
    }
    std::vector<TrainingPair> pairs;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) {
            continue;
        }
        const json record = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (record.is_discarded() || !record.is_object()) {
            throw DataError(path.string() + ":" + std::to_string(line_number) +
                            ": not a JSON object");
        }
        try {
            TrainingPair pair;
            pair.input_text = record.at("instruction").get<std::string>();
            pair.rendered_target = record.at("output").get<std::string>();
            if (record.contains("meta")) {
                const json& meta = record.at("meta");
                if (meta.contains("best_score")) pair.best_score = meta.at("best_score").get<double>();
                if (meta.contains("default_score")) {
                    pair.default_score = meta.at("default_score").get<double>();
                }
                if (meta.contains("task")) {
                    pair.task = task_kind_from_string(meta.at("task").get<std::string>());
                }
            }
            const ParsedConfig parsed = parse_config_text(pair.rendered_target);
            if (parsed.status == ParseStatus::fallback) {
                throw DataError(path.string() + ":" + std::to_string(line_number) +
                                ": field \"output\" is not a config");
            }
            pair.target_config = parsed.config;
            pairs.push_back(std::move(pair));
        } catch (const json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(line_number) + ": " + e.what());
        }
    }
    if (pairs.empty()) {
        throw DataError("training pair file " + path.string() + " is empty");
    }
    return pairs;
}

} // namespace hag
