#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hag/backend.hpp"
#include "hag/config_space.hpp"
#include "hag/tasks.hpp"

namespace hag {

// How every (instance, config) cell is evaluated: samples_per_config
// generations, scored and averaged. Seeds are derived from the content of
// (instance, config, sample index), so identical cells score identically no
// matter which phase or schedule computes them.
struct SamplingProtocol {
    int samples_per_config = 10;
    int max_new_tokens = 96;
    std::vector<std::string> stop_sequences;
    std::uint64_t base_seed = 0;
    int parallelism = 1;
};

std::uint64_t config_seed_key(const HyperparamConfig& config);
std::uint64_t sample_seed(std::uint64_t base_seed, const std::string& instance_id,
                          const HyperparamConfig& config, int sample_index);

// One evaluated cell; sample_scores are on the task's reporting scale.
struct ScoreRecord {
    std::string instance_id;
    HyperparamConfig config;
    std::vector<double> sample_scores;
    double mean_score = 0.0;
};

nlohmann::json score_record_to_json(const ScoreRecord& record);
ScoreRecord score_record_from_json(const nlohmann::json& value);

// Checkpoint store: records append as they are computed, so an interrupted
// search resumes without re-querying the backend.
class ScoreCache {
public:
    ScoreCache() = default;

    void load(const std::filesystem::path& path); // missing file is fine
    void open_append(const std::filesystem::path& path);
    void close();
    // Rewrites the file with records in key order (deterministic bytes).
    void rewrite_sorted(const std::filesystem::path& path) const;

    std::optional<ScoreRecord> find(const std::string& instance_id,
                                    const HyperparamConfig& config) const;
    void put(const ScoreRecord& record);
    std::size_t size() const;

    static std::string key(const std::string& instance_id, const HyperparamConfig& config);

private:
    std::map<std::string, ScoreRecord> records_;
    std::ofstream append_;
    mutable std::mutex mutex_;
};

// Drives one backend through the sampling protocol and scores the outputs.
class Evaluator {
public:
    using PromptRenderer = std::function<std::string(const TaskInstance&)>;

    Evaluator(GenerationBackend& backend, ScoringContext scoring, SamplingProtocol protocol,
              ScoreCache* cache = nullptr, PromptRenderer prompt_renderer = nullptr);

    ScoreRecord evaluate(const TaskInstance& instance, const HyperparamConfig& config);

    const SamplingProtocol& protocol() const { return protocol_; }
    GenerationBackend& backend() { return backend_; }
    const ScoringContext& scoring() const { return scoring_; }

private:
    GenerationBackend& backend_;
    ScoringContext scoring_;
    SamplingProtocol protocol_;
    ScoreCache* cache_;
    PromptRenderer prompt_renderer_;
};

struct SearchPlan {
    int prune_subset_size = 5;
    double prune_threshold = -std::numeric_limits<double>::infinity();
    int greedy_keep = 10;
    int train_size = 100;
    int samples_per_config = 10;
};

// JSON plan file: the scalar fields above plus a per-task "thresholds" map.
SearchPlan load_plan_file(const std::filesystem::path& path, TaskKind task);

struct Candidate {
    HyperparamConfig config;
    double cumulative_score = 0.0; // sum of per-instance means on the pruning subset
};

// Evaluates every config in the space on the pruning subset and keeps those
// whose subset mean clears the threshold. Throws SearchError when nothing
// survives.
std::vector<Candidate> prune(const ConfigSpace& space, std::span<const TaskInstance> subset,
                             Evaluator& evaluator, double threshold);

// Top `keep` survivors by cumulative score; ties break toward the
// lexicographically smaller config. Shorter lists pass through whole.
std::vector<Candidate> greedy_select(std::vector<Candidate> survivors, int keep);

struct TrainingPair {
    TaskKind task = TaskKind::coinflip;
    std::string input_text;
    HyperparamConfig target_config;
    std::string rendered_target; // render_config_text(target_config)
    double best_score = 0.0;
    double default_score = 0.0;
};

// Per-instance best candidate. Ties resolve toward the config that wins the
// most instances outright (two passes), then lexicographically.
std::vector<TrainingPair> assign_targets(std::span<const Candidate> candidates,
                                         std::span<const TaskInstance> instances,
                                         Evaluator& evaluator,
                                         const HyperparamConfig& default_config);

// Mean over instances of the best candidate mean: the score ceiling
// reachable by config regulation alone.
double upper_bound(std::span<const Candidate> candidates,
                   std::span<const TaskInstance> instances, Evaluator& evaluator);

struct YieldReport {
    double mean_best = 0.0;
    double mean_default = 0.0;
    double improvement_pct = 0.0; // vs the default-config scores
    bool improvement_defined = false;
    std::vector<double> best_scores;    // per-pair, histogram inputs
    std::vector<double> default_scores;
};

YieldReport yield_report(std::span<const TrainingPair> pairs);
nlohmann::json yield_report_to_json(const YieldReport& report);

// JSONL export consumed as SFT data and as ICL demonstrations:
// {"instruction": ..., "output": ..., "meta": {best_score, default_score, task}}
void write_training_pairs(const std::filesystem::path& path,
                          std::span<const TrainingPair> pairs);
std::vector<TrainingPair> read_training_pairs(const std::filesystem::path& path);

} // namespace hag
