#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hag/hag_runner.hpp"
#include "hag/metrics.hpp"
#include "hag/search.hpp"
#include "hag/tasks.hpp"

namespace hag {

// Scores for one (task, strategy) cell, on the task's reporting scale.
struct StrategyScores {
    double task_score = 0.0;
    std::vector<std::pair<std::string, double>> per_instance; // (id, mean), instance order
    int sample_count = 0;
    double parse_failure_rate = 0.0; // fraction of traces that fell back to default
    std::vector<std::string> incomplete; // instances whose backend calls failed
};

struct TaskReport {
    TaskKind task = TaskKind::coinflip;
    std::map<std::string, StrategyScores> strategies; // keyed by strategy name
    std::optional<double> relative_change; // HAG vs Default; absent when not computable
    bool rc_undefined = false;             // default score was exactly 0
    std::optional<double> upper_bound;
};

struct EvalReport {
    nlohmann::json metadata; // seeds, backends, space, metric recipe, template hashes
    std::vector<TaskReport> tasks;
};

struct RelativeChange {
    double value = 0.0;
    bool defined = false;
};

// (hag - default) / |default| * 100. The magnitude denominator keeps the sign
// meaning "better than default" for the negative-range tasks too. Undefined
// when default is exactly 0.
RelativeChange relative_change(double hag_score, double default_score);

// Display rounding used by the tables: one decimal, explicit sign.
std::string format_relative_change(const RelativeChange& rc);

struct EvaluateOptions {
    RunnerOptions runner;
    ConfigSpace space;     // drawn from by the random strategy
    int random_passes = 5; // whole-run replications averaged for Random
    int parallelism = 1;
};

struct EvaluateResult {
    StrategyScores scores;
    std::vector<HagTrace> traces;
};

// Generates and scores one strategy over the instances. stage1_backend is
// only consulted by the HAG strategies. Backend failures mark the instance
// incomplete instead of failing the run.
EvaluateResult evaluate_strategy(std::span<const TaskInstance> instances, Strategy strategy,
                                 GenerationBackend* stage1_backend,
                                 GenerationBackend& stage2_backend,
                                 const PromptTemplate& stage1_template,
                                 const PromptTemplate& stage2_template,
                                 std::span<const TrainingPair> demonstrations,
                                 const ScoringContext& scoring, const EvaluateOptions& options);

// Re-scores recorded traces offline; instances supply the references.
EvalReport report_from_traces(std::span<const TaskInstance> instances,
                              std::span<const HagTrace> traces, const ScoringContext& scoring,
                              nlohmann::json metadata,
                              const std::map<TaskKind, double>& upper_bounds = {});

enum class SweepAxis { temperature, top_p, top_k, repetition_penalty };

std::string_view to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(std::string_view text);

// Five uniformly spaced points across the axis range.
std::vector<double> default_sweep_values(SweepAxis axis);

struct SweepPoint {
    double axis_value = 0.0;
    double selfbleu_mean = 0.0;     // across probe instances
    double selfbleu_variance = 0.0;
};

// Varies one axis, holds the others at the backend default, and measures
// Self-BLEU over `samples` generations per probe instance.
std::vector<SweepPoint> sensitivity_sweep(GenerationBackend& backend,
                                          std::span<const TaskInstance> probes, SweepAxis axis,
                                          std::span<const double> values,
                                          const RunnerOptions& options,
                                          std::vector<std::string>* warnings = nullptr);

std::string sensitivity_csv(SweepAxis axis, std::span<const SweepPoint> points);

struct DifficultyPoint {
    int constraint_count = 0;
    std::string strategy;
    double mean_score = 0.0;
    int instance_count = 0;
};

// Taboo scores grouped by constraint count (the 3..10 difficulty ladder).
std::vector<DifficultyPoint> difficulty_sweep(std::span<const TaskInstance> instances,
                                              std::span<const HagTrace> traces,
                                              const ScoringContext& scoring);

// Rows for every count in [3,10]; groups without data stay blank.
std::string difficulty_csv(std::span<const DifficultyPoint> points);

// Per-axis histograms of the configs the traces applied, grouped by
// (task, backend): binned counts plus min-max-normalized positions.
nlohmann::json export_distributions(std::span<const HagTrace> traces);

std::string render_report_markdown(const EvalReport& report);
std::string render_report_csv(const EvalReport& report);
nlohmann::json report_to_json(const EvalReport& report);

} // namespace hag
