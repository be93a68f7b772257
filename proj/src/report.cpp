#include "hag/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "hag/error.hpp"

namespace hag {

using nlohmann::json;

RelativeChange relative_change(double hag_score, double default_score) {
    if (default_score == 0.0) {
        return {0.0, false};
    }
    return {(hag_score - default_score) / std::abs(default_score) * 100.0, true};
}

std::string format_relative_change(const RelativeChange& rc) {
    if (!rc.defined) {
        return "n/a";
    }
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%+.1f%%", rc.value);
    return buffer;
}

namespace {

std::string format_score(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f", value);
    return buffer;
}

struct InstanceAccumulator {
    std::vector<double> scores; // one per scored sample
};

// Scores every stage-2 output of the traces against its instance; one
// StrategyScores per (task, strategy) group present.
StrategyScores accumulate_group(std::span<const TaskInstance> instances,
                                const std::vector<const HagTrace*>& group,
                                const ScoringContext& scoring) {
    std::map<std::string, const TaskInstance*> by_id;
    for (const TaskInstance& instance : instances) {
        by_id[instance.instance_id] = &instance;
    }
    std::map<std::string, InstanceAccumulator> per_instance;
    int fallbacks = 0;
    int sample_count = 0;
    for (const HagTrace* trace : group) {
        const auto it = by_id.find(trace->instance_id);
        if (it == by_id.end()) {
            throw DataError("trace references unknown instance '" + trace->instance_id + "'");
        }
        const double scale = metric_scale(it->second->task_kind);
        auto& acc = per_instance[trace->instance_id];
        for (const std::string& output : trace->stage2_outputs) {
            acc.scores.push_back(score_response(*it->second, output, scoring).value * scale);
        }
        sample_count = std::max(sample_count, static_cast<int>(trace->stage2_outputs.size()));
        if (trace->parse_status == ParseStatus::fallback) {
            ++fallbacks;
        }
    }
    StrategyScores scores;
    scores.sample_count = sample_count;
    scores.parse_failure_rate =
        group.empty() ? 0.0 : static_cast<double>(fallbacks) / static_cast<double>(group.size());
    double total = 0.0;
    // instance order follows the task file, not trace arrival
    for (const TaskInstance& instance : instances) {
        const auto it = per_instance.find(instance.instance_id);
        if (it == per_instance.end()) {
            continue;
        }
        const auto mv = mean_and_variance(it->second.scores);
        scores.per_instance.emplace_back(instance.instance_id, mv.mean);
        total += mv.mean;
    }
    scores.task_score =
        scores.per_instance.empty() ? 0.0 : total / static_cast<double>(scores.per_instance.size());
    return scores;
}

const char* const kStrategyOrder[] = {"random", "default", "hag-sft", "hag-icl"};

const TaskKind kTaskOrder[] = {TaskKind::coinflip, TaskKind::spelling_bee, TaskKind::ynbw,
                               TaskKind::taboo,    TaskKind::pig_latin,    TaskKind::multiarith};

// Table rows are labeled like the published layout.
std::string strategy_label(const std::string& name) {
    if (name == "random") return "Random";
    if (name == "default") return "Default";
    if (name == "hag-sft") return "HAG";
    if (name == "hag-icl") return "HAG-ICL";
    return name;
}

const StrategyScores* find_hag(const TaskReport& task) {
    const auto sft = task.strategies.find("hag-sft");
    if (sft != task.strategies.end()) {
        return &sft->second;
    }
    const auto icl = task.strategies.find("hag-icl");
    if (icl != task.strategies.end()) {
        return &icl->second;
    }
    return nullptr;
}

} // namespace

EvaluateResult evaluate_strategy(std::span<const TaskInstance> instances, Strategy strategy,
                                 GenerationBackend* stage1_backend,
                                 GenerationBackend& stage2_backend,
                                 const PromptTemplate& stage1_template,
                                 const PromptTemplate& stage2_template,
                                 std::span<const TrainingPair> demonstrations,
                                 const ScoringContext& scoring, const EvaluateOptions& options) {
    if (instances.empty()) {
        throw ValidationError("evaluate_strategy needs instances");
    }
    EvaluateResult result;
    std::vector<std::string> incomplete;

    const bool is_hag = strategy == Strategy::hag_sft || strategy == Strategy::hag_icl;
    if (is_hag && !stage1_backend) {
        throw ValidationError("HAG strategies need a stage-1 backend");
    }
    const int passes = strategy == Strategy::baseline_random ? options.random_passes : 1;

    std::vector<std::vector<std::optional<HagTrace>>> traces(
        static_cast<std::size_t>(passes),
        std::vector<std::optional<HagTrace>>(instances.size()));
    for (int pass = 0; pass < passes; ++pass) {
        // configs for the pass are drawn up front so instance-level
        // parallelism cannot change what Random evaluates
        std::vector<HyperparamConfig> drawn(instances.size());
        if (strategy == Strategy::baseline_random) {
            Rng rng(hash_combine(mix64(options.runner.base_seed),
                                 static_cast<std::uint64_t>(pass)));
            for (auto& config : drawn) {
                config = random_config(options.space, rng);
            }
        }
        parallel_for(instances.size(), options.parallelism, [&](std::size_t i) {
            const TaskInstance& instance = instances[i];
            try {
                HagTrace trace;
                switch (strategy) {
                case Strategy::hag_sft:
                case Strategy::hag_icl:
                    trace = run_hag(instance, *stage1_backend, stage2_backend,
                                    strategy == Strategy::hag_sft ? HagMode::sft : HagMode::icl,
                                    stage1_template, stage2_template, demonstrations,
                                    options.runner);
                    break;
                case Strategy::baseline_default:
                    trace = run_with_config(instance, stage2_backend, strategy,
                                            stage2_backend.default_config(), stage2_template,
                                            options.runner);
                    break;
                case Strategy::baseline_random:
                    trace = run_with_config(instance, stage2_backend, strategy, drawn[i],
                                            stage2_template, options.runner);
                    break;
                }
                traces[static_cast<std::size_t>(pass)][i] = std::move(trace);
            } catch (const TransportError&) {
                // recorded below; the run keeps going
            }
        });
    }

    std::vector<const HagTrace*> group;
    std::set<std::string> failed;
    for (int pass = 0; pass < passes; ++pass) {
        for (std::size_t i = 0; i < instances.size(); ++i) {
            const auto& slot = traces[static_cast<std::size_t>(pass)][i];
            if (slot) {
                result.traces.push_back(*slot);
            } else {
                failed.insert(instances[i].instance_id);
            }
        }
    }
    for (const HagTrace& trace : result.traces) {
        group.push_back(&trace);
    }
    result.scores = accumulate_group(instances, group, scoring);
    result.scores.incomplete.assign(failed.begin(), failed.end());
    return result;
}

EvalReport report_from_traces(std::span<const TaskInstance> instances,
                              std::span<const HagTrace> traces, const ScoringContext& scoring,
                              json metadata, const std::map<TaskKind, double>& upper_bounds) {
    if (traces.empty()) {
        throw ValidationError("report_from_traces needs traces");
    }
    EvalReport report;
    report.metadata = std::move(metadata);

    std::map<TaskKind, std::map<std::string, std::vector<const HagTrace*>>> groups;
    std::set<std::string> backend_ids;
    for (const HagTrace& trace : traces) {
        groups[trace.task][std::string(to_string(trace.strategy))].push_back(&trace);
        if (!trace.backend_id.empty()) {
            backend_ids.insert(trace.backend_id);
        }
    }
    report.metadata["backends"] = backend_ids;
    for (TaskKind kind : kTaskOrder) {
        const auto task_it = groups.find(kind);
        if (task_it == groups.end()) {
            continue;
        }
        std::vector<TaskInstance> task_instances;
        for (const TaskInstance& instance : instances) {
            if (instance.task_kind == kind) {
                task_instances.push_back(instance);
            }
        }
        TaskReport task_report;
        task_report.task = kind;
        for (const auto& [strategy_name, group] : task_it->second) {
            task_report.strategies[strategy_name] =
                accumulate_group(task_instances, group, scoring);
        }
        const auto default_it = task_report.strategies.find("default");
        const StrategyScores* hag = find_hag(task_report);
        if (default_it != task_report.strategies.end() && hag) {
            const RelativeChange rc =
                relative_change(hag->task_score, default_it->second.task_score);
            if (rc.defined) {
                task_report.relative_change = rc.value;
            } else {
                task_report.rc_undefined = true;
            }
        }
        const auto ub_it = upper_bounds.find(kind);
        if (ub_it != upper_bounds.end()) {
            task_report.upper_bound = ub_it->second;
        }
        report.tasks.push_back(std::move(task_report));
    }
    return report;
}

std::string_view to_string(SweepAxis axis) {
    switch (axis) {
    case SweepAxis::temperature: return "temperature";
    case SweepAxis::top_p: return "top_p";
    case SweepAxis::top_k: return "top_k";
    case SweepAxis::repetition_penalty: return "repetition_penalty";
    }
    return "temperature";
}

SweepAxis sweep_axis_from_string(std::string_view text) {
    if (text == "temperature") return SweepAxis::temperature;
    if (text == "top_p") return SweepAxis::top_p;
    if (text == "top_k") return SweepAxis::top_k;
    if (text == "repetition_penalty") return SweepAxis::repetition_penalty;
    throw ValidationError("unknown sweep axis: " + std::string(text));
}

std::vector<double> default_sweep_values(SweepAxis axis) {
    switch (axis) {
    case SweepAxis::temperature: return {0.1, 0.55, 1.0, 1.45, 1.9};
    case SweepAxis::top_p: return {0.1, 0.325, 0.55, 0.775, 1.0};
    case SweepAxis::top_k: return {10, 33, 55, 78, 100};
    case SweepAxis::repetition_penalty: return {1.0, 1.125, 1.25, 1.375, 1.5};
    }
    return {};
}

std::vector<SweepPoint> sensitivity_sweep(GenerationBackend& backend,
                                          std::span<const TaskInstance> probes, SweepAxis axis,
                                          std::span<const double> values,
                                          const RunnerOptions& options,
                                          std::vector<std::string>* warnings) {
    if (probes.empty() || values.empty()) {
        throw ValidationError("sensitivity sweep needs probes and axis values");
    }
    if (values.size() != 5 && warnings) {
        warnings->push_back("sweep uses " + std::to_string(values.size()) +
                            " axis values; the protocol default is 5");
    }
    if (options.samples < 2) {
        throw ValidationError("sensitivity sweep needs samples >= 2 for Self-BLEU");
    }
    std::vector<SweepPoint> points;
    for (double value : values) {
        HyperparamConfig config = backend.default_config();
        switch (axis) {
        case SweepAxis::temperature: config.temperature = value; break;
        case SweepAxis::top_p: config.top_p = value; break;
        case SweepAxis::top_k: config.top_k = static_cast<int>(std::lround(value)); break;
        case SweepAxis::repetition_penalty: config.repetition_penalty = value; break;
        }
        validate_config(config);
        std::vector<double> per_probe;
        for (const TaskInstance& probe : probes) {
            GenerationRequest request;
            request.prompt_text = probe.input_text;
            request.config = config;
            request.max_new_tokens = options.max_new_tokens;
            request.stop_sequences = options.stop_sequences;
            std::vector<std::string> samples;
            for (int s = 0; s < options.samples; ++s) {
                request.seed = sample_seed(options.base_seed, probe.instance_id, config, s);
                samples.push_back(backend.generate(request).text);
            }
            per_probe.push_back(self_bleu(samples));
        }
        const MeanVar mv = mean_and_variance(per_probe);
        points.push_back({value, mv.mean, mv.variance});
    }
    return points;
}

std::string sensitivity_csv(SweepAxis axis, std::span<const SweepPoint> points) {
    std::string out = "axis,value,selfbleu_mean,selfbleu_variance\n";
    for (const SweepPoint& point : points) {
        out += std::string(to_string(axis)) + ',' + format_minimal(point.axis_value, false) + ',' +
               format_minimal(point.selfbleu_mean, false) + ',' +
               format_minimal(point.selfbleu_variance, false) + '\n';
    }
    return out;
}

std::vector<DifficultyPoint> difficulty_sweep(std::span<const TaskInstance> instances,
                                              std::span<const HagTrace> traces,
                                              const ScoringContext& scoring) {
    std::map<std::string, const TaskInstance*> by_id;
    for (const TaskInstance& instance : instances) {
        if (instance.task_kind == TaskKind::taboo) {
            by_id[instance.instance_id] = &instance;
        }
    }
    // (count, strategy) -> scores of every sample
    std::map<std::pair<int, std::string>, std::vector<double>> buckets;
    for (const HagTrace& trace : traces) {
        if (trace.task != TaskKind::taboo) {
            continue;
        }
        const auto it = by_id.find(trace.instance_id);
        if (it == by_id.end()) {
            continue;
        }
        const int count = static_cast<int>(it->second->constraints.size());
        auto& bucket = buckets[{count, std::string(to_string(trace.strategy))}];
        for (const std::string& output : trace.stage2_outputs) {
            bucket.push_back(score_response(*it->second, output, scoring).value);
        }
    }
    std::vector<DifficultyPoint> points;
    for (const auto& [key, scores] : buckets) {
        const MeanVar mv = mean_and_variance(scores);
        points.push_back({key.first, key.second, mv.mean, static_cast<int>(scores.size())});
    }
    return points;
}

std::string difficulty_csv(std::span<const DifficultyPoint> points) {
    std::set<std::string> strategies;
    std::map<std::pair<int, std::string>, const DifficultyPoint*> index;
    for (const DifficultyPoint& point : points) {
        strategies.insert(point.strategy);
        index[{point.constraint_count, point.strategy}] = &point;
    }
    std::string out = "constraint_count,strategy,mean_score,samples\n";
    for (int count = 3; count <= 10; ++count) {
        for (const std::string& strategy : strategies) {
            const auto it = index.find({count, strategy});
            out += std::to_string(count) + ',' + strategy + ',';
            if (it != index.end()) {
                out += format_minimal(it->second->mean_score, false) + ',' +
                       std::to_string(it->second->instance_count);
            } else {
                out += ","; // reported gap
            }
            out += '\n';
        }
    }
    return out;
}

json export_distributions(std::span<const HagTrace> traces) {
    if (traces.empty()) {
        throw ValidationError("export_distributions needs traces");
    }
    struct AxisRange {
        const char* name;
        double lo;
        double hi;
    };
    const AxisRange axes[] = {
        {"temperature", HyperparamConfig::kTemperatureMin, HyperparamConfig::kTemperatureMax},
        {"top_p", HyperparamConfig::kTopPMin, HyperparamConfig::kTopPMax},
        {"top_k", static_cast<double>(HyperparamConfig::kTopKMin),
         static_cast<double>(HyperparamConfig::kTopKMax)},
        {"repetition_penalty", HyperparamConfig::kRepetitionPenaltyMin,
         HyperparamConfig::kRepetitionPenaltyMax},
    };
    constexpr int kBins = 10;

    std::map<std::pair<std::string, std::string>, std::vector<const HagTrace*>> groups;
    for (const HagTrace& trace : traces) {
        groups[{std::string(to_string(trace.task)), trace.backend_id}].push_back(&trace);
    }
    json out = json::array();
    for (const auto& [key, group] : groups) {
        json entry;
        entry["task"] = key.first;
        entry["backend"] = key.second;
        entry["trace_count"] = group.size();
        json histograms = json::object();
        for (const AxisRange& axis : axes) {
            std::vector<int> counts(kBins, 0);
            std::vector<double> normalized;
            normalized.reserve(group.size());
            for (const HagTrace* trace : group) {
                double v = 0;
                if (std::string_view(axis.name) == "temperature") {
                    v = trace->parsed_config.temperature;
                } else if (std::string_view(axis.name) == "top_p") {
                    v = trace->parsed_config.top_p;
                } else if (std::string_view(axis.name) == "top_k") {
                    v = trace->parsed_config.top_k;
                } else {
                    v = trace->parsed_config.repetition_penalty;
                }
                double position = (v - axis.lo) / (axis.hi - axis.lo);
                position = std::clamp(position, 0.0, 1.0);
                normalized.push_back(position);
                int bin = static_cast<int>(position * kBins);
                bin = std::clamp(bin, 0, kBins - 1);
                ++counts[static_cast<std::size_t>(bin)];
            }
            json h;
            h["bin_count"] = kBins;
            h["range"] = json::array({axis.lo, axis.hi});
            h["counts"] = counts;
            h["normalized_values"] = normalized;
            histograms[axis.name] = h;
        }
        entry["histograms"] = histograms;
        out.push_back(entry);
    }
    return out;
}

std::string render_report_markdown(const EvalReport& report) {
    std::string out;
    out += "| Strategy |";
    std::vector<const TaskReport*> tasks;
    for (TaskKind kind : kTaskOrder) {
        for (const TaskReport& task : report.tasks) {
            if (task.task == kind) {
                tasks.push_back(&task);
                out += ' ';
                out += to_string(kind);
                out += " |";
            }
        }
    }
    out += "\n|---|";
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        out += "---|";
    }
    out += '\n';
    for (const char* strategy : kStrategyOrder) {
        bool present = false;
        for (const TaskReport* task : tasks) {
            if (task->strategies.count(strategy)) {
                present = true;
            }
        }
        if (!present) {
            continue;
        }
        out += "| " + strategy_label(strategy) + " |";
        for (const TaskReport* task : tasks) {
            const auto it = task->strategies.find(strategy);
            out += ' ';
            out += it != task->strategies.end() ? format_score(it->second.task_score) : "";
            out += " |";
        }
        out += '\n';
    }
    bool any_rc = false;
    bool any_ub = false;
    for (const TaskReport* task : tasks) {
        any_rc = any_rc || task->relative_change.has_value() || task->rc_undefined;
        any_ub = any_ub || task->upper_bound.has_value();
    }
    if (any_rc) {
        out += "| RC |";
        for (const TaskReport* task : tasks) {
            out += ' ';
            if (task->relative_change) {
                out += format_relative_change({*task->relative_change, true});
            } else if (task->rc_undefined) {
                out += "n/a";
            }
            out += " |";
        }
        out += '\n';
    }
    if (any_ub) {
        out += "| UB |";
        for (const TaskReport* task : tasks) {
            out += ' ';
            if (task->upper_bound) {
                out += format_score(*task->upper_bound);
            }
            out += " |";
        }
        out += '\n';
    }
    return out;
}

std::string render_report_csv(const EvalReport& report) {
    std::string out = "task,row,value\n";
    for (const TaskReport& task : report.tasks) {
        const std::string name(to_string(task.task));
        for (const char* strategy : kStrategyOrder) {
            const auto it = task.strategies.find(strategy);
            if (it == task.strategies.end()) {
                continue;
            }
            out += name + ',' + strategy + ',' + format_minimal(it->second.task_score, false) +
                   '\n';
        }
        if (task.relative_change) {
            out += name + ",rc," + format_minimal(*task.relative_change, false) + '\n';
        } else if (task.rc_undefined) {
            out += name + ",rc,\n";
        }
        if (task.upper_bound) {
            out += name + ",ub," + format_minimal(*task.upper_bound, false) + '\n';
        }
    }
    return out;
}

json report_to_json(const EvalReport& report) {
    json out;
    out["metadata"] = report.metadata;
    json tasks = json::array();
    for (const TaskReport& task : report.tasks) {
        json entry;
        entry["task"] = std::string(to_string(task.task));
        json strategies = json::object();
        for (const auto& [name, scores] : task.strategies) {
            json s;
            s["score"] = scores.task_score;
            s["sample_count"] = scores.sample_count;
            s["parse_failure_rate"] = scores.parse_failure_rate;
            json per_instance = json::array();
            for (const auto& [id, mean] : scores.per_instance) {
                per_instance.push_back(json{{"id", id}, {"mean", mean}});
            }
            s["per_instance"] = per_instance;
            s["incomplete"] = scores.incomplete;
            strategies[name] = s;
        }
        entry["strategies"] = strategies;
        entry["relative_change"] =
            task.relative_change ? json(*task.relative_change) : json(nullptr);
        entry["rc_undefined"] = task.rc_undefined;
        entry["upper_bound"] = task.upper_bound ? json(*task.upper_bound) : json(nullptr);
        tasks.push_back(entry);
    }
    out["tasks"] = tasks;
    return out;
}

} // namespace hag
