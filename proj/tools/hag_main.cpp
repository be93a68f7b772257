// Operator entry point: one subcommand per workflow
//   sensitivity  per-axis Self-BLEU sweep           -> sensitivity.csv
//   search       training-pair construction         -> pairs.jsonl, yield.json
//   run          trace generation for one strategy  -> traces.jsonl
//   eval|report  score traces into the table bundle -> report.md/csv/json, ...
//   upper-bound  search applied to evaluation data  -> ub.json
// Exit codes: 0 success, 1 validation error, 2 transport error, 3 search error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "hag/config_space.hpp"
#include "hag/error.hpp"
#include "hag/hag_runner.hpp"
#include "hag/remote_backend.hpp"
#include "hag/report.hpp"
#include "hag/search.hpp"
#include "hag/tasks.hpp"
#include "hag/toy_model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
    std::string backend = "toy";
    std::string corpus;
    int toy_order = 3;
    double toy_alpha = 0.05;
    std::string endpoint;
    std::string defaults_file;
    std::string task_file;
    std::string space_file;
    std::string plan_file;
    std::string templates_dir = "data/templates";
    std::string family = "plain";
    std::string dictionary_file;
    std::string out_dir;
    std::uint64_t seed = 0;
    int parallel = 1;
    int samples = 0; // 0 = unset; falls back to the plan's value or 10
    int max_new_tokens = 96;

    int resolved_samples(int fallback = 10) const { return samples > 0 ? samples : fallback; }
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool needs_backend) {
    if (needs_backend) {
        cmd->add_option("--backend", opts.backend, "toy or remote")->capture_default_str();
        cmd->add_option("--corpus", opts.corpus, "training text for the toy backend");
        cmd->add_option("--toy-order", opts.toy_order, "toy model context length")
            ->capture_default_str();
        cmd->add_option("--toy-alpha", opts.toy_alpha, "toy model smoothing")
            ->capture_default_str();
        cmd->add_option("--endpoint", opts.endpoint, "endpoint spec JSON for the remote backend");
        cmd->add_option("--defaults", opts.defaults_file, "backend defaults config JSON");
    }
    cmd->add_option("--task-file", opts.task_file, "JSONL task instances")->required();
    cmd->add_option("--out", opts.out_dir, "output directory")->required();
    cmd->add_option("--seed", opts.seed, "base seed")->capture_default_str();
    cmd->add_option("--parallel", opts.parallel, "max parallel evaluations")
        ->capture_default_str();
    cmd->add_option("--samples", opts.samples,
                    "samples per config (default 10, or the plan's samples_per_config)");
    cmd->add_option("--max-new-tokens", opts.max_new_tokens, "generation length cap")
        ->capture_default_str();
    cmd->add_option("--dictionary", opts.dictionary_file, "word list for spelling bee scoring");
    cmd->add_option("--templates", opts.templates_dir, "prompt template directory")
        ->capture_default_str();
    cmd->add_option("--family", opts.family, "template family: llama|mistral|vicuna|plain")
        ->capture_default_str();
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw hag::DataError("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw hag::DataError("cannot write " + path.string());
    }
    out << content;
}

std::unique_ptr<hag::GenerationBackend> make_backend(const CommonOptions& opts) {
    if (opts.backend == "toy") {
        if (opts.corpus.empty()) {
            throw hag::ConfigError("the toy backend needs --corpus");
        }
        hag::HyperparamConfig defaults = hag::kDefaultConfig;
        if (!opts.defaults_file.empty()) {
            defaults = hag::load_config_file(opts.defaults_file);
        }
        return std::make_unique<hag::ToyBackend>(
            hag::toy_train(slurp(opts.corpus), opts.toy_order, opts.toy_alpha), defaults);
    }
    if (opts.backend == "remote") {
        if (opts.endpoint.empty()) {
            throw hag::ConfigError("the remote backend needs --endpoint");
        }
        hag::EndpointSpec spec = hag::load_endpoint_spec(opts.endpoint);
        if (!opts.defaults_file.empty()) {
            spec.defaults = hag::load_config_file(opts.defaults_file);
        }
        return std::make_unique<hag::RemoteBackend>(spec);
    }
    throw hag::ConfigError("unknown backend '" + opts.backend + "' (expected toy or remote)");
}

hag::ConfigSpace load_space(const CommonOptions& opts) {
    if (opts.space_file.empty()) {
        return hag::default_space();
    }
    return hag::load_space_file(opts.space_file);
}

hag::ScoringContext make_scoring(const CommonOptions& opts, hag::Dictionary& storage) {
    hag::ScoringContext scoring;
    if (!opts.dictionary_file.empty()) {
        storage = hag::load_dictionary(opts.dictionary_file);
        scoring.dictionary = &storage;
    }
    return scoring;
}

// Everything needed to reproduce the run; deliberately excludes the output
// path so identical inputs give identical bytes.
json manifest(const std::string& command, const CommonOptions& opts,
              const hag::ConfigSpace* space, const hag::SearchPlan* plan) {
    json m;
    m["command"] = command;
    m["backend"] = opts.backend;
    m["seed"] = opts.seed;
    m["samples"] = plan ? plan->samples_per_config : opts.resolved_samples();
    m["max_new_tokens"] = opts.max_new_tokens;
    m["family"] = opts.family;
    m["metric_options"] =
        json{{"bleu", "sentence BLEU-4, add-one smoothing for zero counts at order >= 2, "
                      "lowercase alphanumeric tokens"}};
    if (space) {
        m["space"] = json::parse(hag::space_to_json(*space));
    }
    if (plan) {
        m["plan"] = json{{"prune_subset_size", plan->prune_subset_size},
                         {"prune_threshold", plan->prune_threshold == -std::numeric_limits<double>::infinity()
                                                 ? json(nullptr)
                                                 : json(plan->prune_threshold)},
                         {"greedy_keep", plan->greedy_keep},
                         {"train_size", plan->train_size},
                         {"samples_per_config", plan->samples_per_config}};
    }
    json templates = json::object();
    for (const char* name : {"stage1", "stage2"}) {
        const int stage = name[5] == '1' ? 1 : 2;
        const fs::path path = fs::path(opts.templates_dir) /
                              (opts.family + "_stage" + std::to_string(stage) + ".txt");
        if (fs::exists(path)) {
            char hex[32];
            std::snprintf(hex, sizeof(hex), "%016llx",
                          static_cast<unsigned long long>(hag::fnv1a(slurp(path))));
            templates[name] = hex;
        }
    }
    m["template_hashes"] = templates;
    return m;
}

hag::SamplingProtocol protocol_from(const CommonOptions& opts, int samples_per_config) {
    hag::SamplingProtocol protocol;
    protocol.samples_per_config = samples_per_config;
    protocol.max_new_tokens = opts.max_new_tokens;
    protocol.base_seed = opts.seed;
    protocol.parallelism = opts.parallel;
    return protocol;
}

hag::RunnerOptions runner_from(const CommonOptions& opts) {
    hag::RunnerOptions runner;
    runner.samples = opts.resolved_samples();
    runner.max_new_tokens = opts.max_new_tokens;
    runner.base_seed = opts.seed;
    return runner;
}

int cmd_sensitivity(const CommonOptions& opts, const std::string& axis_name,
                    const std::vector<double>& values_in) {
    auto backend = make_backend(opts);
    auto instances = hag::load_instances(opts.task_file);
    const hag::SweepAxis axis = hag::sweep_axis_from_string(axis_name);
    std::vector<double> values =
        values_in.empty() ? hag::default_sweep_values(axis) : values_in;
    const std::size_t probe_count = std::min<std::size_t>(instances.size(), 5);
    std::vector<hag::TaskInstance> probes(instances.begin(),
                                          instances.begin() + probe_count);
    std::vector<std::string> warnings;
    const auto points = hag::sensitivity_sweep(*backend, probes, axis, values,
                                               runner_from(opts), &warnings);
    fs::create_directories(opts.out_dir);
    write_file(fs::path(opts.out_dir) / "sensitivity.csv", hag::sensitivity_csv(axis, points));
    json m = manifest("sensitivity", opts, nullptr, nullptr);
    m["axis"] = axis_name;
    m["values"] = values;
    m["warnings"] = warnings;
    write_file(fs::path(opts.out_dir) / "manifest.json", m.dump(2) + "\n");
    for (const auto& w : warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    std::cout << "sensitivity sweep over " << axis_name << " written to " << opts.out_dir
              << "\n";
    return 0;
}

int cmd_search(const CommonOptions& opts) {
    auto backend = make_backend(opts);
    auto instances = hag::load_instances(opts.task_file);
    const hag::ConfigSpace space = load_space(opts);
    const hag::TaskKind task = instances.front().task_kind;
    hag::SearchPlan plan;
    if (!opts.plan_file.empty()) {
        plan = hag::load_plan_file(opts.plan_file, task);
    }
    plan.samples_per_config = opts.resolved_samples(plan.samples_per_config);

    hag::Dictionary dictionary;
    const hag::ScoringContext scoring = make_scoring(opts, dictionary);

    fs::create_directories(opts.out_dir);
    const fs::path checkpoint_path = fs::path(opts.out_dir) / "checkpoint.jsonl";
    hag::ScoreCache cache;
    cache.load(checkpoint_path);
    cache.open_append(checkpoint_path);

    hag::Evaluator evaluator(*backend, scoring, protocol_from(opts, plan.samples_per_config),
                             &cache);

    const std::size_t probe_count =
        std::min<std::size_t>(instances.size(), static_cast<std::size_t>(plan.prune_subset_size));
    const std::size_t train_count =
        std::min<std::size_t>(instances.size(), static_cast<std::size_t>(plan.train_size));
    std::span<const hag::TaskInstance> probes(instances.data(), probe_count);
    std::span<const hag::TaskInstance> train(instances.data(), train_count);

    auto survivors = hag::prune(space, probes, evaluator, plan.prune_threshold);
    const std::size_t pruned = space.size() - survivors.size();
    auto candidates = hag::greedy_select(std::move(survivors), plan.greedy_keep);
    auto pairs = hag::assign_targets(candidates, train, evaluator, backend->default_config());
    const auto yield = hag::yield_report(pairs);

    cache.close();
    cache.rewrite_sorted(checkpoint_path);

    hag::write_training_pairs(fs::path(opts.out_dir) / "pairs.jsonl", pairs);
    json candidates_json = json::array();
    for (const auto& c : candidates) {
        candidates_json.push_back(json{{"config", hag::config_to_json(c.config)},
                                       {"cumulative_score", c.cumulative_score}});
    }
    write_file(fs::path(opts.out_dir) / "candidates.json", candidates_json.dump(2) + "\n");
    json yield_json = hag::yield_report_to_json(yield);
    yield_json["pruned_configs"] = pruned;
    yield_json["space_size"] = space.size();
    write_file(fs::path(opts.out_dir) / "yield.json", yield_json.dump(2) + "\n");
    write_file(fs::path(opts.out_dir) / "manifest.json",
               manifest("search", opts, &space, &plan).dump(2) + "\n");

    std::cout << "search kept " << candidates.size() << " of " << space.size() << " configs ("
              << pruned << " pruned), " << pairs.size() << " training pairs";
    if (yield.improvement_defined) {
        char buffer[32];
        std::snprintf(buffer, sizeof(buffer), "%+.1f%%", yield.improvement_pct);
        std::cout << ", yield " << buffer << " vs default";
    }
    std::cout << "\n";
    return 0;
}

int cmd_run(const CommonOptions& opts, const std::string& strategy_name,
            const std::string& demos_file, int icl_k, const std::string& stage1_endpoint,
            const std::string& stage1_corpus, int stage1_order) {
    auto backend = make_backend(opts);
    auto instances = hag::load_instances(opts.task_file);
    const hag::Strategy strategy = hag::strategy_from_string(strategy_name);
    const hag::ConfigSpace space = load_space(opts);

    hag::Dictionary dictionary;
    const hag::ScoringContext scoring = make_scoring(opts, dictionary);

    const hag::ModelFamily family = hag::model_family_from_string(opts.family);
    const hag::PromptTemplate stage2 = hag::load_template(opts.templates_dir, family, 2);
    hag::PromptTemplate stage1;
    std::unique_ptr<hag::GenerationBackend> stage1_owned;
    hag::GenerationBackend* stage1_backend = nullptr;
    std::vector<hag::TrainingPair> demonstrations;

    if (strategy == hag::Strategy::hag_sft || strategy == hag::Strategy::hag_icl) {
        if (!stage1_endpoint.empty()) {
            stage1_owned =
                std::make_unique<hag::RemoteBackend>(hag::load_endpoint_spec(stage1_endpoint));
            stage1_backend = stage1_owned.get();
        } else if (!stage1_corpus.empty()) {
            stage1_owned = std::make_unique<hag::ToyBackend>(
                hag::toy_train(slurp(stage1_corpus), stage1_order, opts.toy_alpha));
            stage1_backend = stage1_owned.get();
        } else {
            stage1_backend = backend.get(); // self-regulation: one model, two stages
        }
        if (strategy == hag::Strategy::hag_sft) {
            stage1 = hag::load_template(opts.templates_dir, family, 1);
        }
        if (strategy == hag::Strategy::hag_icl) {
            if (demos_file.empty()) {
                throw hag::ConfigError("hag-icl needs --demos (training pairs JSONL)");
            }
            demonstrations = hag::read_training_pairs(demos_file);
        }
    }

    hag::EvaluateOptions eval_options;
    eval_options.runner = runner_from(opts);
    eval_options.runner.icl_k = icl_k;
    eval_options.space = space;
    eval_options.parallelism = opts.parallel;

    const auto result =
        hag::evaluate_strategy(instances, strategy, stage1_backend, *backend, stage1, stage2,
                               demonstrations, scoring, eval_options);

    fs::create_directories(opts.out_dir);
    hag::write_traces(fs::path(opts.out_dir) / "traces.jsonl", result.traces);
    json summary;
    summary["strategy"] = strategy_name;
    summary["task_score"] = result.scores.task_score;
    summary["instances"] = instances.size();
    summary["sample_count"] = result.scores.sample_count;
    summary["parse_failure_rate"] = result.scores.parse_failure_rate;
    summary["incomplete"] = result.scores.incomplete;
    write_file(fs::path(opts.out_dir) / "summary.json", summary.dump(2) + "\n");
    write_file(fs::path(opts.out_dir) / "manifest.json",
               manifest("run", opts, &space, nullptr).dump(2) + "\n");

    std::cout << "strategy " << strategy_name << ": score " << result.scores.task_score
              << " over " << instances.size() << " instances, parse-failure rate "
              << result.scores.parse_failure_rate << "\n";
    if (!result.scores.incomplete.empty()) {
        std::cout << result.scores.incomplete.size() << " instances incomplete\n";
        if (result.scores.incomplete.size() == instances.size()) {
            std::cerr << "transport error: every instance failed; no usable traces\n";
            return 2;
        }
    }
    return 0;
}

int cmd_report(const CommonOptions& opts, const std::vector<std::string>& trace_files,
               const std::string& ub_file) {
    if (trace_files.empty()) {
        throw hag::ConfigError("eval/report needs at least one --traces file");
    }
    auto instances = hag::load_instances(opts.task_file);
    hag::Dictionary dictionary;
    const hag::ScoringContext scoring = make_scoring(opts, dictionary);

    std::vector<hag::HagTrace> traces;
    for (const auto& file : trace_files) {
        auto batch = hag::read_traces(file);
        traces.insert(traces.end(), batch.begin(), batch.end());
    }
    std::map<hag::TaskKind, double> upper_bounds;
    if (!ub_file.empty()) {
        const json ub = json::parse(slurp(ub_file), nullptr, false);
        if (ub.is_discarded() || !ub.is_object()) {
            throw hag::DataError("invalid upper-bound file " + ub_file);
        }
        for (const auto& [task_name, value] : ub.items()) {
            if (task_name == "candidates") {
                continue;
            }
            upper_bounds[hag::task_kind_from_string(task_name)] = value.get<double>();
        }
    }

    const auto report = hag::report_from_traces(instances, traces, scoring,
                                                manifest("report", opts, nullptr, nullptr),
                                                upper_bounds);
    fs::create_directories(opts.out_dir);
    write_file(fs::path(opts.out_dir) / "report.md", hag::render_report_markdown(report));
    write_file(fs::path(opts.out_dir) / "report.csv", hag::render_report_csv(report));
    write_file(fs::path(opts.out_dir) / "report.json",
               hag::report_to_json(report).dump(2) + "\n");
    write_file(fs::path(opts.out_dir) / "distributions.json",
               hag::export_distributions(traces).dump(2) + "\n");

    bool any_taboo = false;
    for (const auto& trace : traces) {
        any_taboo = any_taboo || trace.task == hag::TaskKind::taboo;
    }
    if (any_taboo) {
        const auto points = hag::difficulty_sweep(instances, traces, scoring);
        write_file(fs::path(opts.out_dir) / "difficulty.csv", hag::difficulty_csv(points));
    }
    std::cout << "report bundle written to " << opts.out_dir << "\n";
    return 0;
}

int cmd_upper_bound(const CommonOptions& opts) {
    auto backend = make_backend(opts);
    auto instances = hag::load_instances(opts.task_file);
    const hag::ConfigSpace space = load_space(opts);
    const hag::TaskKind task = instances.front().task_kind;
    hag::SearchPlan plan;
    if (!opts.plan_file.empty()) {
        plan = hag::load_plan_file(opts.plan_file, task);
    }
    plan.samples_per_config = opts.resolved_samples(plan.samples_per_config);

    hag::Dictionary dictionary;
    const hag::ScoringContext scoring = make_scoring(opts, dictionary);

    fs::create_directories(opts.out_dir);
    const fs::path checkpoint_path = fs::path(opts.out_dir) / "ub_checkpoint.jsonl";
    hag::ScoreCache cache;
    cache.load(checkpoint_path);
    cache.open_append(checkpoint_path);
    hag::Evaluator evaluator(*backend, scoring, protocol_from(opts, plan.samples_per_config),
                             &cache);

    const std::size_t probe_count =
        std::min<std::size_t>(instances.size(), static_cast<std::size_t>(plan.prune_subset_size));
    std::span<const hag::TaskInstance> probes(instances.data(), probe_count);
    auto candidates = hag::greedy_select(
        hag::prune(space, probes, evaluator, plan.prune_threshold), plan.greedy_keep);
    const double ub = hag::upper_bound(candidates, instances, evaluator);

    cache.close();
    cache.rewrite_sorted(checkpoint_path);

    json out;
    out[std::string(hag::to_string(task))] = ub;
    json candidates_json = json::array();
    for (const auto& c : candidates) {
        candidates_json.push_back(hag::config_to_json(c.config));
    }
    out["candidates"] = candidates_json;
    write_file(fs::path(opts.out_dir) / "ub.json", out.dump(2) + "\n");
    write_file(fs::path(opts.out_dir) / "manifest.json",
               manifest("upper-bound", opts, &space, &plan).dump(2) + "\n");
    std::cout << "upper bound for " << hag::to_string(task) << ": " << ub << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyperparameter-aware generation toolkit"};
    app.require_subcommand(1);

    CommonOptions opts;
    std::string axis = "temperature";
    std::vector<double> values;
    std::string strategy = "default";
    std::string demos_file;
    int icl_k = 32;
    std::string stage1_endpoint;
    std::string stage1_corpus;
    int stage1_order = 5;
    std::vector<std::string> trace_files;
    std::string ub_file;

    CLI::App* sensitivity = app.add_subcommand("sensitivity", "per-axis Self-BLEU sweep");
    add_common(sensitivity, opts, true);
    sensitivity->add_option("--axis", axis, "axis to vary")->capture_default_str();
    sensitivity->add_option("--values", values, "axis values (default: 5 uniform points)");

    CLI::App* search = app.add_subcommand("search", "construct training pairs");
    add_common(search, opts, true);
    search->add_option("--space", opts.space_file, "config space JSON");
    search->add_option("--plan", opts.plan_file, "search plan JSON");

    CLI::App* run = app.add_subcommand("run", "generate traces for one strategy");
    add_common(run, opts, true);
    run->add_option("--strategy", strategy, "hag-sft|hag-icl|default|random")
        ->capture_default_str();
    run->add_option("--space", opts.space_file, "config space JSON (random strategy)");
    run->add_option("--demos", demos_file, "training pairs JSONL for ICL demonstrations");
    run->add_option("--icl-k", icl_k, "demonstrations per ICL prompt")->capture_default_str();
    run->add_option("--stage1-endpoint", stage1_endpoint, "endpoint spec for the stage-1 model");
    run->add_option("--stage1-corpus", stage1_corpus, "toy corpus for the stage-1 model");
    run->add_option("--stage1-order", stage1_order, "context length of the stage-1 toy model")
        ->capture_default_str();

    CLI::App* eval = app.add_subcommand("eval", "score trace logs into a report bundle");
    add_common(eval, opts, false);
    eval->add_option("--traces", trace_files, "trace logs to score")->required();
    eval->add_option("--ub", ub_file, "ub.json from the upper-bound command");

    CLI::App* report = app.add_subcommand("report", "alias of eval");
    add_common(report, opts, false);
    report->add_option("--traces", trace_files, "trace logs to score")->required();
    report->add_option("--ub", ub_file, "ub.json from the upper-bound command");

    CLI::App* upper = app.add_subcommand("upper-bound", "search ceiling on evaluation data");
    add_common(upper, opts, true);
    upper->add_option("--space", opts.space_file, "config space JSON");
    upper->add_option("--plan", opts.plan_file, "search plan JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sensitivity->parsed()) {
            return cmd_sensitivity(opts, axis, values);
        }
        if (search->parsed()) {
            return cmd_search(opts);
        }
        if (run->parsed()) {
            return cmd_run(opts, strategy, demos_file, icl_k, stage1_endpoint, stage1_corpus,
                           stage1_order);
        }
        if (eval->parsed() || report->parsed()) {
            return cmd_report(opts, trace_files, ub_file);
        }
        if (upper->parsed()) {
            return cmd_upper_bound(opts);
        }
    } catch (const hag::SearchError& e) {
        std::cerr << "search error: " << e.what() << "\n";
        return 3;
    } catch (const hag::TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return 2;
    } catch (const hag::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
