#include "hag/hag_runner.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hag/error.hpp"

namespace hag {

using nlohmann::json;

std::string_view to_string(ModelFamily family) {
    switch (family) {
    case ModelFamily::llama: return "llama";
    case ModelFamily::mistral: return "mistral";
    case ModelFamily::vicuna: return "vicuna";
    case ModelFamily::plain: return "plain";
    }
    return "plain";
}

ModelFamily model_family_from_string(std::string_view text) {
    if (text == "llama") return ModelFamily::llama;
    if (text == "mistral") return ModelFamily::mistral;
    if (text == "vicuna") return ModelFamily::vicuna;
    if (text == "plain") return ModelFamily::plain;
    throw ValidationError("unknown model family: " + std::string(text));
}

void validate_template(const PromptTemplate& tpl) {
    const std::size_t first = tpl.text.find(kQuestionPlaceholder);
    if (first == std::string::npos) {
        throw TemplateError("template is missing the placeholder " +
                            std::string(kQuestionPlaceholder));
    }
    if (tpl.text.find(kQuestionPlaceholder, first + 1) != std::string::npos) {
        throw TemplateError("template contains the placeholder more than once");
    }
    if (tpl.stage == 1 && tpl.text.find("Provide the config in JSON-format") == std::string::npos) {
        throw TemplateError("stage-1 template must ask for the config in JSON format");
    }
}

PromptTemplate load_template(const std::filesystem::path& dir, ModelFamily family, int stage) {
    if (stage != 1 && stage != 2) {
        throw ValidationError("template stage must be 1 or 2");
    }
    const std::filesystem::path path =
        dir / (std::string(to_string(family)) + "_stage" + std::to_string(stage) + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open template " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    PromptTemplate tpl{family, stage, buffer.str()};
    // template files end with a newline; the prompt itself does not
    if (!tpl.text.empty() && tpl.text.back() == '\n') {
        tpl.text.pop_back();
    }
    validate_template(tpl);
    return tpl;
}

std::string render_prompt(const PromptTemplate& tpl, const std::string& question) {
    validate_template(tpl);
    std::string out = tpl.text;
    out.replace(out.find(kQuestionPlaceholder), kQuestionPlaceholder.size(), question);
    return out;
}

std::string build_icl_prompt(std::span<const TrainingPair> demonstrations,
                             const std::string& question, int k) {
    if (k < 1) {
        throw ValidationError("icl prompt needs k >= 1");
    }
    if (demonstrations.size() < static_cast<std::size_t>(k)) {
        throw ValidationError("icl prompt needs " + std::to_string(k) + " demonstrations, got " +
                              std::to_string(demonstrations.size()));
    }
    std::string prompt =
        "Please act as a hyperparameter selector and provide the best suitable hyperparameter "
        "config based on the input question. Provide the config in JSON-format: "
        "{'temperature':$, 'top_p':$, 'top_k':$, 'repetition_penalty':$}\n";
    for (int i = 0; i < k; ++i) {
        prompt += "\nQuestion: " + demonstrations[static_cast<std::size_t>(i)].input_text +
                  "\nConfig: " + demonstrations[static_cast<std::size_t>(i)].rendered_target + "\n";
    }
    prompt += "\nQuestion: " + question + "\nConfig:";
    return prompt;
}

std::string_view to_string(Strategy strategy) {
    switch (strategy) {
    case Strategy::hag_sft: return "hag-sft";
    case Strategy::hag_icl: return "hag-icl";
    case Strategy::baseline_default: return "default";
    case Strategy::baseline_random: return "random";
    }
    return "default";
}

Strategy strategy_from_string(std::string_view text) {
    if (text == "hag-sft" || text == "hag_sft") return Strategy::hag_sft;
    if (text == "hag-icl" || text == "hag_icl") return Strategy::hag_icl;
    if (text == "default") return Strategy::baseline_default;
    if (text == "random") return Strategy::baseline_random;
    throw ValidationError("unknown strategy: " + std::string(text));
}

json trace_to_json(const HagTrace& trace) {
    json value;
    value["instance_id"] = trace.instance_id;
    value["task"] = std::string(to_string(trace.task));
    value["strategy"] = std::string(to_string(trace.strategy));
    value["stage1_prompt"] = trace.stage1_prompt;
    value["stage1_raw_output"] = trace.stage1_raw_output;
    value["parsed_config"] = config_to_json(trace.parsed_config);
    value["parse_status"] = std::string(to_string(trace.parse_status));
    value["stage2_prompt"] = trace.stage2_prompt;
    value["stage2_outputs"] = trace.stage2_outputs;
    value["backend_id"] = trace.backend_id;
    return value;
}

HagTrace trace_from_json(const json& value) {
    try {
        HagTrace trace;
        trace.instance_id = value.at("instance_id").get<std::string>();
        trace.task = task_kind_from_string(value.at("task").get<std::string>());
        trace.strategy = strategy_from_string(value.at("strategy").get<std::string>());
        trace.stage1_prompt = value.at("stage1_prompt").get<std::string>();
        trace.stage1_raw_output = value.at("stage1_raw_output").get<std::string>();
        trace.parsed_config = config_from_json(value.at("parsed_config"));
        trace.parse_status = parse_status_from_string(value.at("parse_status").get<std::string>());
        trace.stage2_prompt = value.at("stage2_prompt").get<std::string>();
        trace.stage2_outputs = value.at("stage2_outputs").get<std::vector<std::string>>();
        trace.backend_id = value.at("backend_id").get<std::string>();
        return trace;
    } catch (const json::exception& e) {
        throw DataError(std::string("trace record: ") + e.what());
    }
}

void write_traces(const std::filesystem::path& path, std::span<const HagTrace> traces) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write traces to " + path.string());
    }
    for (const HagTrace& trace : traces) {
        out << trace_to_json(trace).dump() << '\n';
    }
}

std::vector<HagTrace> read_traces(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open trace log " + path.string());
    }
    std::vector<HagTrace> traces;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) {
            continue;
        }
        const json value = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (value.is_discarded()) {
            throw DataError(path.string() + ":" + std::to_string(line_number) +
                            ": not valid JSON");
        }
        traces.push_back(trace_from_json(value));
    }
    if (traces.empty()) {
        throw DataError("trace log " + path.string() + " is empty");
    }
    return traces;
}

namespace {

// Stage-2 sampling shared by HAG and the baselines; seeds key on the applied
// config so runs match search-time evaluation exactly.
void sample_stage2(HagTrace& trace, const TaskInstance& instance, GenerationBackend& backend,
                   const PromptTemplate& stage2_template, const RunnerOptions& options) {
    trace.stage2_prompt = render_prompt(stage2_template, instance.input_text);
    GenerationRequest request;
    request.prompt_text = trace.stage2_prompt;
    request.config = trace.parsed_config;
    request.max_new_tokens = options.max_new_tokens;
    request.stop_sequences = options.stop_sequences;
    trace.stage2_outputs.reserve(static_cast<std::size_t>(options.samples));
    for (int i = 0; i < options.samples; ++i) {
        request.seed = sample_seed(options.base_seed, instance.instance_id, trace.parsed_config, i);
        trace.stage2_outputs.push_back(backend.generate(request).text);
    }
    trace.backend_id = backend.id();
}

} // namespace

HagTrace run_hag(const TaskInstance& instance, GenerationBackend& stage1_backend,
                 GenerationBackend& stage2_backend, HagMode mode,
                 const PromptTemplate& stage1_template, const PromptTemplate& stage2_template,
                 std::span<const TrainingPair> demonstrations, const RunnerOptions& options) {
    if (options.samples < 1) {
        throw ValidationError("runner needs samples >= 1");
    }
    HagTrace trace;
    trace.instance_id = instance.instance_id;
    trace.task = instance.task_kind;
    trace.strategy = mode == HagMode::sft ? Strategy::hag_sft : Strategy::hag_icl;

    if (mode == HagMode::sft) {
        trace.stage1_prompt = render_prompt(stage1_template, instance.input_text);
    } else {
        std::vector<TrainingPair> ordered(demonstrations.begin(), demonstrations.end());
        if (options.shuffle_demonstrations) {
            Rng rng(mix64(options.demonstration_seed));
            for (std::size_t i = ordered.size(); i > 1; --i) {
                std::swap(ordered[i - 1], ordered[uniform_index(rng, i)]);
            }
        }
        trace.stage1_prompt = build_icl_prompt(ordered, instance.input_text, options.icl_k);
    }

    GenerationRequest stage1_request;
    stage1_request.prompt_text = trace.stage1_prompt;
    stage1_request.config = options.stage1_decode;
    stage1_request.max_new_tokens = options.stage1_max_tokens;
    stage1_request.seed =
        sample_seed(options.base_seed, instance.instance_id + "#stage1", options.stage1_decode, 0);
    try {
        trace.stage1_raw_output = stage1_backend.generate(stage1_request).text;

        const ParsedConfig parsed =
            parse_config_text(trace.stage1_raw_output, stage2_backend.default_config());
        trace.parsed_config = parsed.config;
        trace.parse_status = parsed.status;

        sample_stage2(trace, instance, stage2_backend, stage2_template, options);
    } catch (const TransportError& e) {
        throw RunTransportError(e.what(), std::move(trace));
    }
    return trace;
}

HagTrace run_with_config(const TaskInstance& instance, GenerationBackend& backend,
                         Strategy strategy, const HyperparamConfig& config,
                         const PromptTemplate& stage2_template, const RunnerOptions& options) {
    if (options.samples < 1) {
        throw ValidationError("runner needs samples >= 1");
    }
    HagTrace trace;
    trace.instance_id = instance.instance_id;
    trace.task = instance.task_kind;
    trace.strategy = strategy;
    trace.parse_status = ParseStatus::ok;
    trace.parsed_config = config;
    try {
        sample_stage2(trace, instance, backend, stage2_template, options);
    } catch (const TransportError& e) {
        throw RunTransportError(e.what(), std::move(trace));
    }
    return trace;
}

HagTrace run_baseline(const TaskInstance& instance, GenerationBackend& backend,
                      Strategy strategy, const ConfigSpace& space, Rng& rng,
                      const PromptTemplate& stage2_template, const RunnerOptions& options) {
    if (strategy != Strategy::baseline_default && strategy != Strategy::baseline_random) {
        throw ValidationError("run_baseline takes the default or random strategy");
    }
    const HyperparamConfig config = strategy == Strategy::baseline_default
                                        ? backend.default_config()
                                        : random_config(space, rng);
    return run_with_config(instance, backend, strategy, config, stage2_template, options);
}

} // namespace hag
