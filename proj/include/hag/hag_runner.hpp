#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hag/backend.hpp"
#include "hag/config_space.hpp"
#include "hag/error.hpp"
#include "hag/search.hpp"
#include "hag/tasks.hpp"

namespace hag {

enum class ModelFamily { llama, mistral, vicuna, plain };

std::string_view to_string(ModelFamily family);
ModelFamily model_family_from_string(std::string_view text);

inline constexpr std::string_view kQuestionPlaceholder = "{user's question}";

// Stage-1 templates ask for a config in the brace JSON format; stage-2
// templates wrap the bare question. The `plain` family is the identity
// wrapper used with backends that need no chat markup.
struct PromptTemplate {
    ModelFamily family = ModelFamily::plain;
    int stage = 2; // 1 = config generation, 2 = response
    std::string text; // contains kQuestionPlaceholder exactly once
};

void validate_template(const PromptTemplate& tpl); // throws TemplateError

// Template files live at <dir>/<family>_stage<n>.txt, byte-faithful.
PromptTemplate load_template(const std::filesystem::path& dir, ModelFamily family, int stage);

// Substitutes the placeholder and nothing else.
std::string render_prompt(const PromptTemplate& tpl, const std::string& question);

// Stage-1 instruction header, k demonstration blocks in order, then the
// query. One "Config:" line per demonstration.
std::string build_icl_prompt(std::span<const TrainingPair> demonstrations,
                             const std::string& question, int k);

enum class Strategy { hag_sft, hag_icl, baseline_default, baseline_random };

std::string_view to_string(Strategy strategy);
Strategy strategy_from_string(std::string_view text); // accepts hag-sft/hag-icl/default/random

// Full record of one two-stage run (or one baseline run); enough to re-score
// offline without touching a backend.
struct HagTrace {
    std::string instance_id;
    TaskKind task = TaskKind::coinflip;
    Strategy strategy = Strategy::baseline_default;
    std::string stage1_prompt;
    std::string stage1_raw_output;
    HyperparamConfig parsed_config;
    ParseStatus parse_status = ParseStatus::ok;
    std::string stage2_prompt;
    std::vector<std::string> stage2_outputs;
    std::string backend_id;
};

nlohmann::json trace_to_json(const HagTrace& trace);
HagTrace trace_from_json(const nlohmann::json& value);
void write_traces(const std::filesystem::path& path, std::span<const HagTrace> traces);
std::vector<HagTrace> read_traces(const std::filesystem::path& path);

struct RunnerOptions {
    // near-greedy stage-1 decode keeps config generation reproducible
    HyperparamConfig stage1_decode{0.1, 1.0, 1, 1.0};
    int stage1_max_tokens = 96;
    int samples = 10;
    int max_new_tokens = 96;
    std::vector<std::string> stop_sequences;
    std::uint64_t base_seed = 0;
    int icl_k = 32;
    bool shuffle_demonstrations = false; // ablation: seeded shuffle instead of file order
    std::uint64_t demonstration_seed = 0;
};

enum class HagMode { sft, icl };

// Transport failure mid-run; carries whatever the trace had accumulated.
class RunTransportError : public TransportError {
public:
    RunTransportError(const std::string& what, HagTrace partial)
        : TransportError(what), partial_trace(std::move(partial)) {}

    HagTrace partial_trace;
};

// Stage 1 generates a config (template mode or ICL mode), parse failures
// degrade to the stage-2 backend's default; stage 2 samples `samples`
// responses under the parsed config with seeds keyed by content.
HagTrace run_hag(const TaskInstance& instance, GenerationBackend& stage1_backend,
                 GenerationBackend& stage2_backend, HagMode mode,
                 const PromptTemplate& stage1_template, const PromptTemplate& stage2_template,
                 std::span<const TrainingPair> demonstrations, const RunnerOptions& options);

// default: the backend's documented config. random: one uniform draw from
// the space per instance.
HagTrace run_baseline(const TaskInstance& instance, GenerationBackend& backend,
                      Strategy strategy, const ConfigSpace& space, Rng& rng,
                      const PromptTemplate& stage2_template, const RunnerOptions& options);

// Stage-2-only trace under a fixed config; what both baselines reduce to.
HagTrace run_with_config(const TaskInstance& instance, GenerationBackend& backend,
                         Strategy strategy, const HyperparamConfig& config,
                         const PromptTemplate& stage2_template, const RunnerOptions& options);

} // namespace hag
