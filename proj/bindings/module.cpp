#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hag/config_space.hpp"
#include "hag/decoding.hpp"
#include "hag/error.hpp"
#include "hag/metrics.hpp"
#include "hag/search.hpp"
#include "hag/tasks.hpp"
#include "hag/toy_model.hpp"

namespace py = pybind11;
using namespace hag;

namespace {

std::vector<double> pipeline_py(const std::vector<double>& logits,
                                const std::vector<TokenId>& context, const HyperparamConfig& config) {
    return transform_pipeline(LogitVector{logits}, context, config).probs;
}

TaskInstance make_instance(const std::string& task, const std::string& id,
                           const std::string& input, const py::object& reference) {
    TaskInstance instance;
    instance.task_kind = task_kind_from_string(task);
    instance.instance_id = id;
    instance.input_text = input;
    switch (instance.task_kind) {
    case TaskKind::coinflip:
    case TaskKind::pig_latin:
        instance.expected_answer = reference.cast<std::string>();
        break;
    case TaskKind::spelling_bee:
        instance.puzzle_letters = reference.cast<std::string>();
        break;
    case TaskKind::ynbw:
        break;
    case TaskKind::taboo:
        instance.constraints = reference.cast<std::vector<std::string>>();
        break;
    case TaskKind::multiarith:
        instance.numeric_answer = reference.cast<long long>();
        break;
    }
    validate_instance(instance);
    return instance;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "decoding transforms, config-space search primitives, task scorers, and the "
              "toy generation backend";

    py::register_exception<Error>(m, "HagError");

    py::class_<HyperparamConfig>(m, "HyperparamConfig")
        .def(py::init<>())
        .def(py::init<double, double, int, double>(), py::arg("temperature"), py::arg("top_p"),
             py::arg("top_k"), py::arg("repetition_penalty"))
        .def_readwrite("temperature", &HyperparamConfig::temperature)
        .def_readwrite("top_p", &HyperparamConfig::top_p)
        .def_readwrite("top_k", &HyperparamConfig::top_k)
        .def_readwrite("repetition_penalty", &HyperparamConfig::repetition_penalty)
        .def("__eq__", [](const HyperparamConfig& a, const HyperparamConfig& b) { return a == b; })
        .def("__repr__", [](const HyperparamConfig& c) { return render_config_text(c); });

    m.def("default_config", [] { return kDefaultConfig; });

    m.def("enumerate_default_space", [] { return enumerate_space(default_space()); },
          "All 6600 configs of the default grid in lexicographic axis order.");
    m.def("default_space_size", [] { return default_space().size(); });
    m.def(
        "random_config",
        [](std::uint64_t seed) {
            Rng rng(seed);
            return random_config(default_space(), rng);
        },
        py::arg("seed"));

    m.def(
        "parse_config_text",
        [](const std::string& text) {
            const auto parsed = parse_config_text(text);
            return py::make_tuple(parsed.config, std::string(to_string(parsed.status)));
        },
        py::arg("text"), "Returns (config, status) with status in {ok, clamped, fallback}.");
    m.def("render_config_text", &render_config_text, py::arg("config"));

    m.def(
        "apply_temperature",
        [](const std::vector<double>& logits, double temperature) {
            return apply_temperature(LogitVector{logits}, temperature).scores;
        },
        py::arg("logits"), py::arg("temperature"));
    m.def(
        "apply_repetition_penalty",
        [](const std::vector<double>& logits, const std::vector<TokenId>& context,
           double penalty) {
            return apply_repetition_penalty(LogitVector{logits}, context, penalty).scores;
        },
        py::arg("logits"), py::arg("context"), py::arg("penalty"));
    m.def(
        "apply_top_k",
        [](const std::vector<double>& logits, int k) {
            return apply_top_k(LogitVector{logits}, k).scores;
        },
        py::arg("logits"), py::arg("k"));
    m.def(
        "apply_top_p",
        [](const std::vector<double>& probs, double p) {
            return apply_top_p(ProbVector{probs}, p).probs;
        },
        py::arg("probs"), py::arg("p"));
    m.def(
        "softmax",
        [](const std::vector<double>& logits) { return softmax(LogitVector{logits}).probs; },
        py::arg("logits"));
    m.def("transform_pipeline", &pipeline_py, py::arg("logits"), py::arg("context"),
          py::arg("config"),
          "repetition_penalty -> temperature -> top_k -> softmax -> top_p");
    m.def(
        "sample_token",
        [](const std::vector<double>& probs, std::uint64_t seed) {
            Rng rng(seed);
            return sample_token(ProbVector{probs}, rng);
        },
        py::arg("probs"), py::arg("seed"));

    m.def(
        "bleu",
        [](const std::string& candidate, const std::vector<std::string>& references) {
            return bleu(candidate, references);
        },
        py::arg("candidate"), py::arg("references"));
    m.def("self_bleu", [](const std::vector<std::string>& samples) { return self_bleu(samples); },
          py::arg("samples"));
    m.def("pig_latin_translate",
          [](const std::string& text) { return pig_latin_translate(text); }, py::arg("text"));

    m.def(
        "score_response",
        [](const std::string& task, const std::string& input, const py::object& reference,
           const std::string& response, const std::vector<std::string>& dictionary) {
            const TaskInstance instance = make_instance(task, "py", input, reference);
            Dictionary dict;
            ScoringContext context;
            if (!dictionary.empty()) {
                dict = make_dictionary(dictionary);
                context.dictionary = &dict;
            }
            const TaskScore score = score_response(instance, response, context);
            return py::make_tuple(score.value, score.detail.dump());
        },
        py::arg("task"), py::arg("input"), py::arg("reference"), py::arg("response"),
        py::arg("dictionary") = std::vector<std::string>{},
        "Returns (value, detail_json) for one of: coinflip, spelling_bee, ynbw, taboo, "
        "pig_latin, multiarith.");

    py::class_<ToyModel>(m, "ToyModel")
        .def_readonly("order", &ToyModel::order)
        .def_property_readonly("vocabulary",
                               [](const ToyModel& model) { return model.vocabulary; })
        .def("to_json", &toy_model_to_json);
    m.def("toy_train", &toy_train, py::arg("corpus"), py::arg("order"),
          py::arg("smoothing_alpha") = 0.05);
    m.def(
        "toy_generate",
        [](const ToyModel& model, const std::string& prompt, const HyperparamConfig& config,
           std::uint64_t seed, int max_new_tokens) {
            GenerationRequest request;
            request.prompt_text = prompt;
            request.config = config;
            request.seed = seed;
            request.max_new_tokens = max_new_tokens;
            return toy_generate(model, request).text;
        },
        py::arg("model"), py::arg("prompt"), py::arg("config"), py::arg("seed") = 0,
        py::arg("max_new_tokens") = 96);
}
