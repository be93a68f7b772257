#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "hag/error.hpp"
#include "hag/metrics.hpp"
#include "hag/search.hpp"

using namespace hag;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// 2x2x1x1 space used throughout: configs indexed 0..3 by (temperature, top_p)
ConfigSpace tiny_space() {
    ConfigSpace space;
    space.temperature_values = {0.3, 0.9};
    space.top_p_values = {0.5, 1.0};
    space.top_k_values = {20};
    space.repetition_penalty_values = {1.0};
    return space;
}

int config_code(const HyperparamConfig& config) {
    return (config.temperature > 0.5 ? 2 : 0) + (config.top_p > 0.7 ? 1 : 0);
}

// pig-latin instances whose reference has four tokens; the rule backend
// answers with a prefix of the reference, so BLEU strictly increases with
// the prefix length and every (instance, config) score is tie-free
const std::string kReference = "ellohay orldway oodgay ightbray";

std::vector<TaskInstance> rule_instances(int count) {
    std::vector<TaskInstance> instances;
    for (int i = 0; i < count; ++i) {
        TaskInstance instance;
        instance.task_kind = TaskKind::pig_latin;
        instance.instance_id = "ri-" + std::to_string(i);
        instance.input_text = "translate sentence " + std::to_string(i);
        instance.expected_answer = kReference;
        instances.push_back(std::move(instance));
    }
    return instances;
}

std::string prefix_words(const std::string& text, int k) {
    std::size_t pos = 0;
    for (int i = 0; i < k; ++i) {
        pos = text.find(' ', pos);
        if (pos == std::string::npos) {
            return text;
        }
        ++pos;
    }
    return text.substr(0, pos == std::string::npos ? text.size() : pos - 1);
}

int rule_prefix_len(int instance_number, const HyperparamConfig& config) {
    return 1 + (config_code(config) + instance_number) % 4;
}

CallbackBackend rule_backend() {
    return CallbackBackend([](const GenerationRequest& request) {
        const std::string& prompt = request.prompt_text;
        const int instance_number = std::stoi(prompt.substr(prompt.rfind(' ') + 1));
        return prefix_words(kReference, rule_prefix_len(instance_number, request.config));
    });
}

SamplingProtocol quick_protocol(int samples = 3) {
    SamplingProtocol protocol;
    protocol.samples_per_config = samples;
    protocol.max_new_tokens = 16;
    protocol.base_seed = 11;
    return protocol;
}

} // namespace

TEST_CASE("sample seeds are content-keyed and phase-independent") {
    const HyperparamConfig a{0.6, 0.9, 50, 1.0};
    const HyperparamConfig b{0.6, 0.9, 50, 1.1};
    CHECK(sample_seed(1, "x", a, 0) == sample_seed(1, "x", a, 0));
    CHECK(sample_seed(1, "x", a, 1) == sample_seed(1, "x", a, 0) + 1);
    CHECK(sample_seed(1, "x", a, 0) != sample_seed(1, "x", b, 0));
    CHECK(sample_seed(1, "x", a, 0) != sample_seed(1, "y", a, 0));
    CHECK(sample_seed(1, "x", a, 0) != sample_seed(2, "x", a, 0));
}

TEST_CASE("score records serialize and keep the mean invariant") {
    ScoreRecord record{"inst-1", {0.6, 0.9, 50, 1.2}, {1.0, 0.0, 1.0, 1.0}, 0.75};
    auto restored = score_record_from_json(score_record_to_json(record));
    CHECK(restored.instance_id == record.instance_id);
    CHECK(restored.config == record.config);
    CHECK(restored.sample_scores == record.sample_scores);
    CHECK(restored.mean_score == record.mean_score);
}

TEST_CASE("evaluator means equal the sample average") {
    auto backend = rule_backend();
    auto instances = rule_instances(2);
    Evaluator evaluator(backend, {}, quick_protocol(5));
    auto record = evaluator.evaluate(instances[0], {0.3, 0.5, 20, 1.0});
    REQUIRE(record.sample_scores.size() == 5);
    double sum = 0;
    for (double s : record.sample_scores) sum += s;
    CHECK(record.mean_score == doctest::Approx(sum / 5).epsilon(1e-12));
    // deterministic backend: zero variance across samples
    for (double s : record.sample_scores) {
        CHECK(s == record.sample_scores[0]);
    }
}

TEST_CASE("prune keeps everything at -inf and errors at +inf") {
    auto backend = rule_backend();
    auto instances = rule_instances(5);
    Evaluator evaluator(backend, {}, quick_protocol());
    const auto space = tiny_space();

    auto survivors = prune(space, instances, evaluator, kNegInf);
    CHECK(survivors.size() == 4);

    CHECK_THROWS_AS(prune(space, instances, evaluator,
                          std::numeric_limits<double>::infinity()),
                    SearchError);
    CHECK_THROWS_WITH_AS(prune(space, instances, evaluator,
                               std::numeric_limits<double>::infinity()),
                         doctest::Contains("lower the threshold"), SearchError);
}

TEST_CASE("prune filters by subset mean against the threshold") {
    auto backend = rule_backend();
    auto instances = rule_instances(4); // prefix lengths rotate per config
    Evaluator evaluator(backend, {}, quick_protocol());
    const auto space = tiny_space();
    // every config sees prefixes {1,2,3,4} over the 4 instances: identical
    // subset means, all survive any threshold below that mean
    auto all = prune(space, instances, evaluator, kNegInf);
    REQUIRE(all.size() == 4);
    const double mean = all[0].cumulative_score / 4;
    for (const auto& c : all) {
        CHECK(c.cumulative_score == doctest::Approx(mean * 4).epsilon(1e-12));
    }
    auto at_mean = prune(space, instances, evaluator, mean - 1e-9);
    CHECK(at_mean.size() == 4);
    CHECK_THROWS_AS(prune(space, instances, evaluator, mean + 1.0), SearchError);
}

TEST_CASE("greedy_select keeps the top cumulative scores") {
    const HyperparamConfig a{0.3, 0.5, 20, 1.0};
    const HyperparamConfig b{0.3, 1.0, 20, 1.0};
    const HyperparamConfig c{0.9, 0.5, 20, 1.0};
    SUBCASE("order statistic") {
        auto out = greedy_select({{a, 5.0}, {b, 3.0}, {c, 1.0}}, 2);
        REQUIRE(out.size() == 2);
        CHECK(out[0].config == a);
        CHECK(out[1].config == b);
    }
    SUBCASE("short lists pass through") {
        auto out = greedy_select({{a, 1.0}, {b, 2.0}}, 10);
        CHECK(out.size() == 2);
        CHECK(out[0].config == b);
    }
    SUBCASE("ties break toward the lexicographically smaller config") {
        auto out = greedy_select({{c, 5.0}, {a, 5.0}}, 1);
        REQUIRE(out.size() == 1);
        CHECK(out[0].config == a);
    }
    CHECK_THROWS_AS(greedy_select({}, 3), ValidationError);
}

TEST_CASE("assign_targets equals the exhaustive oracle on the tiny space") {
    auto backend = rule_backend();
    auto instances = rule_instances(7);
    Evaluator evaluator(backend, {}, quick_protocol());
    const auto space = tiny_space();
    const auto configs = enumerate_space(space);

    // full two-stage pipeline with a vacuous threshold and keep-all
    auto candidates = greedy_select(prune(space, instances, evaluator, kNegInf),
                                    static_cast<int>(space.size()));
    auto pairs = assign_targets(candidates, instances, evaluator, kDefaultConfig);
    REQUIRE(pairs.size() == instances.size());

    // independent exhaustive oracle over every (instance, config) pair
    for (std::size_t i = 0; i < instances.size(); ++i) {
        double best = -1;
        HyperparamConfig best_config;
        for (const auto& config : configs) {
            const std::string response =
                prefix_words(kReference, rule_prefix_len(static_cast<int>(i), config));
            const double score = bleu(response, {kReference}) * 100.0;
            if (score > best) {
                best = score;
                best_config = config;
            }
        }
        CHECK(pairs[i].target_config == best_config);
        CHECK(pairs[i].best_score == doctest::Approx(best).epsilon(1e-12));
        CHECK(pairs[i].rendered_target == render_config_text(best_config));
        // the winning prefix is always the full reference
        CHECK(pairs[i].best_score == doctest::Approx(100.0).epsilon(1e-12));
    }
}

TEST_CASE("assign_targets tie-break follows global frequency then lex order") {
    // two configs; instance 0 and 1 are won outright by B; instance 2 ties
    const HyperparamConfig a{0.3, 0.5, 20, 1.0};
    const HyperparamConfig b{0.9, 1.0, 20, 1.0};
    CallbackBackend backend([&](const GenerationRequest& request) -> std::string {
        const bool is_b = request.config == b;
        if (request.prompt_text.back() == '2') {
            return "ellohay orldway oodgay ightbray"; // both configs perfect: tie
        }
        return is_b ? "ellohay orldway oodgay ightbray" : "ellohay";
    });
    auto instances = rule_instances(3);
    Evaluator evaluator(backend, {}, quick_protocol());
    std::vector<Candidate> candidates{{a, 0}, {b, 0}};
    auto pairs = assign_targets(candidates, instances, evaluator, kDefaultConfig);
    CHECK(pairs[0].target_config == b);
    CHECK(pairs[1].target_config == b);
    // tie on instance 2 resolves toward B, the more frequent outright winner
    CHECK(pairs[2].target_config == b);

    // with no outright winner anywhere, ties fall back to lex order
    CallbackBackend all_tie([](const GenerationRequest&) { return std::string("ellohay"); });
    Evaluator tie_eval(all_tie, {}, quick_protocol());
    auto tie_pairs = assign_targets(candidates, instances, tie_eval, kDefaultConfig);
    for (const auto& pair : tie_pairs) {
        CHECK(pair.target_config == a);
    }
}

TEST_CASE("single candidate dominates trivially") {
    auto backend = rule_backend();
    auto instances = rule_instances(3);
    Evaluator evaluator(backend, {}, quick_protocol());
    const HyperparamConfig only{0.3, 0.5, 20, 1.0};
    std::vector<Candidate> candidates{{only, 0}};
    auto pairs = assign_targets(candidates, instances, evaluator, only);
    for (const auto& pair : pairs) {
        CHECK(pair.target_config == only);
        CHECK(pair.best_score == pair.default_score);
    }
    CHECK(upper_bound(candidates, instances, evaluator) ==
          doctest::Approx((bleu(prefix_words(kReference, 1), {kReference}) +
                           bleu(prefix_words(kReference, 2), {kReference}) +
                           bleu(prefix_words(kReference, 3), {kReference})) /
                          3 * 100.0));
}

TEST_CASE("best_score dominates default_score when the default is a candidate") {
    auto backend = rule_backend();
    auto instances = rule_instances(6);
    Evaluator evaluator(backend, {}, quick_protocol());
    ConfigSpace space = tiny_space();
    space.temperature_values = {0.3, 0.6};
    space.top_p_values = {0.9, 1.0};
    space.top_k_values = {50};
    auto candidates = greedy_select(prune(space, instances, evaluator, kNegInf), 10);
    const HyperparamConfig default_config{0.6, 0.9, 50, 1.0};
    bool default_present = false;
    for (const auto& c : candidates) {
        default_present = default_present || c.config == default_config;
    }
    REQUIRE(default_present);
    auto pairs = assign_targets(candidates, instances, evaluator, default_config);
    for (const auto& pair : pairs) {
        CHECK(pair.best_score >= pair.default_score);
    }
}

TEST_CASE("upper_bound dominates members and grows with candidates") {
    auto backend = rule_backend();
    auto instances = rule_instances(5);
    Evaluator evaluator(backend, {}, quick_protocol());
    const auto configs = enumerate_space(tiny_space());
    std::vector<Candidate> some{{configs[0], 0}, {configs[1], 0}};
    std::vector<Candidate> more{{configs[0], 0}, {configs[1], 0}, {configs[2], 0}};
    const double ub_some = upper_bound(some, instances, evaluator);
    const double ub_more = upper_bound(more, instances, evaluator);
    CHECK(ub_more >= ub_some);
    // UB >= any member's own mean evaluation
    for (const auto& candidate : some) {
        double mean = 0;
        for (const auto& instance : instances) {
            mean += evaluator.evaluate(instance, candidate.config).mean_score;
        }
        mean /= static_cast<double>(instances.size());
        CHECK(ub_some >= mean - 1e-12);
    }
}

TEST_CASE("yield_report aggregates improvements") {
    std::vector<TrainingPair> pairs(4);
    for (auto& pair : pairs) {
        pair.best_score = 1.0;
        pair.default_score = 0.5;
    }
    auto report = yield_report(pairs);
    CHECK(report.mean_best == doctest::Approx(1.0));
    CHECK(report.mean_default == doctest::Approx(0.5));
    CHECK(report.improvement_defined);
    CHECK(report.improvement_pct == doctest::Approx(100.0));

    SUBCASE("no improvement when best equals default") {
        for (auto& pair : pairs) pair.best_score = 0.5;
        auto flat = yield_report(pairs);
        CHECK(flat.improvement_pct == doctest::Approx(0.0));
    }
    SUBCASE("mixed fixture matches a spreadsheet-style recomputation") {
        std::vector<double> best{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
        std::vector<double> defaults{1, 1, 2, 2, 3, 3, 4, 4, 5, 5};
        std::vector<TrainingPair> mixed(10);
        double sum_best = 0, sum_default = 0;
        for (std::size_t i = 0; i < 10; ++i) {
            mixed[i].best_score = best[i];
            mixed[i].default_score = defaults[i];
            sum_best += best[i];
            sum_default += defaults[i];
        }
        auto r = yield_report(mixed);
        CHECK(r.mean_best == doctest::Approx(sum_best / 10).epsilon(1e-12));
        CHECK(r.mean_default == doctest::Approx(sum_default / 10).epsilon(1e-12));
        CHECK(r.improvement_pct ==
              doctest::Approx((sum_best - sum_default) / sum_default * 100).epsilon(1e-12));
        CHECK(r.best_scores.size() == 10);
    }
    SUBCASE("zero default mean is flagged undefined") {
        std::vector<TrainingPair> zero(2);
        zero[0].default_score = 1.0;
        zero[1].default_score = -1.0;
        zero[0].best_score = zero[1].best_score = 1.0;
        CHECK_FALSE(yield_report(zero).improvement_defined);
    }
}

TEST_CASE("training pairs round-trip through JSONL") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "hag_pairs_test";
    fs::create_directories(dir);
    std::vector<TrainingPair> pairs(3);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        pairs[i].task = TaskKind::pig_latin;
        pairs[i].input_text = "question " + std::to_string(i);
        pairs[i].target_config = {0.3 + 0.3 * static_cast<double>(i), 0.5, 20, 1.0};
        pairs[i].rendered_target = render_config_text(pairs[i].target_config);
        pairs[i].best_score = 10.0 * static_cast<double>(i);
        pairs[i].default_score = 1.0;
    }
    const fs::path path = dir / "pairs.jsonl";
    write_training_pairs(path, pairs);
    auto loaded = read_training_pairs(path);
    REQUIRE(loaded.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(loaded[i].input_text == pairs[i].input_text);
        CHECK(loaded[i].target_config == pairs[i].target_config);
        CHECK(loaded[i].rendered_target == pairs[i].rendered_target);
        CHECK(loaded[i].best_score == pairs[i].best_score);
        CHECK(loaded[i].task == TaskKind::pig_latin);
    }
    CHECK_THROWS_AS(read_training_pairs(dir / "absent.jsonl"), DataError);
    fs::remove_all(dir);
}

TEST_CASE("checkpointed searches resume without re-querying") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "hag_checkpoint_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path checkpoint = dir / "checkpoint.jsonl";

    std::atomic<int> calls{0};
    CallbackBackend backend([&](const GenerationRequest& request) {
        ++calls;
        const std::string& prompt = request.prompt_text;
        const int n = std::stoi(prompt.substr(prompt.rfind(' ') + 1));
        return prefix_words(kReference, rule_prefix_len(n, request.config));
    });
    auto instances = rule_instances(4);
    const auto space = tiny_space();

    auto run_search = [&](ScoreCache* cache) {
        Evaluator evaluator(backend, {}, quick_protocol(), cache);
        auto candidates = greedy_select(prune(space, instances, evaluator, kNegInf), 10);
        return assign_targets(candidates, instances, evaluator, kDefaultConfig);
    };

    ScoreCache first;
    first.open_append(checkpoint);
    auto uninterrupted = run_search(&first);
    first.close();
    const int full_calls = calls.exchange(0);
    CHECK(full_calls > 0);

    // drop the tail of the checkpoint to simulate an interrupt
    std::vector<std::string> lines;
    {
        std::ifstream in(checkpoint);
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
    }
    {
        std::ofstream out(checkpoint, std::ios::trunc);
        for (std::size_t i = 0; i + lines.size() / 2 < lines.size(); ++i) {
            out << lines[i] << '\n';
        }
    }

    ScoreCache resumed;
    resumed.load(checkpoint);
    resumed.open_append(checkpoint);
    auto rerun = run_search(&resumed);
    resumed.close();
    CHECK(calls.load() < full_calls); // cache hits skipped backend calls
    REQUIRE(rerun.size() == uninterrupted.size());
    for (std::size_t i = 0; i < rerun.size(); ++i) {
        CHECK(rerun[i].target_config == uninterrupted[i].target_config);
        CHECK(rerun[i].best_score == uninterrupted[i].best_score);
        CHECK(rerun[i].default_score == uninterrupted[i].default_score);
    }

    // a fully cached run never touches the backend
    calls.exchange(0);
    ScoreCache warm;
    warm.load(checkpoint);
    auto cached = run_search(&warm);
    CHECK(calls.load() == 0);
    CHECK(cached.size() == uninterrupted.size());
    fs::remove_all(dir);
}

TEST_CASE("search output is invariant to evaluation parallelism") {
    auto backend = rule_backend();
    auto instances = rule_instances(6);
    const auto space = tiny_space();
    auto run_with = [&](int parallelism) {
        SamplingProtocol protocol = quick_protocol();
        protocol.parallelism = parallelism;
        Evaluator evaluator(backend, {}, protocol);
        auto candidates = greedy_select(prune(space, instances, evaluator, kNegInf), 10);
        return assign_targets(candidates, instances, evaluator, kDefaultConfig);
    };
    auto serial = run_with(1);
    auto parallel = run_with(8);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].target_config == parallel[i].target_config);
        CHECK(serial[i].best_score == parallel[i].best_score);
    }
}

TEST_CASE("plan files resolve per-task thresholds") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "hag_plan_test";
    fs::create_directories(dir);
    const fs::path path = dir / "plan.json";
    {
        std::ofstream out(path);
        out << R"({"prune_subset_size":5,"greedy_keep":10,"train_size":100,
                   "samples_per_config":10,
                   "thresholds":{"coinflip":50.0,"taboo":-1.5}})";
    }
    auto coin = load_plan_file(path, TaskKind::coinflip);
    CHECK(coin.prune_threshold == 50.0);
    CHECK(coin.greedy_keep == 10);
    auto taboo = load_plan_file(path, TaskKind::taboo);
    CHECK(taboo.prune_threshold == -1.5);
    auto other = load_plan_file(path, TaskKind::ynbw);
    CHECK(other.prune_threshold == kNegInf); // no entry: vacuous threshold
    {
        std::ofstream out(dir / "bad.json");
        out << R"({"greedy_keep":0})";
    }
    CHECK_THROWS_AS(load_plan_file(dir / "bad.json", TaskKind::coinflip), ValidationError);
    fs::remove_all(dir);
}
