#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hag/error.hpp"
#include "hag/tasks.hpp"

using namespace hag;

namespace {

TaskInstance coinflip_instance(const std::string& reference) {
    TaskInstance instance;
    instance.task_kind = TaskKind::coinflip;
    instance.instance_id = "cf-t";
    instance.input_text = "A coin is heads up. Is it still heads up?";
    instance.expected_answer = reference;
    return instance;
}

TaskInstance taboo_instance(std::vector<std::string> constraints) {
    TaskInstance instance;
    instance.task_kind = TaskKind::taboo;
    instance.instance_id = "tb-t";
    instance.input_text = "Explain the meaning of the word 'property'.";
    instance.constraints = std::move(constraints);
    return instance;
}

TaskInstance bee_instance(const std::string& letters) {
    TaskInstance instance;
    instance.task_kind = TaskKind::spelling_bee;
    instance.instance_id = "sb-t";
    instance.input_text = "List words.";
    instance.puzzle_letters = letters;
    return instance;
}

} // namespace

TEST_CASE("score_coinflip extracts the final yes/no") {
    CHECK(score_coinflip(coinflip_instance("no"),
                         "...so the coin is no longer heads up. Answer: no.")
              .value == 1.0);
    CHECK(score_coinflip(coinflip_instance("no"), "Yes, it is heads up.").value == 0.0);
    // "know" must not match "no"
    CHECK(score_coinflip(coinflip_instance("yes"),
                         "I know the coin was flipped an even number of times, so yes.")
              .value == 1.0);
    CHECK(score_coinflip(coinflip_instance("yes"), "nothing to report").value == 0.0);
    CHECK(score_coinflip(coinflip_instance("no"), "").value == 0.0);
    // the last occurrence wins
    CHECK(score_coinflip(coinflip_instance("no"), "yes yes yes but finally: no").value == 1.0);
}

TEST_CASE("score_spelling_bee matches the hand-computed fixture") {
    const Dictionary dict = make_dictionary({"badge", "decaf", "cab", "faced"});
    const TaskInstance instance = bee_instance("abcdefg");
    // badge(5) + decaf(5); "cab" is too short; puzzle max badge+decaf+faced = 15
    auto score = score_spelling_bee(instance, "badge decaf cab", dict);
    CHECK(score.detail["raw"] == 10);
    CHECK(score.detail["puzzle_max"] == 15);
    CHECK(score.value == doctest::Approx(10.0 / 15.0).epsilon(1e-12));

    SUBCASE("empty response scores zero") {
        CHECK(score_spelling_bee(instance, "", dict).value == 0.0);
    }
    SUBCASE("duplicates are credited once") {
        auto repeated = score_spelling_bee(instance, "badge badge badge", dict);
        CHECK(repeated.detail["raw"] == 5);
    }
    SUBCASE("words using other letters are rejected") {
        CHECK(score_spelling_bee(instance, "zebra", dict).value == 0.0);
    }
    SUBCASE("pangram earns the bonus") {
        const Dictionary pangram_dict = make_dictionary({"abcdefg", "badge"});
        auto bonus = score_spelling_bee(bee_instance("abcdefg"), "abcdefg", pangram_dict);
        CHECK(bonus.detail["raw"] == 7 + kPangramBonus);
        // puzzle max counts the pangram bonus too: 14 + 5
        CHECK(bonus.detail["puzzle_max"] == 19);
    }
    SUBCASE("normalized value is 1 only at puzzle max") {
        auto full = score_spelling_bee(instance, "badge decaf faced", dict);
        CHECK(full.value == doctest::Approx(1.0));
        auto partial = score_spelling_bee(instance, "badge", dict);
        CHECK(partial.value < 1.0);
    }
}

TEST_CASE("score_ynbw bans the four words as whole words") {
    TaskInstance instance;
    instance.task_kind = TaskKind::ynbw;
    instance.instance_id = "yn-t";
    instance.input_text = "What color is coal?";
    CHECK(score_ynbw(instance, "It is a very dark color.").value == 0.0);
    CHECK(score_ynbw(instance, "Black Friday follows Thanksgiving.").value == -1.0);
    CHECK(score_ynbw(instance, "Nothing is known about it.").value == 0.0);
    CHECK(score_ynbw(instance, "YES!").value == -1.0);
    CHECK(score_ynbw(instance, "whiteboard and blackboard").value == 0.0);
    CHECK(score_ynbw(instance, "no").value == -1.0);
}

TEST_CASE("score_taboo deducts once per distinct constraint") {
    const auto instance =
        taboo_instance({"property", "estate", "ownership", "land", "assets"});
    CHECK(score_taboo(instance, "Land you own is land that is yours, plus assets.").value ==
          -2.0);
    CHECK(score_taboo(instance, "A thing that belongs to someone.").value == 0.0);
    CHECK(score_taboo(instance, "property estate ownership land assets").value == -5.0);
    CHECK(score_taboo(instance, "Property! PROPERTY! property...").value == -1.0);
    // floor equals -|constraints|
    CHECK(score_taboo(instance, "property estate ownership land assets property land").value ==
          -5.0);
}

TEST_CASE("pig_latin_translate applies the word rules") {
    CHECK(pig_latin_translate("hello") == "ellohay");
    CHECK(pig_latin_translate("apple") == "appleway");
    CHECK(pig_latin_translate("string") == "ingstray");
    CHECK(pig_latin_translate("open the door") == "openway ethay oorday");
    CHECK(pig_latin_translate("Open The Door") == "openway ethay oorday");
    CHECK(pig_latin_translate("rhythm") == "rhythmay"); // no vowel: whole word moves
}

TEST_CASE("score_pig_latin is BLEU against the reference") {
    TaskInstance instance;
    instance.task_kind = TaskKind::pig_latin;
    instance.instance_id = "pl-t";
    instance.input_text = "Translate: hello world good";
    instance.expected_answer = "ellohay orldway oodgay";
    CHECK(score_pig_latin(instance, "ellohay orldway oodgay").value == doctest::Approx(1.0));
    CHECK(score_pig_latin(instance, "zzz qqq").value == 0.0);
    // frozen from the BLEU oracle: two of three reference tokens, BP exp(-1/2)
    CHECK(score_pig_latin(instance, "ellohay orldway").value ==
          doctest::Approx(0.6065306597126334).epsilon(1e-9));
}

TEST_CASE("translate-then-score is exact") {
    for (const char* sentence : {"open the door", "bright red balloon", "we sing"}) {
        TaskInstance instance;
        instance.task_kind = TaskKind::pig_latin;
        instance.instance_id = "pl-x";
        instance.input_text = sentence;
        instance.expected_answer = pig_latin_translate(sentence);
        CHECK(score_pig_latin(instance, pig_latin_translate(sentence)).value ==
              doctest::Approx(1.0));
    }
}

TEST_CASE("score_multiarith takes the last integer-valued number") {
    TaskInstance instance;
    instance.task_kind = TaskKind::multiarith;
    instance.instance_id = "ma-t";
    instance.input_text = "2 + 40?";
    instance.numeric_answer = 42;
    CHECK(score_multiarith(instance, "The answer is 42.").value == 1.0);
    CHECK(score_multiarith(instance, "So the total = 41.").value == 0.0);
    instance.numeric_answer = 40;
    CHECK(score_multiarith(instance, "42 minus 2 gives 40").value == 1.0);
    instance.numeric_answer = 1000;
    CHECK(score_multiarith(instance, "exactly 1,000 items").value == 1.0);
    instance.numeric_answer = -7;
    CHECK(score_multiarith(instance, "the result is -7").value == 1.0);
    instance.numeric_answer = 3;
    CHECK(score_multiarith(instance, "3.5 is wrong but 3 that is, 3.0, fits").value == 1.0);
    CHECK(score_multiarith(instance, "no numbers here").value == 0.0);
}

TEST_CASE("scorers stay inside their ranges on fuzzed responses") {
    Rng rng(4242);
    const std::vector<std::string> pool{"yes", "no",    "black", "white", "land",  "assets",
                                        "42", "badge", "decaf", "the",   "7",     "-3",
                                        "3.5", "know",  "snow",  "1,000", "faced", "zzz"};
    const Dictionary dict = make_dictionary({"badge", "decaf", "faced", "cabbage"});
    const auto tb = taboo_instance({"land", "assets", "ownership"});
    const auto cf = coinflip_instance("yes");
    const auto sb = bee_instance("abcdefg");
    TaskInstance yn;
    yn.task_kind = TaskKind::ynbw;
    yn.instance_id = "yn-f";
    yn.input_text = "q";
    TaskInstance pl;
    pl.task_kind = TaskKind::pig_latin;
    pl.instance_id = "pl-f";
    pl.input_text = "q";
    pl.expected_answer = "ellohay orldway";
    TaskInstance ma;
    ma.task_kind = TaskKind::multiarith;
    ma.instance_id = "ma-f";
    ma.input_text = "q";
    ma.numeric_answer = 42;

    for (int i = 0; i < 10000; ++i) {
        std::string response;
        const std::size_t words = uniform_index(rng, 24);
        for (std::size_t w = 0; w < words; ++w) {
            response += pool[uniform_index(rng, pool.size())];
            response += (uniform_index(rng, 6) == 0) ? '\n' : ' ';
        }
        const double cf_v = score_coinflip(cf, response).value;
        CHECK((cf_v == 0.0 || cf_v == 1.0));
        const double sb_v = score_spelling_bee(sb, response, dict).value;
        CHECK(sb_v >= 0.0);
        CHECK(sb_v <= 1.0);
        const double yn_v = score_ynbw(yn, response).value;
        CHECK((yn_v == 0.0 || yn_v == -1.0));
        const double tb_v = score_taboo(tb, response).value;
        CHECK(tb_v <= 0.0);
        CHECK(tb_v >= -3.0);
        const double pl_v = score_pig_latin(pl, response).value;
        CHECK(pl_v >= 0.0);
        CHECK(pl_v <= 1.0);
        const double ma_v = score_multiarith(ma, response).value;
        CHECK((ma_v == 0.0 || ma_v == 1.0));
    }
}

TEST_CASE("metric_scale maps raw ranges to the reporting scale") {
    CHECK(metric_scale(TaskKind::coinflip) == 100.0);
    CHECK(metric_scale(TaskKind::spelling_bee) == 100.0);
    CHECK(metric_scale(TaskKind::ynbw) == 100.0);
    CHECK(metric_scale(TaskKind::taboo) == 1.0);
    CHECK(metric_scale(TaskKind::pig_latin) == 100.0);
    CHECK(metric_scale(TaskKind::multiarith) == 100.0);
}

TEST_CASE("instance validation enforces reference shapes") {
    CHECK_THROWS_AS(validate_instance(coinflip_instance("maybe")), DataError);
    CHECK_THROWS_AS(validate_instance(taboo_instance({"a", "b"})), DataError);
    CHECK_THROWS_AS(validate_instance(taboo_instance(std::vector<std::string>(11, "w"))),
                    DataError);
    CHECK_THROWS_AS(validate_instance(bee_instance("abcdef")), DataError);  // 6 letters
    CHECK_THROWS_AS(validate_instance(bee_instance("aabcdef")), DataError); // repeat
    CHECK_NOTHROW(validate_instance(bee_instance("abcdefg")));
    CHECK_NOTHROW(validate_instance(taboo_instance({"a", "b", "c"})));
}

TEST_CASE("load_instances validates records and names the line") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "hag_tasks_test";
    fs::create_directories(dir);
    const fs::path good = dir / "good.jsonl";
    {
        std::ofstream out(good);
        out << R"({"task":"coinflip","id":"a","input":"flip?","reference":"yes"})" << "\n";
        out << R"({"task":"taboo","id":"b","input":"explain","reference":["x","y","z"]})" << "\n";
        out << R"({"task":"multiarith","id":"c","input":"2+2","reference":4})" << "\n";
        out << R"({"task":"ynbw","id":"d","input":"color?","reference":null})" << "\n";
    }
    auto instances = load_instances(good);
    REQUIRE(instances.size() == 4);
    CHECK(instances[0].expected_answer == "yes");
    CHECK(instances[1].constraints.size() == 3);
    CHECK(instances[2].numeric_answer == 4);

    const fs::path missing_field = dir / "missing.jsonl";
    {
        std::ofstream out(missing_field);
        out << R"({"task":"coinflip","id":"a","reference":"yes"})" << "\n";
    }
    CHECK_THROWS_WITH_AS(load_instances(missing_field),
                         doctest::Contains("missing.jsonl:1"), DataError);
    CHECK_THROWS_WITH_AS(load_instances(missing_field), doctest::Contains("input"), DataError);

    const fs::path bad_ref = dir / "badref.jsonl";
    {
        std::ofstream out(bad_ref);
        out << R"({"task":"coinflip","id":"a","input":"x","reference":"yes"})" << "\n";
        out << R"({"task":"multiarith","id":"b","input":"x","reference":"four"})" << "\n";
    }
    CHECK_THROWS_WITH_AS(load_instances(bad_ref), doctest::Contains("badref.jsonl:2"),
                         DataError);
    CHECK_THROWS_AS(load_instances(dir / "absent.jsonl"), DataError);
    CHECK_THROWS_AS(load_instances(good, TaskKind::taboo), DataError);
    fs::remove_all(dir);
}

TEST_CASE("instances round-trip through JSONL") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "hag_tasks_roundtrip";
    fs::create_directories(dir);
    Rng rng(7);
    const Dictionary dict = make_dictionary({"badge", "decaf", "faced", "water", "house"});
    std::vector<TaskInstance> all;
    for (auto kind : {TaskKind::coinflip, TaskKind::pig_latin, TaskKind::spelling_bee}) {
        auto batch = generate_instances(kind, 4, rng, &dict);
        all.insert(all.end(), batch.begin(), batch.end());
    }
    const fs::path path = dir / "mixed.jsonl";
    write_instances(path, all);
    auto loaded = load_instances(path);
    REQUIRE(loaded.size() == all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        CHECK(loaded[i].instance_id == all[i].instance_id);
        CHECK(loaded[i].input_text == all[i].input_text);
        CHECK(loaded[i].expected_answer == all[i].expected_answer);
        CHECK(loaded[i].puzzle_letters == all[i].puzzle_letters);
    }
    fs::remove_all(dir);
}

TEST_CASE("coinflip generator ground truth matches brute-force simulation") {
    Rng rng(99);
    auto instances = generate_instances(TaskKind::coinflip, 200, rng);
    for (const auto& instance : instances) {
        // independent oracle: replay the stated actions ("flips the coin"
        // only appears in affirmative sentences; negations say "flip")
        bool heads = true;
        std::size_t pos = 0;
        while ((pos = instance.input_text.find(" flips the coin.", pos)) != std::string::npos) {
            heads = !heads;
            pos += 1;
        }
        CHECK(instance.expected_answer == (heads ? "yes" : "no"));
    }
}

TEST_CASE("pig latin generator references come from the translator") {
    Rng rng(5);
    auto instances = generate_instances(TaskKind::pig_latin, 30, rng);
    for (const auto& instance : instances) {
        const std::string prefix = "Translate the following sentence into Pig Latin: ";
        REQUIRE(instance.input_text.rfind(prefix, 0) == 0);
        CHECK(instance.expected_answer ==
              pig_latin_translate(instance.input_text.substr(prefix.size())));
    }
}

TEST_CASE("spelling bee generator yields solvable puzzles") {
    Rng rng(13);
    const Dictionary dict = make_dictionary({"badge", "decaf", "faced", "added", "ceded"});
    auto instances = generate_instances(TaskKind::spelling_bee, 20, rng, &dict);
    for (const auto& instance : instances) {
        CHECK(instance.puzzle_letters.size() == 7);
        CHECK(spelling_bee_puzzle_max(instance.puzzle_letters, dict) > 0);
    }
    CHECK_THROWS_AS(generate_instances(TaskKind::spelling_bee, 1, rng, nullptr),
                    ValidationError);
}

TEST_CASE("generators are deterministic given the seed and reject unsupported kinds") {
    Rng a(1), b(1);
    auto first = generate_instances(TaskKind::coinflip, 10, a);
    auto second = generate_instances(TaskKind::coinflip, 10, b);
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].input_text == second[i].input_text);
        CHECK(first[i].expected_answer == second[i].expected_answer);
    }
    Rng rng(2);
    CHECK_THROWS_AS(generate_instances(TaskKind::taboo, 3, rng), ValidationError);
    CHECK_THROWS_AS(generate_instances(TaskKind::coinflip, 0, rng), ValidationError);
}

TEST_CASE("dictionary loading") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "hag_dict_test";
    fs::create_directories(dir);
    const fs::path path = dir / "words.txt";
    {
        std::ofstream out(path);
        out << "Badge\ndecaf\n\nfaced\nbadge\n";
    }
    auto dict = load_dictionary(path);
    CHECK(dict.words.size() == 3); // lowercased, deduplicated, blanks dropped
    CHECK(dict.lookup.count("badge") == 1);
    const fs::path empty = dir / "empty.txt";
    { std::ofstream out(empty); }
    CHECK_THROWS_AS(load_dictionary(empty), DataError);
    fs::remove_all(dir);
}
