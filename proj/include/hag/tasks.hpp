#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "hag/rng.hpp"

namespace hag {

enum class TaskKind { coinflip, spelling_bee, ynbw, taboo, pig_latin, multiarith };

std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view text); // throws ValidationError

// Factor between a scorer's raw range and the reporting scale
// (100 for the percent-range tasks, 1 for taboo).
double metric_scale(TaskKind kind);

// One scored unit. Only the reference fields that match task_kind are set:
//   coinflip    expected_answer "yes"/"no"
//   spelling_bee puzzle_letters (7 distinct) + optional center_letter
//   ynbw        (none)
//   taboo       constraints (3..10 words)
//   pig_latin   expected_answer (reference translation)
//   multiarith  numeric_answer
struct TaskInstance {
    TaskKind task_kind = TaskKind::coinflip;
    std::string instance_id;
    std::string input_text;
    std::string expected_answer;
    std::vector<std::string> constraints;
    std::string puzzle_letters;
    char center_letter = '\0';
    long long numeric_answer = 0;
};

void validate_instance(const TaskInstance& instance); // throws DataError

struct TaskScore {
    double value = 0.0; // inside the task's raw range
    TaskKind task_kind = TaskKind::coinflip;
    nlohmann::json detail; // per-rule breakdown
};

struct Dictionary {
    std::vector<std::string> words;
    std::unordered_set<std::string> lookup;
};

Dictionary load_dictionary(const std::filesystem::path& path);
Dictionary make_dictionary(std::vector<std::string> words);

// 1 iff the last whole-word "yes"/"no" in the response equals the reference.
TaskScore score_coinflip(const TaskInstance& instance, const std::string& response);

// Sums lengths of distinct valid words (>= 5 letters, only puzzle letters,
// in the dictionary) plus 7 per distinct pangram; value is raw / puzzle_max
// with puzzle_max brute-forced over the dictionary.
TaskScore score_spelling_bee(const TaskInstance& instance, const std::string& response,
                             const Dictionary& dictionary);

// -1 if the response contains "yes", "no", "black" or "white" as a word.
TaskScore score_ynbw(const TaskInstance& instance, const std::string& response);

// -1 per distinct constraint word present; repeats of a word cost nothing.
TaskScore score_taboo(const TaskInstance& instance, const std::string& response);

// Sentence BLEU against the reference translation.
TaskScore score_pig_latin(const TaskInstance& instance, const std::string& response);

// 1 iff the last integer-valued number in the response equals the reference.
TaskScore score_multiarith(const TaskInstance& instance, const std::string& response);

// Vowel-initial words get "way"; otherwise the leading consonant cluster
// moves to the end followed by "ay". Output is lowercase.
std::string pig_latin_translate(std::string_view english);

// Bonus for a word that uses all seven letters.
inline constexpr int kPangramBonus = 7;

// Best achievable raw score for a puzzle, brute-forced over the dictionary.
int spelling_bee_puzzle_max(const std::string& puzzle_letters, const Dictionary& dictionary);

struct ScoringContext {
    const Dictionary* dictionary = nullptr; // required for spelling_bee
};

TaskScore score_response(const TaskInstance& instance, const std::string& response,
                         const ScoringContext& context = {});

// JSONL loader: {"task":..., "id":..., "input":..., "reference":...}.
// Malformed records raise DataError naming the line and field.
std::vector<TaskInstance> load_instances(const std::filesystem::path& path,
                                         std::optional<TaskKind> expected_kind = {});

void write_instances(const std::filesystem::path& path,
                     const std::vector<TaskInstance>& instances);

nlohmann::json instance_to_json(const TaskInstance& instance);

// Synthesizes instances with computed ground truth. Supported kinds:
// coinflip, pig_latin, and (given a dictionary) spelling_bee.
std::vector<TaskInstance> generate_instances(TaskKind kind, int count, Rng& rng,
                                             const Dictionary* dictionary = nullptr);

} // namespace hag
