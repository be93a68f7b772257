#include "hag/tasks.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "hag/error.hpp"
#include "hag/metrics.hpp"

namespace hag {

using nlohmann::json;

std::string_view to_string(TaskKind kind) {
    switch (kind) {
    case TaskKind::coinflip: return "coinflip";
    case TaskKind::spelling_bee: return "spelling_bee";
    case TaskKind::ynbw: return "ynbw";
    case TaskKind::taboo: return "taboo";
    case TaskKind::pig_latin: return "pig_latin";
    case TaskKind::multiarith: return "multiarith";
    }
    return "coinflip";
}

TaskKind task_kind_from_string(std::string_view text) {
    if (text == "coinflip") return TaskKind::coinflip;
    if (text == "spelling_bee") return TaskKind::spelling_bee;
    if (text == "ynbw") return TaskKind::ynbw;
    if (text == "taboo") return TaskKind::taboo;
    if (text == "pig_latin") return TaskKind::pig_latin;
    if (text == "multiarith") return TaskKind::multiarith;
    throw ValidationError("unknown task kind: " + std::string(text));
}

double metric_scale(TaskKind kind) {
    return kind == TaskKind::taboo ? 1.0 : 100.0;
}

namespace {

std::string lower(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

// lowercase alphabetic runs; digits and punctuation are boundaries
std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        const unsigned char uc = static_cast<unsigned char>(c);
        if (std::isalpha(uc)) {
            current += static_cast<char>(std::tolower(uc));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

bool seven_distinct_letters(const std::string& letters) {
    if (letters.size() != 7) {
        return false;
    }
    std::set<char> distinct;
    for (char c : letters) {
        if (!std::islower(static_cast<unsigned char>(c))) {
            return false;
        }
        distinct.insert(c);
    }
    return distinct.size() == 7;
}

} // namespace

void validate_instance(const TaskInstance& instance) {
    const std::string where = "instance '" + instance.instance_id + "': ";
    if (instance.instance_id.empty()) {
        throw DataError("instance with empty id");
    }
    if (instance.input_text.empty()) {
        throw DataError(where + "empty input_text");
    }
    switch (instance.task_kind) {
    case TaskKind::coinflip: {
        const std::string ref = lower(instance.expected_answer);
        if (ref != "yes" && ref != "no") {
            throw DataError(where + "coinflip reference must be \"yes\" or \"no\"");
        }
        break;
    }
    case TaskKind::spelling_bee:
        if (!seven_distinct_letters(instance.puzzle_letters)) {
            throw DataError(where + "spelling_bee needs exactly 7 distinct lowercase letters");
        }
        if (instance.center_letter != '\0' &&
            instance.puzzle_letters.find(instance.center_letter) == std::string::npos) {
            throw DataError(where + "center letter is not one of the puzzle letters");
        }
        break;
    case TaskKind::ynbw:
        break;
    case TaskKind::taboo:
        if (instance.constraints.size() < 3 || instance.constraints.size() > 10) {
            throw DataError(where + "taboo constraint list length must be in [3, 10]");
        }
        for (const auto& w : instance.constraints) {
            if (w.empty()) {
                throw DataError(where + "empty taboo constraint word");
            }
        }
        break;
    case TaskKind::pig_latin:
        if (instance.expected_answer.empty()) {
            throw DataError(where + "pig_latin reference translation missing");
        }
        break;
    case TaskKind::multiarith:
        break;
    }
}

Dictionary make_dictionary(std::vector<std::string> words) {
    Dictionary dict;
    dict.words.reserve(words.size());
    for (auto& w : words) {
        std::string lw = lower(w);
        if (lw.empty()) {
            continue;
        }
        if (dict.lookup.insert(lw).second) {
            dict.words.push_back(std::move(lw));
        }
    }
    if (dict.words.empty()) {
        throw DataError("dictionary has no words");
    }
    return dict;
}

Dictionary load_dictionary(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open dictionary " + path.string());
    }
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
            line.pop_back();
        }
        if (!line.empty()) {
            words.push_back(line);
        }
    }
    if (words.empty()) {
        throw DataError("dictionary " + path.string() + " is empty");
    }
    return make_dictionary(std::move(words));
}

TaskScore score_coinflip(const TaskInstance& instance, const std::string& response) {
    const std::string reference = lower(instance.expected_answer);
    std::string last;
    for (const auto& token : word_tokens(response)) {
        if (token == "yes" || token == "no") {
            last = token;
        }
    }
    TaskScore score;
    score.task_kind = TaskKind::coinflip;
    score.value = (!last.empty() && last == reference) ? 1.0 : 0.0;
    score.detail = {{"extracted", last}, {"reference", reference}};
    return score;
}

namespace {

bool word_uses_only(const std::string& word, const std::string& letters) {
    return std::all_of(word.begin(), word.end(),
                       [&](char c) { return letters.find(c) != std::string::npos; });
}

bool is_pangram(const std::string& word, const std::string& letters) {
    return std::all_of(letters.begin(), letters.end(),
                       [&](char c) { return word.find(c) != std::string::npos; });
}

bool valid_bee_word(const std::string& word, const std::string& letters,
                    const Dictionary& dictionary) {
    return word.size() >= 5 && word_uses_only(word, letters) && dictionary.lookup.count(word) > 0;
}

} // namespace

int spelling_bee_puzzle_max(const std::string& puzzle_letters, const Dictionary& dictionary) {
    int total = 0;
    for (const auto& word : dictionary.words) {
        if (valid_bee_word(word, puzzle_letters, dictionary)) {
            total += static_cast<int>(word.size());
            if (is_pangram(word, puzzle_letters)) {
                total += kPangramBonus;
            }
        }
    }
    return total;
}

TaskScore score_spelling_bee(const TaskInstance& instance, const std::string& response,
                             const Dictionary& dictionary) {
    if (dictionary.words.empty()) {
        throw DataError("spelling bee scoring needs a non-empty dictionary");
    }
    std::set<std::string> credited;
    for (const auto& token : word_tokens(response)) {
        if (valid_bee_word(token, instance.puzzle_letters, dictionary)) {
            credited.insert(token);
        }
    }
    int raw = 0;
    std::vector<std::string> pangrams;
    for (const auto& word : credited) {
        raw += static_cast<int>(word.size());
        if (is_pangram(word, instance.puzzle_letters)) {
            raw += kPangramBonus;
            pangrams.push_back(word);
        }
    }
    const int best = spelling_bee_puzzle_max(instance.puzzle_letters, dictionary);
    TaskScore score;
    score.task_kind = TaskKind::spelling_bee;
    score.value = best > 0 ? static_cast<double>(raw) / best : 0.0;
    score.detail = {{"credited", std::vector<std::string>(credited.begin(), credited.end())},
                    {"pangrams", pangrams},
                    {"raw", raw},
                    {"puzzle_max", best}};
    return score;
}

TaskScore score_ynbw(const TaskInstance&, const std::string& response) {
    static const std::set<std::string> banned{"yes", "no", "black", "white"};
    std::vector<std::string> hits;
    for (const auto& token : word_tokens(response)) {
        if (banned.count(token) && std::find(hits.begin(), hits.end(), token) == hits.end()) {
            hits.push_back(token);
        }
    }
    TaskScore score;
    score.task_kind = TaskKind::ynbw;
    score.value = hits.empty() ? 0.0 : -1.0;
    score.detail = {{"hits", hits}};
    return score;
}

TaskScore score_taboo(const TaskInstance& instance, const std::string& response) {
    if (instance.constraints.empty()) {
        throw ValidationError("taboo instance without constraints");
    }
    std::set<std::string> present;
    std::set<std::string> constraints;
    for (const auto& c : instance.constraints) {
        constraints.insert(lower(c));
    }
    for (const auto& token : word_tokens(response)) {
        if (constraints.count(token)) {
            present.insert(token);
        }
    }
    TaskScore score;
    score.task_kind = TaskKind::taboo;
    score.value = -static_cast<double>(present.size());
    score.detail = {{"hits", std::vector<std::string>(present.begin(), present.end())},
                    {"constraint_count", instance.constraints.size()}};
    return score;
}

TaskScore score_pig_latin(const TaskInstance& instance, const std::string& response) {
    TaskScore score;
    score.task_kind = TaskKind::pig_latin;
    score.value = bleu(response, {instance.expected_answer});
    score.detail = {{"bleu", score.value}};
    return score;
}

namespace {

// Last integer-valued number in the text; handles signs, thousands
// separators, and integral decimals like "42.0".
std::optional<long long> last_integer(const std::string& text) {
    std::optional<long long> result;
    const std::size_t n = text.size();
    std::size_t i = 0;
    auto is_digit = [&](std::size_t pos) {
        return pos < n && std::isdigit(static_cast<unsigned char>(text[pos]));
    };
    while (i < n) {
        bool negative = false;
        std::size_t start = i;
        if ((text[i] == '-' || text[i] == '+') && is_digit(i + 1) &&
            (i == 0 || !std::isdigit(static_cast<unsigned char>(text[i - 1])))) {
            negative = text[i] == '-';
            start = i + 1;
        } else if (!is_digit(i)) {
            ++i;
            continue;
        }
        // integer part, allowing comma groups of exactly three digits
        unsigned long long magnitude = 0;
        bool overflow = false;
        std::size_t pos = start;
        while (pos < n) {
            if (std::isdigit(static_cast<unsigned char>(text[pos]))) {
                magnitude = magnitude * 10 + static_cast<unsigned long long>(text[pos] - '0');
                if (magnitude > static_cast<unsigned long long>(1) << 62) {
                    overflow = true;
                }
                ++pos;
            } else if (text[pos] == ',' && is_digit(pos + 1) && is_digit(pos + 2) &&
                       is_digit(pos + 3) && !is_digit(pos + 4)) {
                ++pos;
            } else {
                break;
            }
        }
        // fractional part; the number only counts if it is integer-valued
        bool integral = true;
        if (pos < n && text[pos] == '.' && is_digit(pos + 1)) {
            ++pos;
            while (is_digit(pos)) {
                if (text[pos] != '0') {
                    integral = false;
                }
                ++pos;
            }
        }
        if (integral && !overflow) {
            const long long value = static_cast<long long>(magnitude);
            result = negative ? -value : value;
        }
        i = pos > i ? pos : i + 1;
    }
    return result;
}

} // namespace

TaskScore score_multiarith(const TaskInstance& instance, const std::string& response) {
    const auto extracted = last_integer(response);
    TaskScore score;
    score.task_kind = TaskKind::multiarith;
    score.value = (extracted && *extracted == instance.numeric_answer) ? 1.0 : 0.0;
    score.detail = {{"extracted", extracted ? json(*extracted) : json(nullptr)},
                    {"reference", instance.numeric_answer}};
    return score;
}

std::string pig_latin_translate(std::string_view english) {
    static const std::string vowels = "aeiou";
    std::string out;
    for (const auto& word : word_tokens(english)) {
        if (!out.empty()) {
            out += ' ';
        }
        if (vowels.find(word.front()) != std::string::npos) {
            out += word + "way";
            continue;
        }
        std::size_t split = word.find_first_of(vowels);
        if (split == std::string::npos) {
            split = word.size();
        }
        out += word.substr(split) + word.substr(0, split) + "ay";
    }
    return out;
}

TaskScore score_response(const TaskInstance& instance, const std::string& response,
                         const ScoringContext& context) {
    switch (instance.task_kind) {
    case TaskKind::coinflip: return score_coinflip(instance, response);
    case TaskKind::spelling_bee:
        if (!context.dictionary) {
            throw DataError("spelling_bee scoring requires a dictionary");
        }
        return score_spelling_bee(instance, response, *context.dictionary);
    case TaskKind::ynbw: return score_ynbw(instance, response);
    case TaskKind::taboo: return score_taboo(instance, response);
    case TaskKind::pig_latin: return score_pig_latin(instance, response);
    case TaskKind::multiarith: return score_multiarith(instance, response);
    }
    throw ValidationError("unhandled task kind");
}

namespace {

[[noreturn]] void record_error(const std::filesystem::path& path, std::size_t line,
                               const std::string& what) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": " + what);
}

} // namespace

std::vector<TaskInstance> load_instances(const std::filesystem::path& path,
                                         std::optional<TaskKind> expected_kind) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open task file " + path.string());
    }
    std::vector<TaskInstance> instances;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const json record = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (record.is_discarded() || !record.is_object()) {
            record_error(path, line_number, "not a JSON object");
        }
        for (const char* field : {"task", "id", "input"}) {
            if (!record.contains(field)) {
                record_error(path, line_number, std::string("missing field \"") + field + "\"");
            }
        }
        if (!record.contains("reference")) {
            record_error(path, line_number, "missing field \"reference\"");
        }
        TaskInstance instance;
        try {
            instance.task_kind = task_kind_from_string(record.at("task").get<std::string>());
            instance.instance_id = record.at("id").get<std::string>();
            instance.input_text = record.at("input").get<std::string>();
            const json& ref = record.at("reference");
            switch (instance.task_kind) {
            case TaskKind::coinflip:
            case TaskKind::pig_latin:
                instance.expected_answer = ref.get<std::string>();
                break;
            case TaskKind::spelling_bee:
                instance.puzzle_letters = lower(ref.at("letters").get<std::string>());
                if (ref.contains("center") && ref.at("center").is_string() &&
                    !ref.at("center").get<std::string>().empty()) {
                    instance.center_letter = lower(ref.at("center").get<std::string>())[0];
                }
                break;
            case TaskKind::ynbw:
                break;
            case TaskKind::taboo:
                instance.constraints = ref.get<std::vector<std::string>>();
                break;
            case TaskKind::multiarith:
                if (!ref.is_number_integer()) {
                    record_error(path, line_number, "field \"reference\" must be an integer");
                }
                instance.numeric_answer = ref.get<long long>();
                break;
            }
        } catch (const json::exception& e) {
            record_error(path, line_number, std::string("field \"reference\": ") + e.what());
        } catch (const ValidationError& e) {
            record_error(path, line_number, e.what());
        }
        try {
            validate_instance(instance);
        } catch (const DataError& e) {
            record_error(path, line_number, e.what());
        }
        if (expected_kind && instance.task_kind != *expected_kind) {
            record_error(path, line_number, "field \"task\": unexpected task kind");
        }
        instances.push_back(std::move(instance));
    }
    if (instances.empty()) {
        throw DataError("task file " + path.string() + " has no instances");
    }
    return instances;
}

json instance_to_json(const TaskInstance& instance) {
    json record;
    record["task"] = std::string(to_string(instance.task_kind));
    record["id"] = instance.instance_id;
    record["input"] = instance.input_text;
    switch (instance.task_kind) {
    case TaskKind::coinflip:
    case TaskKind::pig_latin:
        record["reference"] = instance.expected_answer;
        break;
    case TaskKind::spelling_bee: {
        json ref;
        ref["letters"] = instance.puzzle_letters;
        if (instance.center_letter != '\0') {
            ref["center"] = std::string(1, instance.center_letter);
        }
        record["reference"] = ref;
        break;
    }
    case TaskKind::ynbw:
        record["reference"] = nullptr;
        break;
    case TaskKind::taboo:
        record["reference"] = instance.constraints;
        break;
    case TaskKind::multiarith:
        record["reference"] = instance.numeric_answer;
        break;
    }
    return record;
}

void write_instances(const std::filesystem::path& path,
                     const std::vector<TaskInstance>& instances) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot write task file " + path.string());
    }
    for (const auto& instance : instances) {
        out << instance_to_json(instance).dump() << '\n';
    }
}

namespace {

const std::vector<std::string>& flip_names() {
    static const std::vector<std::string> names{"Ava",  "Ben",   "Carla", "Dev",
                                                "Elif", "Frank", "Gita",  "Hugo"};
    return names;
}

const std::vector<std::string>& sentence_pool() {
    static const std::vector<std::string> sentences{
        "open the door",
        "close the window now",
        "the quick brown fox jumps",
        "please bring some fresh water",
        "children play outside after school",
        "my friend likes green apples",
        "we walk to the market",
        "birds sing in the morning",
        "she reads a long book",
        "plant the seeds in spring",
        "the train leaves at noon",
        "keep the change",
    };
    return sentences;
}

TaskInstance make_coinflip(int index, Rng& rng) {
    const int actions = 2 + static_cast<int>(uniform_index(rng, 5));
    bool heads_up = true;
    std::string text = "A coin is heads up.";
    int flips = 0;
    for (int a = 0; a < actions; ++a) {
        const auto& name = flip_names()[uniform_index(rng, flip_names().size())];
        if (uniform_index(rng, 2) == 0) {
            text += " " + name + " flips the coin.";
            heads_up = !heads_up;
            ++flips;
        } else {
            text += " " + name + " does not flip the coin.";
        }
    }
    text += " Is the coin still heads up? Answer yes or no.";
    TaskInstance instance;
    instance.task_kind = TaskKind::coinflip;
    instance.instance_id = "cf-" + std::to_string(index);
    instance.input_text = text;
    instance.expected_answer = (flips % 2 == 0) ? "yes" : "no";
    return instance;
}

TaskInstance make_pig_latin(int index, Rng& rng) {
    const auto& sentence = sentence_pool()[uniform_index(rng, sentence_pool().size())];
    TaskInstance instance;
    instance.task_kind = TaskKind::pig_latin;
    instance.instance_id = "pl-" + std::to_string(index);
    instance.input_text = "Translate the following sentence into Pig Latin: " + sentence;
    instance.expected_answer = pig_latin_translate(sentence);
    return instance;
}

TaskInstance make_spelling_bee(int index, Rng& rng, const Dictionary& dictionary) {
    // seed the puzzle from a dictionary word so at least one answer exists
    std::vector<const std::string*> seeds;
    for (const auto& word : dictionary.words) {
        std::set<char> distinct(word.begin(), word.end());
        if (word.size() >= 5 && distinct.size() <= 7) {
            seeds.push_back(&word);
        }
    }
    if (seeds.empty()) {
        throw DataError("dictionary has no word usable as a spelling bee seed");
    }
    const std::string& seed = *seeds[uniform_index(rng, seeds.size())];
    std::set<char> letters(seed.begin(), seed.end());
    while (letters.size() < 7) {
        letters.insert(static_cast<char>('a' + uniform_index(rng, 26)));
    }
    std::string puzzle(letters.begin(), letters.end());
    TaskInstance instance;
    instance.task_kind = TaskKind::spelling_bee;
    instance.instance_id = "sb-" + std::to_string(index);
    instance.puzzle_letters = puzzle;
    instance.center_letter = seed[uniform_index(rng, seed.size())];
    std::string shown;
    for (char c : puzzle) {
        if (!shown.empty()) {
            shown += ' ';
        }
        shown += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    instance.input_text = "Using only the letters " + shown +
                          ", list as many words of five or more letters as you can. "
                          "Letters may be repeated.";
    return instance;
}

} // namespace

std::vector<TaskInstance> generate_instances(TaskKind kind, int count, Rng& rng,
                                             const Dictionary* dictionary) {
    if (count < 1) {
        throw ValidationError("generate_instances needs count >= 1");
    }
    std::vector<TaskInstance> instances;
    instances.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        switch (kind) {
        case TaskKind::coinflip:
            instances.push_back(make_coinflip(i, rng));
            break;
        case TaskKind::pig_latin:
            instances.push_back(make_pig_latin(i, rng));
            break;
        case TaskKind::spelling_bee:
            if (!dictionary) {
                throw ValidationError("spelling_bee generation requires a dictionary");
            }
            instances.push_back(make_spelling_bee(i, rng, *dictionary));
            break;
        default:
            throw ValidationError("no generator for task '" +
                                  std::string(to_string(kind)) +
                                  "'; load instances from a file instead");
        }
        validate_instance(instances.back());
    }
    return instances;
}

} // namespace hag
