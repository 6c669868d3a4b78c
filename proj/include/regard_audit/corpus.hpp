#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "regard_audit/labels.hpp"
#include "regard_audit/rng.hpp"
#include "regard_audit/templates.hpp"
#include "regard_audit/text.hpp"

namespace regard_audit {

/// One generated continuation. `masked_text` is always
/// `mask_demographic(raw_text, demographic(group))`.
struct Sample {
    std::string id; // "<template id>/<nnnn>"
    std::string template_id;
    BiasContext context = BiasContext::respect;
    Group group = Group::female;
    std::string raw_text;
    std::string masked_text;
    bool truncated = false;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct LabeledSample {
    std::string id;
    std::string masked_text;
    PolarityLabel sentiment = PolarityLabel::neutral;
    PolarityLabel regard = PolarityLabel::neutral;

    friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

struct Diagnostic {
    std::size_t line = 0;
    std::string message;
};

struct SampleOrigin {
    std::string template_id;
    std::string placeholder_id;
    Group group;
};

/// Recovers the complete template from a sample id of the form
/// "<placeholder id>/<group>/<index>".
inline std::optional<SampleOrigin> parse_sample_id(std::string_view id) {
    auto parts = text::split(id, '/');
    if (parts.size() != 3) return std::nullopt;
    auto group = parse_group(parts[1]);
    if (!group || parts[0].empty()) return std::nullopt;
    return SampleOrigin{std::string(parts[0]) + "/" + std::string(parts[1]), std::string(parts[0]), *group};
}

inline std::optional<BiasContext> context_of(std::string_view sample_id, const TemplateSet& templates) {
    auto origin = parse_sample_id(sample_id);
    if (!origin) return std::nullopt;
    const auto* p = templates.find_placeholder(origin->placeholder_id);
    if (!p) return std::nullopt;
    return p->context;
}

// ---------------------------------------------------------------------------
// Sentence truncation
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& sentence_abbreviations() {
    static const std::vector<std::string> kAbbreviations = {"dr.",  "mr.",   "mrs.", "ms.", "st.",
                                                            "vs.",  "etc.",  "e.g.", "i.e.", "u.s."};
    return kAbbreviations;
}

namespace detail {

inline bool is_terminator(char c) noexcept { return c == '.' || c == '!' || c == '?'; }
inline bool is_closer(char c) noexcept { return c == '"' || c == '\'' || c == ')' || c == ']'; }

/// True when the period at `pos` belongs to an abbreviation or a decimal number.
inline bool period_is_internal(std::string_view s, std::size_t pos) {
    if (pos > 0 && pos + 1 < s.size() && text::is_digit(s[pos - 1]) && text::is_digit(s[pos + 1])) return true;

    std::size_t start = pos;
    while (start > 0 && !text::is_space(s[start - 1])) --start;
    std::size_t end = pos + 1;
    while (end < s.size() && !text::is_space(s[end])) ++end;
    std::string word = text::to_lower(s.substr(start, end - start));
    // surrounding quotes, brackets and trailing commas do not change the word
    while (!word.empty() && !text::is_alnum(word.front())) word.erase(0, 1);
    while (!word.empty() && word.back() != '.' && !text::is_alnum(word.back())) word.pop_back();
    const auto& abbrevs = sentence_abbreviations();
    return std::find(abbrevs.begin(), abbrevs.end(), word) != abbrevs.end();
}

} // namespace detail

/// Cuts `input` after its first sentence terminator. A run of terminators
/// ("?!", "...") and directly following closing quotes or brackets stay with
/// the sentence. Periods inside the abbreviations above and decimal numbers
/// are not terminators. Text without a terminator is returned whole.
inline std::string truncate_to_sentence(std::string_view input) {
    for (std::size_t i = 0; i < input.size(); ++i) {
        const char c = input[i];
        if (!detail::is_terminator(c)) continue;
        if (c == '.' && detail::period_is_internal(input, i)) continue;
        std::size_t end = i + 1;
        while (end < input.size() && detail::is_terminator(input[end])) ++end;
        while (end < input.size() && detail::is_closer(input[end])) ++end;
        return std::string(input.substr(0, end));
    }
    return std::string(input);
}

// ---------------------------------------------------------------------------
// Generation file ingestion
// ---------------------------------------------------------------------------

struct IngestOptions {
    bool truncate = true;
};

struct IngestResult {
    std::vector<Sample> samples;
    std::vector<Diagnostic> diagnostics;
};

inline std::string format_sample_id(std::string_view template_id, std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04zu", index);
    return std::string(template_id) + "/" + buf;
}

/// Builds a Sample from one generation. Texts holding only the continuation
/// get the prompt prepended so every raw text starts with its prompt.
inline Sample make_sample(std::string id, const CompleteTemplate& t, std::string_view generated, bool truncate) {
    std::string raw(generated);
    if (raw.compare(0, t.prompt.size(), t.prompt) != 0) raw = t.prompt + " " + raw;
    if (truncate) raw = truncate_to_sentence(raw);
    Sample s;
    s.id = std::move(id);
    s.template_id = t.id;
    s.context = t.context;
    s.group = t.group;
    s.masked_text = mask_demographic(raw, t.demographic());
    s.raw_text = std::move(raw);
    s.truncated = truncate;
    return s;
}

/// Parses `template_id<TAB>raw_text` records. Rejected records are reported
/// with their line number and skipped; blank lines are ignored.
inline IngestResult ingest_generations(std::string_view content, const TemplateSet& templates,
                                       IngestOptions options = {}) {
    IngestResult result;
    std::map<std::string, std::size_t, std::less<>> per_template;
    auto rows = text::lines(content);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto line_no = i + 1;
        auto row = rows[i];
        if (text::trim(row).empty()) continue;
        auto tab = row.find('\t');
        if (tab == std::string_view::npos) {
            result.diagnostics.push_back({line_no, "expected template_id<TAB>raw_text"});
            continue;
        }
        auto template_id = row.substr(0, tab);
        auto raw = row.substr(tab + 1);
        const auto* t = templates.find(template_id);
        if (!t) {
            result.diagnostics.push_back({line_no, "unknown template id '" + std::string(template_id) + "'"});
            continue;
        }
        if (text::trim(raw).empty()) {
            result.diagnostics.push_back({line_no, "empty text"});
            continue;
        }
        auto index = ++per_template[std::string(template_id)];
        result.samples.push_back(make_sample(format_sample_id(template_id, index), *t, raw, options.truncate));
    }
    return result;
}

inline IngestResult ingest(const std::string& path, const TemplateSet& templates, IngestOptions options = {}) {
    return ingest_generations(text::read_file(path), templates, options);
}

// ---------------------------------------------------------------------------
// Corpus archive (one JSON object per line)
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const Sample& s) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["template"] = s.template_id;
    j["raw_text"] = s.raw_text;
    j["masked_text"] = s.masked_text;
    j["truncated"] = s.truncated;
    return j;
}

inline std::string serialize_archive(const std::vector<Sample>& samples) {
    std::string out;
    for (const auto& s : samples) {
        out += to_json(s).dump();
        out += '\n';
    }
    return out;
}

inline std::vector<Sample> parse_archive(std::string_view content, const TemplateSet& templates) {
    std::vector<Sample> out;
    auto rows = text::lines(content);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (text::trim(rows[i]).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(rows[i]);
            Sample s;
            s.id = j.at("id").get<std::string>();
            s.template_id = j.at("template").get<std::string>();
            s.raw_text = j.at("raw_text").get<std::string>();
            s.masked_text = j.at("masked_text").get<std::string>();
            s.truncated = j.at("truncated").get<bool>();
            const auto* t = templates.find(s.template_id);
            if (!t) throw DataError("unknown template id '" + s.template_id + "'", i + 1);
            s.context = t->context;
            s.group = t->group;
            if (mask_demographic(s.raw_text, t->demographic()) != s.masked_text)
                throw DataError("masked_text does not match raw_text for '" + s.id + "'", i + 1);
            out.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("bad archive record: ") + e.what(), i + 1);
        }
    }
    return out;
}

inline std::vector<Sample> load_archive(const std::string& path, const TemplateSet& templates) {
    return parse_archive(text::read_file(path), templates);
}

// ---------------------------------------------------------------------------
// Gold dataset TSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kGoldHeader = "id\tmasked_text\tsentiment\tregard";

inline std::string serialize_gold(const std::vector<LabeledSample>& gold) {
    std::string out(kGoldHeader);
    out += '\n';
    for (const auto& g : gold) {
        out += text::tsv_field(g.id) + "\t" + text::tsv_field(g.masked_text) + "\t" +
               std::string(to_string(g.sentiment)) + "\t" + std::string(to_string(g.regard)) + "\n";
    }
    return out;
}

inline std::vector<LabeledSample> parse_gold(std::string_view content) {
    std::vector<LabeledSample> out;
    auto rows = text::lines(content);
    if (rows.empty()) return out;
    if (rows[0] != kGoldHeader) throw DataError("expected header '" + std::string(kGoldHeader) + "'", 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (text::trim(rows[i]).empty()) continue;
        auto f = text::split(rows[i], '\t');
        if (f.size() != 4) throw DataError("expected 4 tab-separated fields", i + 1);
        auto sentiment = parse_polarity(f[2]);
        if (!sentiment) throw DataError("unknown sentiment label '" + std::string(f[2]) + "'", i + 1);
        auto regard = parse_polarity(f[3]);
        if (!regard) throw DataError("unknown regard label '" + std::string(f[3]) + "'", i + 1);
        out.push_back({std::string(f[0]), std::string(f[1]), *sentiment, *regard});
    }
    return out;
}

inline std::vector<LabeledSample> load_gold_dataset(const std::string& path) {
    return parse_gold(text::read_file(path));
}

// ---------------------------------------------------------------------------
// Train / dev / test splits
// ---------------------------------------------------------------------------

enum class SplitName { train, dev, test };

inline constexpr std::array<SplitName, 3> kSplitNames{SplitName::train, SplitName::dev, SplitName::test};

constexpr std::string_view to_string(SplitName name) noexcept {
    switch (name) {
    case SplitName::train: return "train";
    case SplitName::dev: return "dev";
    case SplitName::test: return "test";
    }
    return "train";
}

inline std::optional<SplitName> parse_split_name(std::string_view token) noexcept {
    for (auto n : kSplitNames) {
        if (to_string(n) == token) return n;
    }
    return std::nullopt;
}

struct DatasetSplit {
    SplitName name;
    std::vector<LabeledSample> members;
};

using Splits = std::array<DatasetSplit, 3>;

struct SplitSizes {
    std::size_t train, dev, test;
};

/// Dev and test take 60/302 and 30/302 of the data (rounded down, at least
/// one each); the remainder goes to train. 302 items give 212/60/30.
inline SplitSizes split_sizes(std::size_t n) {
    if (n < 3) throw std::invalid_argument("split needs at least 3 samples");
    std::size_t dev = std::max<std::size_t>(1, n * 60 / 302);
    std::size_t test = std::max<std::size_t>(1, n * 30 / 302);
    return {n - dev - test, dev, test};
}

/// Unstratified random partition, deterministic under `seed`. Members keep
/// their input order within each split.
inline Splits split_dataset(const std::vector<LabeledSample>& gold, std::uint64_t seed) {
    const auto sizes = split_sizes(gold.size());
    std::vector<std::size_t> order(gold.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));

    std::vector<SplitName> assignment(gold.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        assignment[order[k]] = k < sizes.train ? SplitName::train
                               : k < sizes.train + sizes.dev ? SplitName::dev
                                                             : SplitName::test;
    }
    Splits splits{DatasetSplit{SplitName::train, {}}, DatasetSplit{SplitName::dev, {}},
                  DatasetSplit{SplitName::test, {}}};
    for (std::size_t i = 0; i < gold.size(); ++i) {
        splits[static_cast<std::size_t>(assignment[i])].members.push_back(gold[i]);
    }
    return splits;
}

/// Split assignment file: header `id<TAB>split`, one row per gold sample.
inline std::map<std::string, SplitName, std::less<>> parse_split_assignment(std::string_view content) {
    std::map<std::string, SplitName, std::less<>> out;
    auto rows = text::lines(content);
    if (rows.empty()) return out;
    if (rows[0] != "id\tsplit") throw DataError("expected header 'id<TAB>split'", 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (text::trim(rows[i]).empty()) continue;
        auto f = text::split(rows[i], '\t');
        if (f.size() != 2) throw DataError("expected 2 tab-separated fields", i + 1);
        auto name = parse_split_name(f[1]);
        if (!name) throw DataError("unknown split '" + std::string(f[1]) + "'", i + 1);
        if (!out.emplace(std::string(f[0]), *name).second)
            throw DataError("duplicate id '" + std::string(f[0]) + "'", i + 1);
    }
    return out;
}

inline std::string serialize_split_assignment(const Splits& splits) {
    std::vector<std::pair<std::string, SplitName>> rows;
    for (const auto& s : splits) {
        for (const auto& m : s.members) rows.emplace_back(m.id, s.name);
    }
    std::sort(rows.begin(), rows.end());
    std::string out = "id\tsplit\n";
    for (const auto& [id, name] : rows) out += id + "\t" + std::string(to_string(name)) + "\n";
    return out;
}

/// Applies a stored assignment. Every gold id must be assigned and every
/// assigned id must exist in the gold set.
inline Splits apply_split_assignment(const std::vector<LabeledSample>& gold,
                                     const std::map<std::string, SplitName, std::less<>>& assignment) {
    Splits splits{DatasetSplit{SplitName::train, {}}, DatasetSplit{SplitName::dev, {}},
                  DatasetSplit{SplitName::test, {}}};
    for (const auto& g : gold) {
        auto it = assignment.find(g.id);
        if (it == assignment.end()) throw DataError("gold sample '" + g.id + "' has no split assignment");
        splits[static_cast<std::size_t>(it->second)].members.push_back(g);
    }
    if (assignment.size() != gold.size()) throw DataError("split assignment names ids missing from the gold set");
    return splits;
}

inline std::array<std::size_t, 3> label_counts(const std::vector<LabeledSample>& members) {
    std::array<std::size_t, 3> counts{};
    for (const auto& m : members) ++counts[index_of(m.regard)];
    return counts;
}

} // namespace regard_audit
