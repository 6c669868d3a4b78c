#pragma once

#include <algorithm>
#include <array>
#include <concepts>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "regard_audit/corpus.hpp"
#include "regard_audit/labels.hpp"
#include "regard_audit/rng.hpp"
#include "regard_audit/sentiment.hpp"
#include "regard_audit/text.hpp"

namespace regard_audit {

enum class Metric { sentiment, regard };

constexpr std::string_view to_string(Metric metric) noexcept {
    return metric == Metric::sentiment ? "sentiment" : "regard";
}

/// Six-way annotation taxonomy, identical for both metrics. The first three
/// values are the original categories.
enum class Category { positive, negative, neutral_or_no_impact, mixed_both, mixed_opposing, nonsensical };

inline constexpr std::array<Category, 6> kCategories{Category::positive,   Category::negative,
                                                     Category::neutral_or_no_impact, Category::mixed_both,
                                                     Category::mixed_opposing,       Category::nonsensical};

inline constexpr std::string_view kCategoryVocabulary =
    "positive|negative|neutral_or_no_impact|mixed_both|mixed_opposing|nonsensical";

constexpr std::string_view to_string(Category c) noexcept {
    switch (c) {
    case Category::positive: return "positive";
    case Category::negative: return "negative";
    case Category::neutral_or_no_impact: return "neutral_or_no_impact";
    case Category::mixed_both: return "mixed_both";
    case Category::mixed_opposing: return "mixed_opposing";
    case Category::nonsensical: return "nonsensical";
    }
    return "nonsensical";
}

inline std::optional<Category> parse_category(std::string_view token) noexcept {
    for (auto c : kCategories) {
        if (to_string(c) == token) return c;
    }
    return std::nullopt;
}

constexpr bool is_original(Category c) noexcept {
    return c == Category::positive || c == Category::negative || c == Category::neutral_or_no_impact;
}

constexpr std::optional<PolarityLabel> to_polarity(Category c) noexcept {
    switch (c) {
    case Category::positive: return PolarityLabel::positive;
    case Category::negative: return PolarityLabel::negative;
    case Category::neutral_or_no_impact: return PolarityLabel::neutral;
    default: return std::nullopt;
    }
}

struct CategoryLabel {
    Metric metric;
    Category value;

    friend bool operator==(const CategoryLabel&, const CategoryLabel&) = default;
};

struct AnnotationRecord {
    std::string sample_id;
    std::string annotator_id;
    Category sentiment = Category::neutral_or_no_impact;
    Category regard = Category::neutral_or_no_impact;
    std::string timestamp;

    CategoryLabel sentiment_label() const noexcept { return {Metric::sentiment, sentiment}; }
    CategoryLabel regard_label() const noexcept { return {Metric::regard, regard}; }
    Category category(Metric m) const noexcept { return m == Metric::sentiment ? sentiment : regard; }

    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

// ---------------------------------------------------------------------------
// Raw annotation TSV
// ---------------------------------------------------------------------------

inline constexpr std::string_view kRawHeader = "sample_id\tannotator_id\tsentiment_category\tregard_category\ttimestamp";

inline void sort_records(std::vector<AnnotationRecord>& records) {
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        return std::tie(a.sample_id, a.annotator_id) < std::tie(b.sample_id, b.annotator_id);
    });
}

/// Rows sorted by (sample_id, annotator_id).
inline std::string serialize_raw(std::vector<AnnotationRecord> records) {
    sort_records(records);
    std::string out(kRawHeader);
    out += '\n';
    for (const auto& r : records) {
        out += text::tsv_field(r.sample_id) + "\t" + text::tsv_field(r.annotator_id) + "\t" +
               std::string(to_string(r.sentiment)) + "\t" + std::string(to_string(r.regard)) + "\t" +
               text::tsv_field(r.timestamp) + "\n";
    }
    return out;
}

inline std::vector<AnnotationRecord> parse_raw(std::string_view content) {
    std::vector<AnnotationRecord> out;
    auto rows = text::lines(content);
    if (rows.empty()) return out;
    if (rows[0] != kRawHeader) throw DataError("expected raw annotation header", 1);
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (text::trim(rows[i]).empty()) continue;
        auto f = text::split(rows[i], '\t');
        if (f.size() != 5) throw DataError("expected 5 tab-separated fields", i + 1);
        auto s = parse_category(f[2]);
        if (!s) throw DataError("sentiment_category '" + std::string(f[2]) + "' not in " + std::string(kCategoryVocabulary), i + 1);
        auto r = parse_category(f[3]);
        if (!r) throw DataError("regard_category '" + std::string(f[3]) + "' not in " + std::string(kCategoryVocabulary), i + 1);
        if (!seen.emplace(std::string(f[0]), std::string(f[1])).second)
            throw DataError("duplicate record for sample '" + std::string(f[0]) + "' and annotator '" + std::string(f[1]) + "'", i + 1);
        out.push_back({std::string(f[0]), std::string(f[1]), *s, *r, std::string(f[4])});
    }
    return out;
}

inline std::vector<AnnotationRecord> load_raw_annotations(const std::string& path) {
    return parse_raw(text::read_file(path));
}

// ---------------------------------------------------------------------------
// Batch selection
// ---------------------------------------------------------------------------

struct BatchMember {
    std::string sample_id;
    std::string template_id;
    std::string masked_text;

    friend bool operator==(const BatchMember&, const BatchMember&) = default;
};

struct AnnotationBatch {
    static constexpr std::size_t kPositivesPerTemplate = 3;
    static constexpr std::size_t kNegativesPerTemplate = 3;

    std::vector<BatchMember> members;
    bool incomplete = false;
    std::vector<std::string> diagnostics; // one per template with a shortfall
};

/// For each template (in order of first appearance) picks 3 positive and 3
/// negative samples uniformly at random under `seed`; positives precede
/// negatives within a template. Shortfalls are reported and the batch is
/// flagged incomplete.
template <typename Labeler>
    requires std::invocable<const Labeler&, const Sample&>
AnnotationBatch select_batch(std::span<const Sample> samples, const Labeler& labeler, std::uint64_t seed) {
    std::vector<std::string> order;
    std::map<std::string, std::pair<std::vector<const Sample*>, std::vector<const Sample*>>> groups;
    for (const auto& s : samples) {
        auto [it, inserted] = groups.try_emplace(s.template_id);
        if (inserted) order.push_back(s.template_id);
        const PolarityLabel label = labeler(s);
        if (label == PolarityLabel::positive) it->second.first.push_back(&s);
        else if (label == PolarityLabel::negative) it->second.second.push_back(&s);
    }

    AnnotationBatch batch;
    Rng rng(seed);
    for (const auto& template_id : order) {
        auto& [pos, neg] = groups[template_id];
        rng.choose_front(std::span<const Sample*>(pos), AnnotationBatch::kPositivesPerTemplate);
        rng.choose_front(std::span<const Sample*>(neg), AnnotationBatch::kNegativesPerTemplate);
        const auto take_pos = std::min(pos.size(), AnnotationBatch::kPositivesPerTemplate);
        const auto take_neg = std::min(neg.size(), AnnotationBatch::kNegativesPerTemplate);
        for (std::size_t i = 0; i < take_pos; ++i) batch.members.push_back({pos[i]->id, template_id, pos[i]->masked_text});
        for (std::size_t i = 0; i < take_neg; ++i) batch.members.push_back({neg[i]->id, template_id, neg[i]->masked_text});
        if (take_pos < AnnotationBatch::kPositivesPerTemplate || take_neg < AnnotationBatch::kNegativesPerTemplate) {
            batch.incomplete = true;
            batch.diagnostics.push_back(template_id + ": short " +
                                        std::to_string(AnnotationBatch::kPositivesPerTemplate - take_pos) +
                                        " positive, " +
                                        std::to_string(AnnotationBatch::kNegativesPerTemplate - take_neg) + " negative");
        }
    }
    return batch;
}

inline AnnotationBatch select_batch(std::span<const Sample> samples, const sentiment::Analyzer& analyzer,
                                    std::uint64_t seed) {
    return select_batch(samples, [&](const Sample& s) { return analyzer.label(s.raw_text); }, seed);
}

inline constexpr std::string_view kBatchHeader = "sample_id\ttemplate\tmasked_text";

inline std::string serialize_batch(const AnnotationBatch& batch) {
    std::string out(kBatchHeader);
    out += '\n';
    for (const auto& m : batch.members)
        out += text::tsv_field(m.sample_id) + "\t" + text::tsv_field(m.template_id) + "\t" + text::tsv_field(m.masked_text) + "\n";
    return out;
}

inline AnnotationBatch parse_batch(std::string_view content) {
    AnnotationBatch batch;
    auto rows = text::lines(content);
    if (rows.empty()) return batch;
    if (rows[0] != kBatchHeader) throw DataError("expected batch header", 1);
    std::set<std::string, std::less<>> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (text::trim(rows[i]).empty()) continue;
        auto f = text::split(rows[i], '\t');
        if (f.size() != 3) throw DataError("expected 3 tab-separated fields", i + 1);
        if (!seen.emplace(f[0]).second) throw DataError("duplicate sample '" + std::string(f[0]) + "'", i + 1);
        batch.members.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2])});
    }
    return batch;
}

inline AnnotationBatch load_batch(const std::string& path) { return parse_batch(text::read_file(path)); }

// ---------------------------------------------------------------------------
// Majority vote
// ---------------------------------------------------------------------------

enum class Exclusion { none, no_majority, non_original_majority };

struct GoldDecision {
    Exclusion exclusion = Exclusion::none;
    std::optional<std::pair<PolarityLabel, PolarityLabel>> labels; // (sentiment, regard) when kept
};

namespace detail {

inline std::optional<Category> majority(std::span<const AnnotationRecord> records, Metric metric) {
    for (const auto& r : records) {
        const auto c = r.category(metric);
        auto votes = std::count_if(records.begin(), records.end(), [&](const auto& o) { return o.category(metric) == c; });
        if (votes >= 2) return c;
    }
    return std::nullopt;
}

} // namespace detail

/// Gold labels for one sample from its three annotators. A sample is kept
/// only when both metrics have a 2-of-3 majority on an original category.
inline GoldDecision majority_gold(std::span<const AnnotationRecord> records) {
    if (records.size() != 3)
        throw DataError("majority vote needs exactly 3 records, got " + std::to_string(records.size()) +
                        (records.empty() ? std::string() : " for sample '" + records[0].sample_id + "'"));
    const auto s = detail::majority(records, Metric::sentiment);
    const auto r = detail::majority(records, Metric::regard);
    if (!s || !r) return {Exclusion::no_majority, std::nullopt};
    if (!is_original(*s) || !is_original(*r)) return {Exclusion::non_original_majority, std::nullopt};
    return {Exclusion::none, std::make_pair(*to_polarity(*s), *to_polarity(*r))};
}

/// Records grouped per sample, each group sorted by annotator id.
inline std::map<std::string, std::vector<AnnotationRecord>> group_by_sample(std::span<const AnnotationRecord> records) {
    std::map<std::string, std::vector<AnnotationRecord>> out;
    for (const auto& r : records) out[r.sample_id].push_back(r);
    for (auto& [id, group] : out) sort_records(group);
    return out;
}

struct ExclusionReport {
    std::size_t no_majority = 0;
    std::size_t non_original_majority = 0;

    std::size_t total() const noexcept { return no_majority + non_original_majority; }
};

struct GoldBuild {
    std::vector<LabeledSample> gold; // sorted by sample id
    ExclusionReport excluded;
};

/// Majority gold over every annotated sample. Texts come from the batch; a
/// batch sample without records, or records for a sample outside the batch,
/// are errors.
inline GoldBuild build_gold_dataset(std::span<const AnnotationRecord> records, const AnnotationBatch& batch) {
    std::map<std::string, const BatchMember*, std::less<>> members;
    for (const auto& m : batch.members) members.emplace(m.sample_id, &m);

    GoldBuild out;
    const auto groups = group_by_sample(records);
    for (const auto& [id, _] : members) {
        if (!groups.count(id)) throw DataError("batch sample '" + id + "' has no annotation records");
    }
    for (const auto& [id, group] : groups) {
        auto member = members.find(id);
        if (member == members.end()) throw DataError("records for sample '" + id + "' outside the batch");
        const auto decision = majority_gold(group);
        switch (decision.exclusion) {
        case Exclusion::no_majority: ++out.excluded.no_majority; break;
        case Exclusion::non_original_majority: ++out.excluded.non_original_majority; break;
        case Exclusion::none:
            out.gold.push_back({id, member->second->masked_text, decision.labels->first, decision.labels->second});
            break;
        }
    }
    return out;
}

} // namespace regard_audit
