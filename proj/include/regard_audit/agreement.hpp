#pragma once

#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "regard_audit/annotation.hpp"
#include "regard_audit/corpus.hpp"
#include "regard_audit/stats.hpp"
#include "regard_audit/templates.hpp"

namespace regard_audit::agreement {

/// How "original categories only" restricts the annotation matrix.
enum class Restriction {
    all_categories, // all six categories, every item
    original_items, // only items on which every rater chose an original category
    original_ratings, // drop individual non-original ratings; items keep >= 2 ratings (unequal rater counts)
};

inline stats::RatingMatrix rating_matrix(std::span<const AnnotationRecord> records, Metric metric,
                                         Restriction restriction) {
    stats::RatingMatrix m;
    const bool six = restriction == Restriction::all_categories;
    const std::size_t k = six ? 6 : 3;
    for (std::size_t j = 0; j < k; ++j) m.categories.emplace_back(to_string(kCategories[j]));

    for (const auto& [id, group] : group_by_sample(records)) {
        std::vector<int> row(k, 0);
        bool all_original = true;
        for (const auto& r : group) {
            const auto c = r.category(metric);
            if (!is_original(c)) {
                all_original = false;
                if (!six) continue;
            }
            ++row[static_cast<std::size_t>(c)];
        }
        if (restriction == Restriction::original_items && !all_original) continue;
        if (restriction == Restriction::original_ratings && std::accumulate(row.begin(), row.end(), 0) < 2) continue;
        m.counts.push_back(std::move(row));
    }
    return m;
}

inline std::optional<double> kappa(std::span<const AnnotationRecord> records, Metric metric, Restriction restriction,
                                   std::size_t* n_items = nullptr) {
    const auto m = rating_matrix(records, metric, restriction);
    if (n_items) *n_items = m.n_items();
    if (m.n_items() == 0) return std::nullopt;
    return restriction == Restriction::original_ratings ? stats::fleiss_kappa_variable(m) : stats::fleiss_kappa(m);
}

/// Annotation-level Spearman: on items where every rater chose an original
/// category, annotators are ordered by id per item (rater slots); the result
/// is the mean Spearman correlation over all slot pairs, with ordinals
/// negative=-1, neutral=0, positive=+1.
inline std::optional<double> annotator_spearman(std::span<const AnnotationRecord> records, Metric metric,
                                                std::size_t* n_items = nullptr) {
    std::vector<std::vector<int>> slots;
    std::size_t items = 0;
    for (const auto& [id, group] : group_by_sample(records)) {
        bool all_original = true;
        for (const auto& r : group) all_original = all_original && is_original(r.category(metric));
        if (!all_original) continue;
        if (slots.empty()) slots.resize(group.size());
        if (group.size() != slots.size()) throw DataError("items have unequal annotator counts");
        for (std::size_t s = 0; s < group.size(); ++s) slots[s].push_back(ordinal(*to_polarity(group[s].category(metric))));
        ++items;
    }
    if (n_items) *n_items = items;
    if (items < 2 || slots.size() < 2) return std::nullopt;
    double total = 0.0;
    int pairs = 0;
    for (std::size_t a = 0; a < slots.size(); ++a) {
        for (std::size_t b = a + 1; b < slots.size(); ++b) {
            auto rho = stats::spearman(std::span<const int>(slots[a]), std::span<const int>(slots[b]));
            if (!rho) return std::nullopt;
            total += *rho;
            ++pairs;
        }
    }
    return total / pairs;
}

/// Keeps samples of `context` (all when empty); ids that do not resolve to a
/// context are kept only for the unfiltered view.
inline std::vector<LabeledSample> in_context(std::span<const LabeledSample> gold, const TemplateSet& templates,
                                             std::optional<BiasContext> context) {
    std::vector<LabeledSample> out;
    for (const auto& g : gold) {
        if (!context || context_of(g.id, templates) == context) out.push_back(g);
    }
    return out;
}

/// Spearman between gold sentiment and gold regard ordinals.
inline std::optional<double> gold_sentiment_vs_regard(std::span<const LabeledSample> gold) {
    if (gold.size() < 2) return std::nullopt;
    std::vector<int> s, r;
    for (const auto& g : gold) {
        s.push_back(ordinal(g.sentiment));
        r.push_back(ordinal(g.regard));
    }
    return stats::spearman(std::span<const int>(s), std::span<const int>(r));
}

/// Recorded sentiment predictions: header `id<TAB>prediction`.
inline std::map<std::string, PolarityLabel, std::less<>> parse_predictions(std::string_view content) {
    std::map<std::string, PolarityLabel, std::less<>> out;
    auto rows = text::lines(content);
    if (rows.empty()) return out;
    if (rows[0] != "id\tprediction") throw DataError("expected header 'id<TAB>prediction'", 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (text::trim(rows[i]).empty()) continue;
        auto f = text::split(rows[i], '\t');
        if (f.size() != 2) throw DataError("expected 2 tab-separated fields", i + 1);
        auto label = parse_polarity(f[1]);
        if (!label) throw DataError("unknown label '" + std::string(f[1]) + "'", i + 1);
        out.insert_or_assign(std::string(f[0]), *label);
    }
    return out;
}

/// Spearman between predictions and one gold metric; every gold id must have
/// a prediction.
inline std::optional<double> prediction_vs_gold(std::span<const LabeledSample> gold,
                                                const std::map<std::string, PolarityLabel, std::less<>>& predictions,
                                                Metric metric) {
    if (gold.size() < 2) return std::nullopt;
    std::vector<int> p, g;
    for (const auto& s : gold) {
        auto it = predictions.find(s.id);
        if (it == predictions.end()) throw DataError("no prediction for gold sample '" + s.id + "'");
        p.push_back(ordinal(it->second));
        g.push_back(ordinal(metric == Metric::sentiment ? s.sentiment : s.regard));
    }
    return stats::spearman(std::span<const int>(p), std::span<const int>(g));
}

inline constexpr std::string_view kRowSentimentVsRegard = "sentiment ann. vs. regard ann.";
inline constexpr std::string_view kRowPredVsSentiment = "sentiment pred. vs. sentiment ann.";
inline constexpr std::string_view kRowPredVsRegard = "sentiment pred. vs. regard ann.";

/// Correlation table over the gold set: one row per comparison, columns
/// respect / occupation / both.
inline std::vector<stats::ReportEntry> correlation_report(
    std::span<const LabeledSample> gold, const TemplateSet& templates,
    const std::map<std::string, PolarityLabel, std::less<>>* predictions = nullptr) {
    std::vector<stats::ReportEntry> out;
    const std::array<std::pair<std::optional<BiasContext>, std::string>, 3> subsets{{
        {BiasContext::respect, "respect"}, {BiasContext::occupation, "occupation"}, {std::nullopt, "both"}}};
    for (const auto& [ctx, name] : subsets) {
        auto subset = in_context(gold, templates, ctx);
        out.push_back({std::string(kRowSentimentVsRegard), name, gold_sentiment_vs_regard(subset), subset.size()});
    }
    if (predictions) {
        for (const auto& [ctx, name] : subsets) {
            auto subset = in_context(gold, templates, ctx);
            out.push_back({std::string(kRowPredVsSentiment), name, prediction_vs_gold(subset, *predictions, Metric::sentiment), subset.size()});
        }
        for (const auto& [ctx, name] : subsets) {
            auto subset = in_context(gold, templates, ctx);
            out.push_back({std::string(kRowPredVsRegard), name, prediction_vs_gold(subset, *predictions, Metric::regard), subset.size()});
        }
    }
    return out;
}

/// Agreement over raw annotations: kappa on all categories and on original
/// categories, plus annotation-level Spearman, for both metrics.
inline std::vector<stats::ReportEntry> agreement_report(std::span<const AnnotationRecord> records,
                                                        Restriction original = Restriction::original_items) {
    std::vector<stats::ReportEntry> out;
    for (auto metric : {Metric::sentiment, Metric::regard}) {
        const std::string m(to_string(metric));
        std::size_t n = 0;
        auto all = kappa(records, metric, Restriction::all_categories, &n);
        out.push_back({m + " fleiss kappa", "all categories", all, n});
        auto orig = kappa(records, metric, original, &n);
        out.push_back({m + " fleiss kappa", "original categories", orig, n});
        auto rho = annotator_spearman(records, metric, &n);
        out.push_back({m + " annotator spearman", "original categories", rho, n});
    }
    return out;
}

} // namespace regard_audit::agreement
