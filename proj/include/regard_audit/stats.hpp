#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "regard_audit/text.hpp"

namespace regard_audit::stats {

/// Per-item, per-category rater counts.
struct RatingMatrix {
    std::vector<std::string> categories;
    std::vector<std::vector<int>> counts; // counts[item][category]

    std::size_t n_items() const noexcept { return counts.size(); }

    int raters(std::size_t item) const { return std::accumulate(counts[item].begin(), counts[item].end(), 0); }
};

namespace detail {

inline void check_shape(const RatingMatrix& m) {
    for (const auto& row : m.counts) {
        if (row.size() != m.categories.size()) throw std::invalid_argument("rating row width differs from categories");
        for (int c : row) {
            if (c < 0) throw std::invalid_argument("negative rating count");
        }
    }
}

} // namespace detail

/// Fleiss' kappa for a fixed number of raters per item.
///
/// Returns exactly 1.0 when every item is unanimous and std::nullopt when
/// chance agreement is 1 without perfect observed agreement (undefined).
/// Throws std::invalid_argument for an empty matrix, fewer than two raters, or
/// items with differing rater counts.
inline std::optional<double> fleiss_kappa(const RatingMatrix& m) {
    detail::check_shape(m);
    if (m.n_items() == 0) throw std::invalid_argument("fleiss_kappa needs at least one item");
    const int n = m.raters(0);
    if (n < 2) throw std::invalid_argument("fleiss_kappa needs at least two raters per item");

    const std::size_t k = m.categories.size();
    std::vector<long long> totals(k, 0);
    double p_bar = 0.0;
    bool unanimous = true;
    for (std::size_t i = 0; i < m.n_items(); ++i) {
        if (m.raters(i) != n) throw std::invalid_argument("items have unequal rater counts");
        long long squares = 0;
        for (std::size_t j = 0; j < k; ++j) {
            const long long c = m.counts[i][j];
            squares += c * c;
            totals[j] += c;
        }
        unanimous = unanimous && squares == static_cast<long long>(n) * n;
        p_bar += static_cast<double>(squares - n) / (static_cast<double>(n) * (n - 1));
    }
    if (unanimous) return 1.0;
    p_bar /= static_cast<double>(m.n_items());

    const double all = static_cast<double>(m.n_items()) * n;
    double p_e = 0.0;
    for (auto t : totals) p_e += (t / all) * (t / all);
    if (p_e >= 1.0) return std::nullopt;
    return (p_bar - p_e) / (1.0 - p_e);
}

/// Fleiss' kappa generalized to items with varying rater counts (each >= 2):
/// per-item agreement uses that item's count and category proportions pool all
/// ratings.
inline std::optional<double> fleiss_kappa_variable(const RatingMatrix& m) {
    detail::check_shape(m);
    if (m.n_items() == 0) throw std::invalid_argument("fleiss_kappa needs at least one item");
    const std::size_t k = m.categories.size();
    std::vector<double> totals(k, 0.0);
    double all = 0.0, p_bar = 0.0;
    bool unanimous = true;
    for (std::size_t i = 0; i < m.n_items(); ++i) {
        const int n = m.raters(i);
        if (n < 2) throw std::invalid_argument("every item needs at least two raters");
        long long agree = 0;
        for (std::size_t j = 0; j < k; ++j) {
            const long long c = m.counts[i][j];
            agree += c * (c - 1);
            totals[j] += static_cast<double>(c);
            if (c != 0 && c != n) unanimous = false;
        }
        p_bar += static_cast<double>(agree) / (static_cast<double>(n) * (n - 1));
        all += n;
    }
    if (unanimous) return 1.0;
    p_bar /= static_cast<double>(m.n_items());
    double p_e = 0.0;
    for (auto t : totals) p_e += (t / all) * (t / all);
    if (p_e >= 1.0) return std::nullopt;
    return (p_bar - p_e) / (1.0 - p_e);
}

/// 1-based ranks with ties assigned their average rank.
inline std::vector<double> midranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

/// Pearson correlation; std::nullopt when either side is constant.
inline std::optional<double> pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("pearson inputs differ in length");
    if (xs.size() < 2) throw std::invalid_argument("pearson needs at least two pairs");
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Spearman's rho: Pearson correlation of midranks. Undefined (std::nullopt)
/// when either input is constant.
inline std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("spearman inputs differ in length");
    if (xs.size() < 2) throw std::invalid_argument("spearman needs at least two pairs");
    const auto rx = midranks(xs);
    const auto ry = midranks(ys);
    return pearson(rx, ry);
}

inline std::optional<double> spearman(std::span<const int> xs, std::span<const int> ys) {
    std::vector<double> a(xs.begin(), xs.end()), b(ys.begin(), ys.end());
    return spearman(std::span<const double>(a), std::span<const double>(b));
}

struct MeanAccuracy {
    double mean = 0.0;
    std::vector<double> per_run;
};

inline MeanAccuracy mean_accuracy(std::span<const double> per_run) {
    if (per_run.empty()) throw std::invalid_argument("mean_accuracy needs at least one run");
    MeanAccuracy out;
    out.per_run.assign(per_run.begin(), per_run.end());
    out.mean = std::accumulate(per_run.begin(), per_run.end(), 0.0) / static_cast<double>(per_run.size());
    return out;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct ReportEntry {
    std::string metric;
    std::string subset;
    std::optional<double> value; // empty when undefined
    std::size_t n_items = 0;
};

inline nlohmann::ordered_json to_json(const std::vector<ReportEntry>& entries) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
        nlohmann::ordered_json j;
        j["metric"] = e.metric;
        j["subset"] = e.subset;
        j["value"] = e.value ? nlohmann::ordered_json(*e.value) : nlohmann::ordered_json(nullptr);
        j["n_items"] = e.n_items;
        arr.push_back(j);
    }
    return arr;
}

/// Aligned text table; rows keyed by metric, one column per subset in the
/// order the subsets first appear.
inline std::string render_table(const std::vector<ReportEntry>& entries, int precision = 2) {
    std::vector<std::string> rows, cols;
    for (const auto& e : entries) {
        if (std::find(rows.begin(), rows.end(), e.metric) == rows.end()) rows.push_back(e.metric);
        if (std::find(cols.begin(), cols.end(), e.subset) == cols.end()) cols.push_back(e.subset);
    }
    std::size_t label_width = 8;
    for (const auto& r : rows) label_width = std::max(label_width, r.size());
    std::size_t col_width = 6;
    for (const auto& c : cols) col_width = std::max(col_width, c.size());

    auto pad_right = [](std::string s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
    auto pad_left = [](std::string s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };

    std::string out = pad_right("", label_width);
    for (const auto& c : cols) out += "  " + pad_left(c, col_width);
    out += "\n";
    for (const auto& r : rows) {
        out += pad_right(r, label_width);
        for (const auto& c : cols) {
            std::string cell = "-";
            for (const auto& e : entries) {
                if (e.metric == r && e.subset == c) cell = e.value ? text::fixed(*e.value, precision) : "undef";
            }
            out += "  " + pad_left(cell, col_width);
        }
        out += "\n";
    }
    return out;
}

} // namespace regard_audit::stats
