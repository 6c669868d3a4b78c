#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "regard_audit/labels.hpp"
#include "regard_audit/templates.hpp"
#include "regard_audit/text.hpp"

namespace regard_audit::analysis {

struct ScoredSample {
    BiasContext context;
    Group group;
    PolarityLabel label;
};

struct GroupDistribution {
    std::array<std::size_t, 3> counts{}; // negative, neutral, positive
    std::size_t n = 0;
    double frac_negative = 0.0;
    double frac_neutral = 0.0;
    double frac_positive = 0.0;

    double fraction(PolarityLabel label) const noexcept {
        switch (label) {
        case PolarityLabel::negative: return frac_negative;
        case PolarityLabel::neutral: return frac_neutral;
        case PolarityLabel::positive: return frac_positive;
        }
        return 0.0;
    }
};

struct DistributionReport {
    std::string scorer_name;
    BiasContext context = BiasContext::respect;
    std::map<Group, GroupDistribution> per_demographic; // groups with n > 0 only
    std::vector<std::string> notices;
};

inline GroupDistribution from_counts(const std::array<std::size_t, 3>& counts) {
    GroupDistribution g;
    g.counts = counts;
    g.n = counts[0] + counts[1] + counts[2];
    if (g.n > 0) {
        const auto n = static_cast<double>(g.n);
        g.frac_negative = static_cast<double>(counts[0]) / n;
        g.frac_neutral = static_cast<double>(counts[1]) / n;
        g.frac_positive = static_cast<double>(counts[2]) / n;
    }
    return g;
}

/// One report per context that has samples, in context order. Fractions are
/// exact counts over n; groups without samples are omitted with a notice.
inline std::vector<DistributionReport> distribution(std::span<const ScoredSample> samples, const std::string& scorer_name) {
    std::map<BiasContext, std::map<Group, std::array<std::size_t, 3>>> counts;
    for (const auto& s : samples) ++counts[s.context][s.group][index_of(s.label)];

    std::vector<DistributionReport> out;
    for (auto context : kBiasContexts) {
        auto it = counts.find(context);
        if (it == counts.end()) continue;
        DistributionReport report;
        report.scorer_name = scorer_name;
        report.context = context;
        for (auto group : kGroups) {
            auto g = it->second.find(group);
            if (g == it->second.end()) {
                report.notices.push_back("no " + std::string(to_string(context)) + " samples for group '" +
                                         std::string(to_string(group)) + "'");
                continue;
            }
            report.per_demographic.emplace(group, from_counts(g->second));
        }
        out.push_back(std::move(report));
    }
    return out;
}

inline constexpr std::string_view kCountsHeader = "context\tdemographic\tnegative\tneutral\tpositive";

/// Reads per-group label counts (header above) into reports, one per context
/// in context order.
inline std::vector<DistributionReport> parse_distribution_counts(std::string_view content, const std::string& scorer_name) {
    std::map<BiasContext, DistributionReport> by_context;
    auto rows = text::lines(content);
    if (rows.empty() || rows[0] != kCountsHeader) throw DataError("expected header '" + std::string(kCountsHeader) + "'", 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (text::trim(rows[i]).empty()) continue;
        auto f = text::split(rows[i], '\t');
        if (f.size() != 5) throw DataError("expected 5 tab-separated fields", i + 1);
        auto context = parse_context(f[0]);
        if (!context) throw DataError("unknown context '" + std::string(f[0]) + "'", i + 1);
        auto group = parse_group(f[1]);
        if (!group) throw DataError("unknown demographic '" + std::string(f[1]) + "'", i + 1);
        std::array<std::size_t, 3> counts{};
        for (std::size_t k = 0; k < 3; ++k) {
            auto v = text::parse_double(f[2 + k]);
            if (!v || *v < 0 || *v != std::floor(*v)) throw DataError("count must be a non-negative integer", i + 1);
            counts[k] = static_cast<std::size_t>(*v);
        }
        auto& report = by_context[*context];
        report.scorer_name = scorer_name;
        report.context = *context;
        if (counts[0] + counts[1] + counts[2] == 0) throw DataError("group without samples", i + 1);
        if (!report.per_demographic.emplace(*group, from_counts(counts)).second)
            throw DataError("duplicate demographic '" + std::string(f[1]) + "'", i + 1);
    }
    std::vector<DistributionReport> out;
    for (auto& [context, report] : by_context) out.push_back(std::move(report));
    return out;
}

// ---------------------------------------------------------------------------
// Gaps
// ---------------------------------------------------------------------------

/// Pair orientation follows the chart layout: Black-White, man-woman, gay-straight.
inline constexpr std::array<std::pair<Group, Group>, 3> kAxisPairs{
    {{Group::black, Group::white}, {Group::male, Group::female}, {Group::gay, Group::straight}}};

struct PairGap {
    Group group_a;
    Group group_b;
    double gap_negative = 0.0; // frac(a) - frac(b)
    double gap_neutral = 0.0;
    double gap_positive = 0.0;
};

struct GapReport {
    std::string scorer_name;
    BiasContext context = BiasContext::respect;
    std::vector<PairGap> pairs;
    std::vector<std::string> notices;
};

inline GapReport gaps(const DistributionReport& report,
                      std::span<const std::pair<Group, Group>> axis_pairs = kAxisPairs) {
    GapReport out;
    out.scorer_name = report.scorer_name;
    out.context = report.context;
    for (const auto& [a, b] : axis_pairs) {
        auto ia = report.per_demographic.find(a);
        auto ib = report.per_demographic.find(b);
        if (ia == report.per_demographic.end() || ib == report.per_demographic.end()) {
            out.notices.push_back("pair " + std::string(to_string(a)) + "-" + std::string(to_string(b)) +
                                  " skipped: group missing");
            continue;
        }
        out.pairs.push_back({a, b, ia->second.frac_negative - ib->second.frac_negative,
                             ia->second.frac_neutral - ib->second.frac_neutral,
                             ia->second.frac_positive - ib->second.frac_positive});
    }
    return out;
}

/// Per-pair comparison of two gap reports (e.g. regard against sentiment).
/// `delta_*` is the signed difference of gaps; `magnitude_delta_*` is
/// |gap in first| - |gap in second|, positive when the first report shows the
/// wider gap.
struct GapDelta {
    Group group_a;
    Group group_b;
    double delta_negative, delta_neutral, delta_positive;
    double magnitude_delta_negative, magnitude_delta_neutral, magnitude_delta_positive;
};

inline std::vector<GapDelta> compare_gaps(const GapReport& first, const GapReport& second) {
    std::vector<GapDelta> out;
    for (const auto& p : first.pairs) {
        for (const auto& q : second.pairs) {
            if (p.group_a != q.group_a || p.group_b != q.group_b) continue;
            out.push_back({p.group_a, p.group_b, p.gap_negative - q.gap_negative, p.gap_neutral - q.gap_neutral,
                           p.gap_positive - q.gap_positive, std::abs(p.gap_negative) - std::abs(q.gap_negative),
                           std::abs(p.gap_neutral) - std::abs(q.gap_neutral),
                           std::abs(p.gap_positive) - std::abs(q.gap_positive)});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stacked bar chart (SVG)
// ---------------------------------------------------------------------------

struct ChartLayout {
    double plot_height = 200.0;
    double bar_width = 24.0;
    double bar_spacing = 4.0;  // between the two bars of a pair
    double pair_spacing = 20.0; // between pairs
    double panel_left = 60.0;
    double panel_top = 40.0;
    double panel_width = 300.0;
};

/// Bars in chart order: the two groups of each axis side by side.
inline constexpr std::array<Group, 6> kChartOrder{Group::black, Group::white, Group::male,
                                                  Group::female, Group::gay, Group::straight};

namespace detail {

inline std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

inline std::string num(double v) { return text::fixed(v, 2); }

inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

inline constexpr std::array<std::string_view, 3> kFill{"#222222", "#8c8c8c", "#d4d4d4"};

} // namespace detail

/// One panel per report, side by side. Each bar stacks negative, neutral and
/// positive from the bottom; segment heights are the fractions scaled to the
/// plot height. Output depends only on the reports and layout.
inline std::string render_stacked_chart(std::span<const DistributionReport> reports, const ChartLayout& layout = {}) {
    using detail::num;
    const double width = layout.panel_width * static_cast<double>(std::max<std::size_t>(reports.size(), 1)) + 20.0;
    const double legend_y = layout.panel_top + layout.plot_height + 60.0;
    const double height = legend_y + 30.0;
    const double bottom = layout.panel_top + layout.plot_height;

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
           "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"" + num(width) + "\" height=\"" + num(height) + "\" fill=\"#ffffff\"/>\n";

    for (std::size_t p = 0; p < reports.size(); ++p) {
        const auto& report = reports[p];
        const double x0 = static_cast<double>(p) * layout.panel_width;
        const double axis_x = x0 + layout.panel_left - 10.0;
        svg += "<g class=\"panel\" data-scorer=\"" + detail::xml_escape(report.scorer_name) + "\" data-context=\"" +
               std::string(to_string(report.context)) + "\">\n";
        svg += "<text class=\"title\" x=\"" + num(x0 + layout.panel_width / 2.0) + "\" y=\"20.00\" text-anchor=\"middle\" font-size=\"13\">" +
               detail::xml_escape(report.scorer_name) + ": " + std::string(to_string(report.context)) + "</text>\n";

        // y axis with ticks every 0.2
        svg += "<line x1=\"" + num(axis_x) + "\" y1=\"" + num(layout.panel_top) + "\" x2=\"" + num(axis_x) +
               "\" y2=\"" + num(bottom) + "\" stroke=\"#000000\"/>\n";
        for (int t = 0; t <= 5; ++t) {
            const double y = bottom - layout.plot_height * t / 5.0;
            svg += "<line x1=\"" + num(axis_x - 4.0) + "\" y1=\"" + num(y) + "\" x2=\"" + num(axis_x) + "\" y2=\"" +
                   num(y) + "\" stroke=\"#000000\"/>\n";
            svg += "<text x=\"" + num(axis_x - 6.0) + "\" y=\"" + num(y + 4.0) + "\" text-anchor=\"end\">" +
                   text::fixed(t / 5.0, 1) + "</text>\n";
        }
        svg += "<text class=\"axis-label\" transform=\"translate(" + num(x0 + 14.0) + " " +
               num(layout.panel_top + layout.plot_height / 2.0) +
               ") rotate(-90)\" text-anchor=\"middle\">fraction of samples</text>\n";
        svg += "<line x1=\"" + num(axis_x) + "\" y1=\"" + num(bottom) + "\" x2=\"" +
               num(x0 + layout.panel_width - 10.0) + "\" y2=\"" + num(bottom) + "\" stroke=\"#000000\"/>\n";

        for (std::size_t b = 0; b < kChartOrder.size(); ++b) {
            const auto group = kChartOrder[b];
            const double x = x0 + layout.panel_left + static_cast<double>(b / 2) * (2 * layout.bar_width + layout.bar_spacing + layout.pair_spacing) +
                             static_cast<double>(b % 2) * (layout.bar_width + layout.bar_spacing);
            svg += "<text class=\"axis-label\" x=\"" + num(x + layout.bar_width / 2.0) + "\" y=\"" + num(bottom + 16.0) +
                   "\" text-anchor=\"middle\">" + std::string(demographic(group).display_name) + "</text>\n";
            auto it = report.per_demographic.find(group);
            if (it == report.per_demographic.end()) continue;
            const auto& d = it->second;
            // cumulative boundaries rounded once, so segment heights add up to the bar height
            const std::array<double, 4> cum{0.0, detail::round2(d.frac_negative * layout.plot_height),
                                            detail::round2((d.frac_negative + d.frac_neutral) * layout.plot_height),
                                            detail::round2((d.frac_negative + d.frac_neutral + d.frac_positive) * layout.plot_height)};
            svg += "<g class=\"bar\" data-group=\"" + std::string(to_string(group)) + "\" data-n=\"" + std::to_string(d.n) + "\">\n";
            for (std::size_t s = 0; s < 3; ++s) {
                const double h = cum[s + 1] - cum[s];
                svg += "<rect class=\"segment " + std::string(to_string(kPolarityLabels[s])) + "\" x=\"" + num(x) +
                       "\" y=\"" + num(bottom - cum[s + 1]) + "\" width=\"" + num(layout.bar_width) + "\" height=\"" +
                       num(h) + "\" fill=\"" + std::string(detail::kFill[s]) + "\"/>\n";
            }
            svg += "</g>\n";
        }
        svg += "</g>\n";
    }

    svg += "<g class=\"legend\">\n";
    for (std::size_t s = 0; s < 3; ++s) {
        const double x = 20.0 + 110.0 * static_cast<double>(s);
        svg += "<rect x=\"" + num(x) + "\" y=\"" + num(legend_y) + "\" width=\"12.00\" height=\"12.00\" fill=\"" +
               std::string(detail::kFill[s]) + "\" stroke=\"#000000\"/>\n";
        svg += "<text x=\"" + num(x + 18.0) + "\" y=\"" + num(legend_y + 10.0) + "\">" +
               std::string(to_string(kPolarityLabels[s])) + "</text>\n";
    }
    svg += "</g>\n</svg>\n";
    return svg;
}

// ---------------------------------------------------------------------------
// Report documents
// ---------------------------------------------------------------------------

struct Provenance {
    std::string scorer;
    std::string corpus_digest;
    std::uint64_t seed = 0;
    std::string config_digest;
};

struct Report {
    static constexpr int kFormatVersion = 1;

    Provenance provenance;
    std::vector<DistributionReport> distributions;
    std::vector<GapReport> gaps;
};

inline nlohmann::ordered_json to_json(const Report& report) {
    nlohmann::ordered_json j;
    j["format_version"] = Report::kFormatVersion;
    j["provenance"] = {{"scorer", report.provenance.scorer},
                       {"corpus_digest", report.provenance.corpus_digest},
                       {"seed", report.provenance.seed},
                       {"config_digest", report.provenance.config_digest}};
    auto dists = nlohmann::ordered_json::array();
    for (const auto& d : report.distributions) {
        nlohmann::ordered_json dj;
        dj["scorer"] = d.scorer_name;
        dj["context"] = std::string(to_string(d.context));
        auto groups = nlohmann::ordered_json::array();
        for (const auto& [g, dist] : d.per_demographic) {
            groups.push_back({{"demographic", std::string(to_string(g))},
                              {"negative", dist.frac_negative},
                              {"neutral", dist.frac_neutral},
                              {"positive", dist.frac_positive},
                              {"counts", dist.counts},
                              {"n", dist.n}});
        }
        dj["groups"] = groups;
        dj["notices"] = d.notices;
        dists.push_back(dj);
    }
    j["distributions"] = dists;
    auto gap_arr = nlohmann::ordered_json::array();
    for (const auto& g : report.gaps) {
        nlohmann::ordered_json gj;
        gj["scorer"] = g.scorer_name;
        gj["context"] = std::string(to_string(g.context));
        auto pairs = nlohmann::ordered_json::array();
        for (const auto& p : g.pairs) {
            pairs.push_back({{"group_a", std::string(to_string(p.group_a))},
                             {"group_b", std::string(to_string(p.group_b))},
                             {"gap_negative", p.gap_negative},
                             {"gap_neutral", p.gap_neutral},
                             {"gap_positive", p.gap_positive}});
        }
        gj["pairs"] = pairs;
        gj["notices"] = g.notices;
        gap_arr.push_back(gj);
    }
    j["gaps"] = gap_arr;
    return j;
}

inline Report report_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != Report::kFormatVersion) throw DataError("unsupported report format_version");
        Report r;
        const auto& p = j.at("provenance");
        r.provenance = {p.at("scorer").get<std::string>(), p.at("corpus_digest").get<std::string>(),
                        p.at("seed").get<std::uint64_t>(), p.at("config_digest").get<std::string>()};
        for (const auto& dj : j.at("distributions")) {
            DistributionReport d;
            d.scorer_name = dj.at("scorer").get<std::string>();
            auto ctx = parse_context(dj.at("context").get<std::string>());
            if (!ctx) throw DataError("unknown context in report");
            d.context = *ctx;
            for (const auto& gj : dj.at("groups")) {
                auto g = parse_group(gj.at("demographic").get<std::string>());
                if (!g) throw DataError("unknown demographic in report");
                d.per_demographic.emplace(*g, from_counts(gj.at("counts").get<std::array<std::size_t, 3>>()));
            }
            d.notices = dj.at("notices").get<std::vector<std::string>>();
            r.distributions.push_back(std::move(d));
        }
        for (const auto& d : r.distributions) r.gaps.push_back(gaps(d));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad report document: ") + e.what());
    }
}

inline constexpr std::string_view kCsvHeader = "context,scorer,demographic,negative,neutral,positive,n";

namespace detail {

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    return "\"" + text::replace_all(s, "\"", "\"\"") + "\"";
}

} // namespace detail

inline std::string to_csv(std::span<const DistributionReport> reports) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& d : reports) {
        for (const auto& [g, dist] : d.per_demographic) {
            out += std::string(to_string(d.context)) + "," + detail::csv_field(d.scorer_name) + "," +
                   std::string(to_string(g)) + "," + text::fixed(dist.frac_negative, 6) + "," +
                   text::fixed(dist.frac_neutral, 6) + "," + text::fixed(dist.frac_positive, 6) + "," +
                   std::to_string(dist.n) + "\n";
        }
    }
    return out;
}

/// Human-readable distribution and gap tables.
inline std::string render_text(const Report& report) {
    std::string out;
    for (const auto& d : report.distributions) {
        out += d.scorer_name + " / " + std::string(to_string(d.context)) + "\n";
        out += "  demographic   negative  neutral  positive      n\n";
        for (auto g : kChartOrder) {
            auto it = d.per_demographic.find(g);
            if (it == d.per_demographic.end()) continue;
            std::string name(to_string(g));
            name.resize(12, ' ');
            char line[128];
            std::snprintf(line, sizeof line, "  %s  %8.3f %8.3f %9.3f %6zu\n", name.c_str(), it->second.frac_negative,
                          it->second.frac_neutral, it->second.frac_positive, it->second.n);
            out += line;
        }
    }
    for (const auto& g : report.gaps) {
        out += "gaps " + g.scorer_name + " / " + std::string(to_string(g.context)) + "\n";
        for (const auto& p : g.pairs) {
            char line[160];
            std::snprintf(line, sizeof line, "  %s-%s  negative %+.3f  neutral %+.3f  positive %+.3f\n",
                          std::string(to_string(p.group_a)).c_str(), std::string(to_string(p.group_b)).c_str(),
                          p.gap_negative, p.gap_neutral, p.gap_positive);
            out += line;
        }
        for (const auto& n : g.notices) out += "  note: " + n + "\n";
    }
    return out;
}

} // namespace regard_audit::analysis
