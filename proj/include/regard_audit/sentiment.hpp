#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "regard_audit/labels.hpp"
#include "regard_audit/text.hpp"

namespace regard_audit::sentiment {

inline constexpr double kMaxValence = 4.0;
inline constexpr double kDefaultBoost = 0.293;

struct Lexicon {
    std::unordered_map<std::string, double> entries; // lowercase token -> valence in [-4, 4]
    std::unordered_set<std::string> negators;
    std::unordered_map<std::string, double> boosters; // negative increments dampen

    /// Throws DataError when a valence is out of range or a token is both a
    /// negator and a booster.
    void validate() const {
        for (const auto& [token, valence] : entries) {
            if (!(std::abs(valence) <= kMaxValence))
                throw DataError("valence of '" + token + "' outside [-4, 4]");
        }
        for (const auto& n : negators) {
            if (boosters.count(n)) throw DataError("'" + n + "' is both a negator and a booster");
        }
    }
};

struct Config {
    double alpha = 15.0;
    int neg_window = 3;
    double pos_threshold = 0.05;
    double neg_threshold = -0.05;
    double negation_factor = -0.74;
    double caps_boost = 0.733;
    double exclaim_boost = 0.292;
    int max_exclaims = 3;

    void validate() const {
        if (!(alpha > 0)) throw std::invalid_argument("alpha must be > 0");
        if (neg_window < 1) throw std::invalid_argument("neg_window must be >= 1");
        if (!(neg_threshold < 0 && 0 < pos_threshold))
            throw std::invalid_argument("thresholds must satisfy neg < 0 < pos");
        if (!(negation_factor > -1 && negation_factor < 0))
            throw std::invalid_argument("negation_factor must lie in (-1, 0)");
        if (caps_boost < 0 || exclaim_boost < 0) throw std::invalid_argument("boosts must be >= 0");
    }
};

struct Result {
    double sum = 0.0;      // summed adjusted valence
    double compound = 0.0; // sum / sqrt(sum^2 + alpha)
    PolarityLabel label = PolarityLabel::neutral;
};

inline double normalize(double sum, double alpha) { return sum / std::sqrt(sum * sum + alpha); }

/// Positive iff compound >= pos_threshold, negative iff compound <= neg_threshold.
inline PolarityLabel label_from_compound(double compound, const Config& config = {}) {
    if (compound >= config.pos_threshold) return PolarityLabel::positive;
    if (compound <= config.neg_threshold) return PolarityLabel::negative;
    return PolarityLabel::neutral;
}

/// Whitespace-separated words with leading and trailing punctuation removed.
/// Case is preserved; inner apostrophes and hyphens stay ("don't", "well-known").
inline std::vector<std::string> tokenize(std::string_view input) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < input.size()) {
        while (i < input.size() && text::is_space(input[i])) ++i;
        std::size_t start = i;
        while (i < input.size() && !text::is_space(input[i])) ++i;
        auto word = input.substr(start, i - start);
        while (!word.empty() && text::is_punct(word.front())) word.remove_prefix(1);
        while (!word.empty() && text::is_punct(word.back())) word.remove_suffix(1);
        if (!word.empty()) tokens.emplace_back(word);
    }
    return tokens;
}

namespace detail {

inline bool all_caps(std::string_view token) {
    bool has_alpha = false;
    for (char c : token) {
        if (!text::is_alpha(c)) continue;
        has_alpha = true;
        if (!text::is_upper(c)) return false;
    }
    return has_alpha;
}

inline double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

inline int trailing_exclaims(std::string_view s) {
    s = text::trim(s);
    int count = 0;
    for (auto it = s.rbegin(); it != s.rend(); ++it) {
        if (*it == '!') ++count;
        else if (*it != '?' && *it != '.') break;
    }
    return count;
}

} // namespace detail

/// Scores a text. Negators and boosters modify the valence of the sentiment
/// tokens that follow them and carry no valence of their own.
inline Result analyze(std::string_view input, const Lexicon& lexicon, const Config& config = {}) {
    const auto tokens = tokenize(input);
    std::vector<std::string> lowered;
    lowered.reserve(tokens.size());
    bool any_lower_word = false;
    for (const auto& t : tokens) {
        lowered.push_back(text::to_lower(t));
        bool has_alpha = false;
        for (char c : t) has_alpha = has_alpha || text::is_alpha(c);
        if (has_alpha && !detail::all_caps(t)) any_lower_word = true;
    }

    double sum = 0.0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& word = lowered[i];
        if (lexicon.negators.count(word) || lexicon.boosters.count(word)) continue;
        auto it = lexicon.entries.find(word);
        if (it == lexicon.entries.end() || it->second == 0.0) continue;

        double valence = it->second;
        if (any_lower_word && detail::all_caps(tokens[i])) valence += config.caps_boost * detail::sign(valence);

        const std::size_t window_start = i >= static_cast<std::size_t>(config.neg_window) ? i - config.neg_window : 0;
        for (std::size_t k = window_start; k < i; ++k) {
            auto b = lexicon.boosters.find(lowered[k]);
            if (b != lexicon.boosters.end()) valence += b->second * detail::sign(valence);
        }
        for (std::size_t k = window_start; k < i; ++k) {
            if (lexicon.negators.count(lowered[k])) valence *= config.negation_factor;
        }
        sum += valence;
    }

    if (sum != 0.0) {
        const int marks = std::min(detail::trailing_exclaims(input), config.max_exclaims);
        sum += marks * config.exclaim_boost * detail::sign(sum);
    }

    Result r;
    r.sum = sum;
    r.compound = sum == 0.0 ? 0.0 : normalize(sum, config.alpha);
    r.label = label_from_compound(r.compound, config);
    return r;
}

/// Immutable bundle of lexicon and configuration.
class Analyzer {
public:
    Analyzer(Lexicon lexicon, Config config = {}) : lexicon_(std::move(lexicon)), config_(config) {
        lexicon_.validate();
        config_.validate();
    }

    Result analyze(std::string_view input) const { return sentiment::analyze(input, lexicon_, config_); }
    PolarityLabel label(std::string_view input) const { return analyze(input).label; }

    const Lexicon& lexicon() const noexcept { return lexicon_; }
    const Config& config() const noexcept { return config_; }

private:
    Lexicon lexicon_;
    Config config_;
};

// ---------------------------------------------------------------------------
// Resource files
// ---------------------------------------------------------------------------

struct LexiconLoad {
    std::unordered_map<std::string, double> entries;
    std::vector<std::string> warnings;
};

/// `token<TAB>valence` rows; extra columns are ignored. Duplicate tokens keep
/// the last value and produce a warning.
inline LexiconLoad parse_lexicon(std::string_view content) {
    LexiconLoad out;
    auto rows = text::lines(content);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (text::trim(rows[i]).empty()) continue;
        auto f = text::split(rows[i], '\t');
        if (f.size() < 2) throw DataError("expected token<TAB>valence", i + 1);
        auto value = text::parse_double(f[1]);
        if (!value) throw DataError("non-numeric valence '" + std::string(f[1]) + "'", i + 1);
        if (!(std::abs(*value) <= kMaxValence)) throw DataError("valence outside [-4, 4]", i + 1);
        auto token = text::to_lower(f[0]);
        if (!out.entries.insert_or_assign(token, *value).second)
            out.warnings.push_back("line " + std::to_string(i + 1) + ": duplicate token '" + token + "', last wins");
    }
    return out;
}

inline LexiconLoad load_lexicon(const std::string& path) { return parse_lexicon(text::read_file(path)); }

inline std::unordered_set<std::string> parse_negators(std::string_view content) {
    std::unordered_set<std::string> out;
    for (auto row : text::lines(content)) {
        auto t = text::trim(row);
        if (!t.empty() && t.front() != '#') out.insert(text::to_lower(t));
    }
    return out;
}

/// One booster per line, optionally followed by `<TAB>increment`
/// (default +0.293; dampeners carry a negative increment).
inline std::unordered_map<std::string, double> parse_boosters(std::string_view content) {
    std::unordered_map<std::string, double> out;
    auto rows = text::lines(content);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto t = text::trim(rows[i]);
        if (t.empty() || t.front() == '#') continue;
        auto f = text::split(t, '\t');
        double inc = kDefaultBoost;
        if (f.size() >= 2) {
            auto v = text::parse_double(f[1]);
            if (!v) throw DataError("non-numeric booster increment", i + 1);
            inc = *v;
        }
        out.insert_or_assign(text::to_lower(text::trim(f[0])), inc);
    }
    return out;
}

struct ResourcePaths {
    std::string lexicon;
    std::string negators;
    std::string boosters;

    static ResourcePaths in_directory(const std::string& dir) {
        return {dir + "/valence.tsv", dir + "/negators.txt", dir + "/boosters.txt"};
    }
};

inline Lexicon load_resources(const ResourcePaths& paths, std::vector<std::string>* warnings = nullptr) {
    auto loaded = load_lexicon(paths.lexicon);
    if (warnings) warnings->insert(warnings->end(), loaded.warnings.begin(), loaded.warnings.end());
    Lexicon lex;
    lex.entries = std::move(loaded.entries);
    lex.negators = parse_negators(text::read_file(paths.negators));
    lex.boosters = parse_boosters(text::read_file(paths.boosters));
    lex.validate();
    return lex;
}

} // namespace regard_audit::sentiment
