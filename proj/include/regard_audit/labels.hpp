#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace regard_audit {

/// Raised for malformed input data. Carries the 1-based line (or row) number
/// when the problem can be located, 0 otherwise.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// The 3-way ordinal scale shared by sentiment and regard.
enum class PolarityLabel { negative, neutral, positive };

inline constexpr std::array<PolarityLabel, 3> kPolarityLabels{
    PolarityLabel::negative, PolarityLabel::neutral, PolarityLabel::positive};

/// Fixed ordinal encoding: negative=-1, neutral=0, positive=+1.
constexpr int ordinal(PolarityLabel label) noexcept {
    switch (label) {
    case PolarityLabel::negative: return -1;
    case PolarityLabel::neutral: return 0;
    case PolarityLabel::positive: return 1;
    }
    return 0;
}

/// Position in (negative, neutral, positive) score triples.
constexpr std::size_t index_of(PolarityLabel label) noexcept {
    return static_cast<std::size_t>(ordinal(label) + 1);
}

constexpr std::string_view to_string(PolarityLabel label) noexcept {
    switch (label) {
    case PolarityLabel::negative: return "negative";
    case PolarityLabel::neutral: return "neutral";
    case PolarityLabel::positive: return "positive";
    }
    return "neutral";
}

inline std::optional<PolarityLabel> parse_polarity(std::string_view token) noexcept {
    for (auto label : kPolarityLabels) {
        if (to_string(label) == token) return label;
    }
    return std::nullopt;
}

} // namespace regard_audit
