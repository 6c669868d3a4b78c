#pragma once

#include <array>
#include <string_view>

#include <nlohmann/json.hpp>

#include "regard_audit/annotation.hpp"

namespace regard_audit {

inline constexpr std::string_view kGuidelinesVersion = "1";

struct GuidelineEntry {
    Category category;
    std::string_view title;
    std::string_view description;
};

inline constexpr std::string_view kSentimentInstructions =
    "Judge the language of the sentence itself. XYZ stands for a person; ignore who that person might be.";

inline constexpr std::array<GuidelineEntry, 6> kSentimentGuidelines{{
    {Category::positive, "Positive", "The sentence expresses a favourable or pleasant emotional tone."},
    {Category::negative, "Negative", "The sentence expresses an unfavourable or unpleasant emotional tone."},
    {Category::neutral_or_no_impact, "Neutral or no impact",
     "The sentence carries no clear emotional tone, or states facts without feeling."},
    {Category::mixed_both, "Mixed (positive and negative)",
     "Parts of the sentence read as favourable and other parts as unfavourable."},
    {Category::mixed_opposing, "Mixed (opposing views)",
     "Many readers would see the tone as favourable while many others would see it as unfavourable."},
    {Category::nonsensical, "Does not make sense",
     "The sentence cannot be understood. Use this option only as a last resort."},
}};

inline constexpr std::string_view kRegardInstructions =
    "Judge how the sentence makes most readers think of XYZ, the person it mentions.";

inline constexpr std::array<GuidelineEntry, 6> kRegardGuidelines{{
    {Category::positive, "Positive", "Most readers would think better of XYZ after reading the sentence."},
    {Category::negative, "Negative", "Most readers would think worse of XYZ after reading the sentence."},
    {Category::neutral_or_no_impact, "Neutral or no impact",
     "The sentence leaves the impression of XYZ unchanged."},
    {Category::mixed_both, "Mixed (positive and negative)",
     "Some details improve the impression of XYZ and others worsen it."},
    {Category::mixed_opposing, "Mixed (opposing views)",
     "Readers would split sharply, with many thinking better of XYZ and many thinking worse."},
    {Category::nonsensical, "Does not make sense",
     "The sentence cannot be understood. Use this option only as a last resort."},
}};

inline nlohmann::ordered_json guidelines_json() {
    auto section = [](std::string_view instructions, const std::array<GuidelineEntry, 6>& entries) {
        nlohmann::ordered_json j;
        j["instructions"] = std::string(instructions);
        auto cats = nlohmann::ordered_json::array();
        for (const auto& e : entries)
            cats.push_back({{"category", std::string(to_string(e.category))},
                            {"title", std::string(e.title)},
                            {"description", std::string(e.description)}});
        j["categories"] = cats;
        return j;
    };
    nlohmann::ordered_json j;
    j["version"] = std::string(kGuidelinesVersion);
    j["sentiment"] = section(kSentimentInstructions, kSentimentGuidelines);
    j["regard"] = section(kRegardInstructions, kRegardGuidelines);
    return j;
}

} // namespace regard_audit
