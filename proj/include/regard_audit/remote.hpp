#pragma once

#include <chrono>
#include <cmath>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "regard_audit/regard.hpp"

namespace regard_audit {

class RemoteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Wire protocol:
//   POST <endpoint>/score  {"texts": [string, ...]}
//   200 -> {"results": [{"label": "negative|neutral|positive",
//                        "scores": [p_neg, p_neu, p_pos]}, ...]}

inline std::string encode_score_request(std::span<const std::string> texts) {
    nlohmann::ordered_json j;
    j["texts"] = std::vector<std::string>(texts.begin(), texts.end());
    return j.dump();
}

inline std::string encode_score_response(std::span<const RegardResult> results) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : results) {
        nlohmann::ordered_json item;
        item["label"] = std::string(to_string(r.label));
        item["scores"] = {r.scores[0], r.scores[1], r.scores[2]};
        arr.push_back(item);
    }
    nlohmann::ordered_json j;
    j["results"] = arr;
    return j.dump();
}

/// Parses and validates a response: one result per request text, scores in
/// [0, 1] summing to 1 within 1e-6, and the label equal to the argmax under
/// the neutral-then-negative tie-break. Throws RemoteError naming the record.
inline std::vector<RegardResult> decode_score_response(std::string_view body, std::size_t expected) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw RemoteError(std::string("response is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("results") || !j["results"].is_array())
        throw RemoteError("response lacks a 'results' array");
    const auto& results = j["results"];
    if (results.size() != expected)
        throw RemoteError("response holds " + std::to_string(results.size()) + " results for " +
                          std::to_string(expected) + " texts");

    std::vector<RegardResult> out;
    out.reserve(expected);
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& item = results[i];
        const std::string where = "result " + std::to_string(i) + ": ";
        if (!item.is_object() || !item.contains("label") || !item["label"].is_string())
            throw RemoteError(where + "missing label");
        auto label = parse_polarity(item["label"].get<std::string>());
        if (!label) throw RemoteError(where + "unknown label '" + item["label"].get<std::string>() + "'");
        if (!item.contains("scores") || !item["scores"].is_array() || item["scores"].size() != 3)
            throw RemoteError(where + "scores must be an array of 3 numbers");
        ScoreTriple scores{};
        double total = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            if (!item["scores"][k].is_number()) throw RemoteError(where + "non-numeric score");
            scores[k] = item["scores"][k].get<double>();
            if (!(scores[k] >= 0.0 && scores[k] <= 1.0)) throw RemoteError(where + "score outside [0, 1]");
            total += scores[k];
        }
        if (std::abs(total - 1.0) > 1e-6) throw RemoteError(where + "scores do not sum to 1");
        if (argmax_label(scores) != *label)
            throw RemoteError(where + "label '" + std::string(to_string(*label)) + "' is not the argmax of its scores");
        out.push_back({*label, scores});
    }
    return out;
}

struct RemoteOptions {
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{100};
    std::chrono::seconds timeout{30};
};

/// Client for an external regard model. One request per batch; at most one
/// request in flight per client.
class RemoteRegardScorer final : public RegardScorer {
public:
    explicit RemoteRegardScorer(std::string endpoint, RemoteOptions options = {})
        : endpoint_(std::move(endpoint)), options_(options) {
        // split "http://host:port/prefix" into the origin and the path prefix
        const auto scheme_end = endpoint_.find("://");
        const auto path_start = endpoint_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
        origin_ = endpoint_.substr(0, path_start);
        if (path_start != std::string::npos) prefix_ = endpoint_.substr(path_start);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }

    std::string name() const override { return "remote"; }

    std::vector<RegardResult> score(std::span<const std::string> texts) const override {
        if (texts.empty()) throw std::invalid_argument("remote scoring needs a non-empty batch");
        std::lock_guard lock(in_flight_);
        const auto body = encode_score_request(texts);

        httplib::Client client(origin_);
        client.set_connection_timeout(options_.timeout);
        client.set_read_timeout(options_.timeout);
        client.set_write_timeout(options_.timeout);

        auto backoff = options_.initial_backoff;
        std::string last_error;
        for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(backoff);
                backoff *= 2;
            }
            auto res = client.Post(prefix_ + "/score", body, "application/json");
            if (!res) {
                last_error = "transport failure: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500) {
                last_error = "server error " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) throw RemoteError("remote scorer answered status " + std::to_string(res->status));
            return decode_score_response(res->body, texts.size());
        }
        throw RemoteError("remote scorer at " + endpoint_ + " failed after " +
                          std::to_string(options_.max_retries + 1) + " attempts (" + last_error + ")");
    }

    const std::string& endpoint() const noexcept { return endpoint_; }

private:
    std::string endpoint_;
    std::string origin_;
    std::string prefix_;
    RemoteOptions options_;
    mutable std::mutex in_flight_;
};

inline std::vector<RegardResult> remote_score(const std::string& endpoint, std::span<const std::string> masked_texts,
                                              RemoteOptions options = {}) {
    return RemoteRegardScorer(endpoint, options).score(masked_texts);
}

} // namespace regard_audit
