#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "regard_audit/annotation.hpp"
#include "regard_audit/guidelines.hpp"

namespace regard_audit::service {

using Clock = std::function<std::chrono::system_clock::time_point()>;

enum class TaskState { pending, claimed, submitted };

constexpr std::string_view to_string(TaskState s) noexcept {
    switch (s) {
    case TaskState::pending: return "pending";
    case TaskState::claimed: return "claimed";
    case TaskState::submitted: return "submitted";
    }
    return "pending";
}

struct TaskAssignment {
    std::string sample_id;
    std::string annotator_id;
    TaskState state = TaskState::pending;
    std::chrono::system_clock::time_point claimed_at{};
};

struct Task {
    std::string sample_id;
    std::string masked_text;
    std::string guidelines_version;
};

struct Progress {
    std::size_t samples_total = 0;
    std::size_t fully_labeled = 0;
    std::size_t partially_labeled = 0;
    std::map<std::string, std::size_t> per_annotator_counts;
};

/// Outcome codes map onto HTTP statuses 200/400/404/409.
enum class Status { ok = 200, bad_request = 400, not_found = 404, conflict = 409 };

struct SubmitResult {
    Status status = Status::ok;
    std::string error;
    std::string field;
};

struct StoreOptions {
    static constexpr std::size_t kSlots = 3;

    std::chrono::seconds claim_timeout{30 * 60};
    Clock clock = [] { return std::chrono::system_clock::now(); };
    std::optional<std::filesystem::path> log_path;
    std::size_t compact_every = 256; // appended entries between compactions
};

inline std::string iso_timestamp(std::chrono::system_clock::time_point t) {
    const auto secs = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// In-memory task store over one batch, optionally backed by an append log.
/// Every operation takes the store lock, so readers see a consistent snapshot.
class AnnotationStore {
public:
    explicit AnnotationStore(AnnotationBatch batch, StoreOptions options = {})
        : batch_(std::move(batch)), options_(std::move(options)) {
        for (std::size_t i = 0; i < batch_.members.size(); ++i) {
            index_.emplace(batch_.members[i].sample_id, i);
            samples_.emplace_back();
        }
        if (options_.log_path) replay();
    }

    void register_annotator(const std::string& id) {
        if (id.empty()) throw std::invalid_argument("annotator id must not be empty");
        std::lock_guard lock(mutex_);
        annotators_.insert(id);
    }

    bool is_registered(const std::string& id) const {
        std::lock_guard lock(mutex_);
        return annotators_.count(id) > 0;
    }

    /// Claims a sample for `annotator`: an unexpired claim the annotator already
    /// holds is returned again; otherwise the open sample with the fewest
    /// submissions (batch order on ties) that the annotator has never been
    /// given. nullopt when none remain. Throws std::out_of_range for an
    /// unregistered annotator.
    std::optional<Task> next_task(const std::string& annotator) {
        std::lock_guard lock(mutex_);
        if (!annotators_.count(annotator)) throw std::out_of_range("unknown annotator '" + annotator + "'");
        const auto now = options_.clock();
        expire_claims(now);

        for (std::size_t i = 0; i < samples_.size(); ++i) {
            auto it = samples_[i].find(annotator);
            if (it != samples_[i].end() && it->second.state == TaskState::claimed) return task_for(i);
        }
        if (sealed_) return std::nullopt;

        std::optional<std::size_t> best;
        std::size_t best_submitted = 0;
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            if (samples_[i].count(annotator) || seen_[annotator].count(i)) continue;
            if (active_slots(i) >= StoreOptions::kSlots) continue;
            const auto submitted = submissions(i);
            if (!best || submitted < best_submitted) {
                best = i;
                best_submitted = submitted;
            }
        }
        if (!best) return std::nullopt;
        samples_[*best][annotator] = {batch_.members[*best].sample_id, annotator, TaskState::claimed, now};
        seen_[annotator].insert(*best);
        return task_for(*best);
    }

    /// Records (or replaces) the annotator's labels for a sample.
    SubmitResult submit_label(const std::string& annotator, const std::string& sample_id,
                              std::string_view sentiment_token, std::string_view regard_token) {
        std::lock_guard lock(mutex_);
        if (!annotators_.count(annotator)) return {Status::not_found, "unknown annotator '" + annotator + "'", "annotator"};
        auto idx = index_.find(sample_id);
        if (idx == index_.end()) return {Status::not_found, "unknown sample '" + sample_id + "'", "sample_id"};
        auto s = parse_category(sentiment_token);
        if (!s)
            return {Status::bad_request,
                    "sentiment_category '" + std::string(sentiment_token) + "' not in " + std::string(kCategoryVocabulary),
                    "sentiment_category"};
        auto r = parse_category(regard_token);
        if (!r)
            return {Status::bad_request,
                    "regard_category '" + std::string(regard_token) + "' not in " + std::string(kCategoryVocabulary),
                    "regard_category"};
        if (sealed_) return {Status::conflict, "batch is sealed", ""};

        const auto now = options_.clock();
        expire_claims(now);
        const auto i = idx->second;
        auto& slots = samples_[i];
        auto it = slots.find(annotator);
        if (it == slots.end() && active_slots(i) >= StoreOptions::kSlots)
            return {Status::conflict, "sample '" + sample_id + "' has no open annotator slot", "sample_id"};

        AnnotationRecord record{sample_id, annotator, *s, *r, iso_timestamp(now)};
        apply_submission(i, record);
        seen_[annotator].insert(i);
        append_log(submit_entry(record));
        return {};
    }

    void seal() {
        std::lock_guard lock(mutex_);
        if (sealed_) return;
        sealed_ = true;
        append_log({{"op", "seal"}});
    }

    bool sealed() const {
        std::lock_guard lock(mutex_);
        return sealed_;
    }

    Progress progress() const {
        std::lock_guard lock(mutex_);
        Progress p;
        p.samples_total = samples_.size();
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            const auto n = submissions(i);
            if (n >= StoreOptions::kSlots) ++p.fully_labeled;
            else if (n > 0) ++p.partially_labeled;
        }
        for (const auto& [key, record] : records_) ++p.per_annotator_counts[record.annotator_id];
        return p;
    }

    std::vector<AnnotationRecord> records() const {
        std::lock_guard lock(mutex_);
        std::vector<AnnotationRecord> out;
        for (const auto& [key, record] : records_) out.push_back(record);
        return out;
    }

    std::vector<TaskAssignment> assignments() const {
        std::lock_guard lock(mutex_);
        std::vector<TaskAssignment> out;
        for (const auto& slots : samples_)
            for (const auto& [a, t] : slots) out.push_back(t);
        return out;
    }

    std::string export_raw() const { return serialize_raw(records()); }

    const AnnotationBatch& batch() const noexcept { return batch_; }

    /// Rewrites the log as one entry per current record (plus the seal marker).
    void compact() {
        std::lock_guard lock(mutex_);
        compact_locked();
    }

private:
    using Slots = std::map<std::string, TaskAssignment>;

    Task task_for(std::size_t i) const {
        return {batch_.members[i].sample_id, batch_.members[i].masked_text, std::string(kGuidelinesVersion)};
    }

    std::size_t submissions(std::size_t i) const {
        std::size_t n = 0;
        for (const auto& [a, t] : samples_[i]) n += t.state == TaskState::submitted;
        return n;
    }

    std::size_t active_slots(std::size_t i) const { return samples_[i].size(); }

    void expire_claims(std::chrono::system_clock::time_point now) {
        for (auto& slots : samples_) {
            for (auto it = slots.begin(); it != slots.end();) {
                if (it->second.state == TaskState::claimed && now - it->second.claimed_at >= options_.claim_timeout)
                    it = slots.erase(it);
                else
                    ++it;
            }
        }
    }

    void apply_submission(std::size_t i, const AnnotationRecord& record) {
        auto& t = samples_[i][record.annotator_id];
        t.sample_id = record.sample_id;
        t.annotator_id = record.annotator_id;
        t.state = TaskState::submitted;
        records_.insert_or_assign(std::make_pair(record.sample_id, record.annotator_id), record);
    }

    static nlohmann::ordered_json submit_entry(const AnnotationRecord& r) {
        return {{"op", "submit"},
                {"sample_id", r.sample_id},
                {"annotator_id", r.annotator_id},
                {"sentiment_category", std::string(to_string(r.sentiment))},
                {"regard_category", std::string(to_string(r.regard))},
                {"timestamp", r.timestamp}};
    }

    void append_log(const nlohmann::ordered_json& entry) {
        if (!options_.log_path) return;
        {
            std::ofstream out(*options_.log_path, std::ios::app | std::ios::binary);
            if (!out) throw DataError("cannot append to " + options_.log_path->string());
            out << entry.dump() << '\n';
        }
        if (++appended_ >= options_.compact_every) compact_locked();
    }

    void compact_locked() {
        if (!options_.log_path) return;
        auto tmp = *options_.log_path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
            if (!out) throw DataError("cannot write " + tmp.string());
            for (const auto& [key, record] : records_) out << submit_entry(record).dump() << '\n';
            if (sealed_) out << nlohmann::ordered_json{{"op", "seal"}}.dump() << '\n';
        }
        std::filesystem::rename(tmp, *options_.log_path);
        appended_ = 0;
    }

    void replay() {
        std::ifstream in(*options_.log_path, std::ios::binary);
        if (!in) return;
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (text::trim(line).empty()) continue;
            try {
                const auto j = nlohmann::json::parse(line);
                const auto op = j.at("op").get<std::string>();
                if (op == "seal") {
                    sealed_ = true;
                    continue;
                }
                if (op != "submit") throw DataError("unknown log op '" + op + "'", n);
                AnnotationRecord r;
                r.sample_id = j.at("sample_id").get<std::string>();
                r.annotator_id = j.at("annotator_id").get<std::string>();
                auto s = parse_category(j.at("sentiment_category").get<std::string>());
                auto g = parse_category(j.at("regard_category").get<std::string>());
                if (!s || !g) throw DataError("invalid category in log", n);
                r.sentiment = *s;
                r.regard = *g;
                r.timestamp = j.at("timestamp").get<std::string>();
                auto idx = index_.find(r.sample_id);
                if (idx == index_.end()) throw DataError("log names sample '" + r.sample_id + "' outside the batch", n);
                annotators_.insert(r.annotator_id);
                apply_submission(idx->second, r);
                seen_[r.annotator_id].insert(idx->second);
            } catch (const nlohmann::json::exception& e) {
                throw DataError(std::string("malformed log entry: ") + e.what(), n);
            }
        }
    }

    AnnotationBatch batch_;
    StoreOptions options_;
    mutable std::mutex mutex_;
    std::map<std::string, std::size_t, std::less<>> index_;
    std::vector<Slots> samples_;
    std::map<std::string, std::set<std::size_t>> seen_;
    std::set<std::string> annotators_;
    std::map<std::pair<std::string, std::string>, AnnotationRecord> records_;
    bool sealed_ = false;
    std::size_t appended_ = 0;
};

// ---------------------------------------------------------------------------
// HTTP binding
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const Progress& p) {
    nlohmann::ordered_json counts = nlohmann::ordered_json::object();
    for (const auto& [a, n] : p.per_annotator_counts) counts[a] = n;
    return {{"samples_total", p.samples_total},
            {"fully_labeled", p.fully_labeled},
            {"partially_labeled", p.partially_labeled},
            {"per_annotator_counts", counts}};
}

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message, const std::string& field = "") {
    nlohmann::ordered_json body{{"error", message}};
    if (!field.empty()) body["field"] = field;
    send_json(res, status, body);
}

} // namespace detail

/// Registers the API routes on `server`. When `ui_dir` is set, its files are
/// served at "/".
inline void bind_routes(httplib::Server& server, AnnotationStore& store,
                        const std::optional<std::filesystem::path>& ui_dir = std::nullopt) {
    using detail::send_error;
    using detail::send_json;

    server.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    });
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 200; });

    server.Get("/api/tasks/next", [&store](const httplib::Request& req, httplib::Response& res) {
        const auto annotator = req.get_param_value("annotator");
        if (annotator.empty()) return send_error(res, 400, "missing query parameter 'annotator'", "annotator");
        try {
            auto task = store.next_task(annotator);
            if (!task)
                return send_json(res, 200, {{"sample_id", nullptr}, {"masked_text", nullptr},
                                            {"guidelines_version", std::string(kGuidelinesVersion)}});
            send_json(res, 200, {{"sample_id", task->sample_id}, {"masked_text", task->masked_text},
                                 {"guidelines_version", task->guidelines_version}});
        } catch (const std::out_of_range& e) {
            send_error(res, 404, e.what(), "annotator");
        }
    });

    // sample ids contain '/', so the id segment spans everything up to the final "/label"
    server.Post(R"(/api/tasks/(.+)/label)", [&store](const httplib::Request& req, httplib::Response& res) {
        const std::string sample_id = req.matches[1].str();
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::parse_error&) {
            return send_error(res, 400, "request body is not valid JSON");
        }
        for (const char* field : {"annotator", "sentiment_category", "regard_category"}) {
            if (!body.is_object() || !body.contains(field) || !body[field].is_string())
                return send_error(res, 400, std::string("missing string field '") + field + "'", field);
        }
        const auto annotator = body["annotator"].get<std::string>();
        auto result = store.submit_label(annotator, sample_id, body["sentiment_category"].get<std::string>(),
                                         body["regard_category"].get<std::string>());
        if (result.status != Status::ok) return send_error(res, static_cast<int>(result.status), result.error, result.field);
        send_json(res, 200, {{"status", "ok"}, {"sample_id", sample_id}, {"annotator", annotator}});
    });

    server.Get("/api/progress", [&store](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, to_json(store.progress()));
    });

    server.Get("/api/export.tsv", [&store](const httplib::Request&, httplib::Response& res) {
        res.status = 200;
        res.set_content(store.export_raw(), "text/tab-separated-values");
    });

    server.Get("/api/guidelines", [](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, guidelines_json());
    });

    server.Post("/api/seal", [&store](const httplib::Request&, httplib::Response& res) {
        store.seal();
        send_json(res, 200, {{"status", "sealed"}});
    });

    if (ui_dir) server.set_mount_point("/", ui_dir->string());
}

} // namespace regard_audit::service
