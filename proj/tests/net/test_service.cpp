#include <gtest/gtest.h>

#include <barrier>
#include <fstream>
#include <set>
#include <thread>

#include "regard_audit/service.hpp"
#include "server_harness.hpp"
#include "support.hpp"

using namespace regard_audit;
using namespace regard_audit::service;

namespace {

AnnotationBatch small_batch(std::size_t n) {
    AnnotationBatch batch;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string id = format_sample_id("respect-1/female", i + 1);
        batch.members.push_back({id, "respect-1/female", "XYZ was known for thing " + std::to_string(i) + "."});
    }
    return batch;
}

struct FakeClock {
    std::chrono::system_clock::time_point now = std::chrono::system_clock::time_point{} + std::chrono::hours(24 * 365 * 50);
};

StoreOptions with_clock(FakeClock& clock) {
    StoreOptions o;
    o.clock = [&clock] { return clock.now; };
    return o;
}

/// Labels every task an annotator is given until the queue is empty.
std::size_t drain(AnnotationStore& store, const std::string& annotator, std::string_view sentiment = "positive") {
    std::size_t n = 0;
    while (auto task = store.next_task(annotator)) {
        EXPECT_EQ(store.submit_label(annotator, task->sample_id, sentiment, "negative").status, Status::ok);
        ++n;
    }
    return n;
}

} // namespace

TEST(Store, FreshBatchProgress) {
    AnnotationStore store(small_batch(360));
    const auto p = store.progress();
    EXPECT_EQ(p.samples_total, 360u);
    EXPECT_EQ(p.fully_labeled, 0u);
    EXPECT_EQ(p.partially_labeled, 0u);
    EXPECT_TRUE(p.per_annotator_counts.empty());
    EXPECT_EQ(store.export_raw(), std::string(kRawHeader) + "\n");
}

TEST(Store, UnknownAnnotatorRejected) {
    AnnotationStore store(small_batch(2));
    EXPECT_THROW(store.next_task("ghost"), std::out_of_range);
    EXPECT_EQ(store.submit_label("ghost", "respect-1/female/0001", "positive", "positive").status, Status::not_found);
    store.register_annotator("a");
    EXPECT_EQ(store.submit_label("a", "nope", "positive", "positive").status, Status::not_found);
}

TEST(Store, ThreeSlotRule) {
    AnnotationStore store(small_batch(1));
    for (const auto* a : {"a", "b", "c", "d"}) store.register_annotator(a);
    const auto ta = store.next_task("a");
    const auto tb = store.next_task("b");
    const auto tc = store.next_task("c");
    ASSERT_TRUE(ta && tb && tc);
    EXPECT_EQ(ta->sample_id, tb->sample_id);
    EXPECT_EQ(ta->guidelines_version, std::string(kGuidelinesVersion));
    EXPECT_FALSE(store.next_task("d"));
    EXPECT_EQ(store.submit_label("d", ta->sample_id, "positive", "positive").status, Status::conflict);
    EXPECT_EQ(store.next_task("a")->sample_id, ta->sample_id);
    for (const auto* a : {"a", "b", "c"}) EXPECT_EQ(store.submit_label(a, ta->sample_id, "positive", "neutral_or_no_impact").status, Status::ok);
    EXPECT_FALSE(store.next_task("a"));
    EXPECT_FALSE(store.next_task("d"));
    EXPECT_EQ(store.progress().fully_labeled, 1u);
}

TEST(Store, NeverSameSampleTwice) {
    AnnotationStore store(small_batch(20));
    store.register_annotator("a");
    std::set<std::string> seen;
    while (auto t = store.next_task("a")) {
        EXPECT_TRUE(seen.insert(t->sample_id).second);
        store.submit_label("a", t->sample_id, "negative", "negative");
    }
    EXPECT_EQ(seen.size(), 20u);
    EXPECT_EQ(store.progress().partially_labeled, 20u);
    EXPECT_EQ(store.progress().per_annotator_counts.at("a"), 20u);
}

TEST(Store, FewestSubmissionsFirst) {
    AnnotationStore store(small_batch(3));
    for (const auto* a : {"a", "b"}) store.register_annotator(a);
    const auto first = store.next_task("a");
    store.submit_label("a", first->sample_id, "positive", "positive");
    const auto second = store.next_task("b");
    EXPECT_NE(second->sample_id, first->sample_id);
}

TEST(Store, SubmissionValidationAndUpsert) {
    AnnotationStore store(small_batch(2));
    store.register_annotator("a");
    const auto t = store.next_task("a");
    auto r = store.submit_label("a", t->sample_id, "mixed", "positive");
    EXPECT_EQ(r.status, Status::bad_request);
    EXPECT_EQ(r.field, "sentiment_category");
    EXPECT_NE(r.error.find(kCategoryVocabulary), std::string::npos);
    r = store.submit_label("a", t->sample_id, "positive", "");
    EXPECT_EQ(r.field, "regard_category");

    EXPECT_EQ(store.submit_label("a", t->sample_id, "positive", "positive").status, Status::ok);
    EXPECT_EQ(store.submit_label("a", t->sample_id, "negative", "mixed_both").status, Status::ok);
    const auto records = store.records();
    ASSERT_EQ(records.size(), 1u);
    EXPECT_EQ(records[0].sentiment, Category::negative);
    EXPECT_EQ(records[0].regard, Category::mixed_both);
    EXPECT_EQ(text::lines(store.export_raw()).size(), 2u);
}

TEST(Store, SealedRejectsSubmissions) {
    AnnotationStore store(small_batch(2));
    store.register_annotator("a");
    const auto t = store.next_task("a");
    store.seal();
    EXPECT_TRUE(store.sealed());
    EXPECT_EQ(store.submit_label("a", t->sample_id, "positive", "positive").status, Status::conflict);
    EXPECT_EQ(store.next_task("a")->sample_id, t->sample_id);
    store.register_annotator("b");
    EXPECT_FALSE(store.next_task("b"));
}

TEST(Store, ClaimsExpire) {
    FakeClock clock;
    AnnotationStore store(small_batch(1), with_clock(clock));
    for (const auto* a : {"a", "b", "c", "d"}) store.register_annotator(a);
    const auto ta = store.next_task("a");
    store.next_task("b");
    store.next_task("c");
    EXPECT_FALSE(store.next_task("d"));
    clock.now += std::chrono::minutes(29);
    EXPECT_FALSE(store.next_task("d"));
    clock.now += std::chrono::minutes(1);
    ASSERT_TRUE(store.next_task("d"));
    EXPECT_FALSE(store.next_task("a"));
    EXPECT_EQ(store.assignments().size(), 1u);
}

TEST(Store, LogReplayAndCompaction) {
    test_support::TempDir dir("service_log");
    StoreOptions options;
    options.log_path = dir.file("log.jsonl");
    options.compact_every = 5;
    std::string exported;
    {
        AnnotationStore store(small_batch(6), options);
        for (const auto* a : {"a", "b"}) store.register_annotator(a);
        drain(store, "a");
        drain(store, "b", "negative");
        const auto t = store.records().front();
        store.submit_label("a", t.sample_id, "neutral_or_no_impact", "neutral_or_no_impact");
        store.seal();
        exported = store.export_raw();
    }
    AnnotationStore replayed(small_batch(6), options);
    EXPECT_EQ(replayed.export_raw(), exported);
    EXPECT_TRUE(replayed.sealed());
    EXPECT_TRUE(replayed.is_registered("a"));
    replayed.compact();
    EXPECT_EQ(text::lines(text::read_file(dir.file("log.jsonl"))).size(), 13u);
    AnnotationStore again(small_batch(6), options);
    EXPECT_EQ(again.export_raw(), exported);

    std::ofstream(dir.file("log.jsonl"), std::ios::app) << "{\"op\":\"rename\"}\n";
    EXPECT_THROW(AnnotationStore(small_batch(6), options), DataError);
}

TEST(Store, ConcurrentClientsRespectSlots) {
    for (int round = 0; round < 20; ++round) {
        AnnotationStore store(small_batch(1));
        const std::vector<std::string> names{"a", "b", "c", "d", "e", "f"};
        for (const auto& n : names) store.register_annotator(n);
        std::barrier sync(static_cast<std::ptrdiff_t>(names.size()));
        std::vector<int> got(names.size(), 0);
        std::vector<std::thread> threads;
        for (std::size_t i = 0; i < names.size(); ++i) {
            threads.emplace_back([&, i] {
                sync.arrive_and_wait();
                if (auto t = store.next_task(names[i])) {
                    got[i] = 1;
                    store.submit_label(names[i], t->sample_id, "positive", "positive");
                }
            });
        }
        for (auto& t : threads) t.join();
        EXPECT_EQ(std::accumulate(got.begin(), got.end(), 0), 3);
        EXPECT_EQ(store.records().size(), 3u);
        EXPECT_EQ(store.progress().fully_labeled, 1u);
    }
}

TEST(Store, ScriptedRunMatchesInProcessGold) {
    const auto batch = load_batch(test_support::fixture("batch.tsv"));
    const auto fixture = load_raw_annotations(test_support::fixture("annotations_raw.tsv"));
    std::map<std::pair<std::string, std::string>, AnnotationRecord> answers;
    for (const auto& r : fixture) answers[{r.sample_id, r.annotator_id}] = r;

    AnnotationStore store(batch);
    const std::vector<std::string> annotators{"ann1", "ann2", "ann3"};
    for (const auto& a : annotators) store.register_annotator(a);
    std::vector<std::thread> threads;
    for (const auto& a : annotators) {
        threads.emplace_back([&store, &answers, a] {
            while (auto t = store.next_task(a)) {
                const auto& r = answers.at({t->sample_id, a});
                store.submit_label(a, t->sample_id, to_string(r.sentiment), to_string(r.regard));
            }
        });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(store.progress().fully_labeled, 360u);
    const auto exported = parse_raw(store.export_raw());
    EXPECT_EQ(serialize_gold(build_gold_dataset(exported, batch).gold),
              serialize_gold(build_gold_dataset(fixture, batch).gold));
}

TEST(Http, Routes) {
    AnnotationStore store(small_batch(6));
    for (const auto* a : {"a", "b", "c", "d"}) store.register_annotator(a);
    httplib::Server server;
    bind_routes(server, store);
    test_support::RunningServer running(server);
    httplib::Client client(running.origin());

    auto res = client.Get("/api/tasks/next");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 400);
    res = client.Get("/api/tasks/next?annotator=ghost");
    EXPECT_EQ(res->status, 404);

    res = client.Get("/api/guidelines");
    ASSERT_EQ(res->status, 200);
    const auto guide = nlohmann::json::parse(res->body);
    EXPECT_EQ(guide["sentiment"]["categories"].size(), 6u);
    EXPECT_EQ(guide["regard"]["categories"].size(), 6u);
    EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");

    res = client.Get("/api/tasks/next?annotator=a");
    ASSERT_EQ(res->status, 200);
    auto task = nlohmann::json::parse(res->body);
    const auto sample = task["sample_id"].get<std::string>();
    EXPECT_EQ(task["masked_text"].get<std::string>().rfind("XYZ", 0), 0u);

    const std::string path = "/api/tasks/" + httplib::detail::encode_url(sample) + "/label";
    res = client.Post(path, R"({"annotator":"a","sentiment_category":"mixed","regard_category":"positive"})",
                      "application/json");
    EXPECT_EQ(res->status, 400);
    EXPECT_EQ(nlohmann::json::parse(res->body)["field"], "sentiment_category");
    res = client.Post(path, R"({"annotator":"a"})", "application/json");
    EXPECT_EQ(res->status, 400);
    res = client.Post(path, "not json", "application/json");
    EXPECT_EQ(res->status, 400);
    res = client.Post(path, R"({"annotator":"a","sentiment_category":"positive","regard_category":"negative"})",
                      "application/json");
    EXPECT_EQ(res->status, 200);
    res = client.Post("/api/tasks/" + text::replace_all(sample, "/", "%2F") + "/label",
                      R"({"annotator":"a","sentiment_category":"positive","regard_category":"positive"})",
                      "application/json");
    EXPECT_EQ(res->status, 200);
    res = client.Post("/api/tasks/unknown/label",
                      R"({"annotator":"a","sentiment_category":"positive","regard_category":"negative"})",
                      "application/json");
    EXPECT_EQ(res->status, 404);

    res = client.Get("/api/progress");
    const auto progress = nlohmann::json::parse(res->body);
    EXPECT_EQ(progress["samples_total"], 6);
    EXPECT_EQ(progress["partially_labeled"], 1);

    res = client.Get("/api/export.tsv");
    EXPECT_EQ(res->get_header_value("Content-Type"), "text/tab-separated-values");
    EXPECT_EQ(parse_raw(res->body).size(), 1u);

    EXPECT_EQ(client.Options("/api/progress")->status, 200);

    res = client.Post("/api/seal", "", "application/json");
    EXPECT_EQ(res->status, 200);
    res = client.Get("/api/tasks/next?annotator=b");
    EXPECT_TRUE(nlohmann::json::parse(res->body)["sample_id"].is_null());
    res = client.Post(path, R"({"annotator":"a","sentiment_category":"positive","regard_category":"positive"})",
                      "application/json");
    EXPECT_EQ(res->status, 409);
}

TEST(Http, ThreeClientsCompleteSixSamples) {
    const auto full = load_batch(test_support::fixture("batch.tsv"));
    AnnotationBatch batch;
    batch.members.assign(full.members.begin(), full.members.begin() + 6);
    const auto fixture = load_raw_annotations(test_support::fixture("annotations_raw.tsv"));
    std::map<std::pair<std::string, std::string>, AnnotationRecord> answers;
    for (const auto& r : fixture) answers[{r.sample_id, r.annotator_id}] = r;

    AnnotationStore store(batch);
    for (const auto* a : {"ann1", "ann2", "ann3", "late"}) store.register_annotator(a);
    httplib::Server server;
    bind_routes(server, store);
    test_support::RunningServer running(server);

    std::vector<std::thread> clients;
    for (const std::string a : {"ann1", "ann2", "ann3"}) {
        clients.emplace_back([&, a] {
            httplib::Client client(running.origin());
            for (;;) {
                auto res = client.Get("/api/tasks/next?annotator=" + a);
                ASSERT_TRUE(res);
                const auto task = nlohmann::json::parse(res->body);
                if (task["sample_id"].is_null()) break;
                const auto id = task["sample_id"].get<std::string>();
                const auto& r = answers.at({id, a});
                nlohmann::json body{{"annotator", a},
                                    {"sentiment_category", std::string(to_string(r.sentiment))},
                                    {"regard_category", std::string(to_string(r.regard))}};
                auto post = client.Post("/api/tasks/" + httplib::detail::encode_url(id) + "/label", body.dump(),
                                        "application/json");
                ASSERT_TRUE(post);
                ASSERT_EQ(post->status, 200);
            }
        });
    }
    for (auto& c : clients) c.join();

    httplib::Client client(running.origin());
    EXPECT_EQ(nlohmann::json::parse(client.Get("/api/progress")->body)["fully_labeled"], 6);
    EXPECT_TRUE(nlohmann::json::parse(client.Get("/api/tasks/next?annotator=late")->body)["sample_id"].is_null());

    const auto exported = parse_raw(client.Get("/api/export.tsv")->body);
    std::vector<AnnotationRecord> expected;
    for (const auto& m : batch.members)
        for (const auto* a : {"ann1", "ann2", "ann3"}) expected.push_back(answers.at({m.sample_id, a}));
    EXPECT_EQ(serialize_gold(build_gold_dataset(exported, batch).gold),
              serialize_gold(build_gold_dataset(expected, batch).gold));
}
