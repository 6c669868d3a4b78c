#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "regard_audit/agreement.hpp"
#include "regard_audit/analysis.hpp"
#include "regard_audit/annotation.hpp"
#include "regard_audit/corpus.hpp"
#include "regard_audit/digest.hpp"
#include "regard_audit/regard.hpp"
#include "regard_audit/remote.hpp"
#include "regard_audit/sentiment.hpp"
#include "regard_audit/service.hpp"
#include "regard_audit/templates.hpp"

#ifndef REGARD_AUDIT_DATA_DIR
#define REGARD_AUDIT_DATA_DIR "data"
#endif

namespace regard_audit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

inline constexpr std::string_view kRemoteEnv = "REGARD_AUDIT_REMOTE_URL";

enum class ScorerKind { sentiment_baseline, trained, remote };

inline std::optional<ScorerKind> parse_scorer_kind(std::string_view s) {
    if (s == "sentiment_baseline") return ScorerKind::sentiment_baseline;
    if (s == "trained") return ScorerKind::trained;
    if (s == "remote") return ScorerKind::remote;
    return std::nullopt;
}

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parallel scoring in contiguous chunks; result order follows `texts`.
inline std::vector<RegardResult> score_parallel(const RegardScorer& scorer, const std::vector<std::string>& texts,
                                                unsigned jobs) {
    if (texts.empty()) return {};
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(texts.size())));
    const std::size_t chunk = (texts.size() + jobs - 1) / jobs;
    std::vector<std::vector<RegardResult>> parts(jobs);
    std::vector<std::exception_ptr> errors(jobs);
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < jobs; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(texts.size(), begin + chunk);
        if (begin >= end) break;
        workers.emplace_back([&, w, begin, end] {
            try {
                parts[w] = scorer.score(std::span<const std::string>(texts.data() + begin, end - begin));
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<RegardResult> out;
    out.reserve(texts.size());
    for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    if (out.size() != texts.size()) throw std::runtime_error("scorer returned a wrong number of results");
    return out;
}

namespace detail {

struct Globals {
    std::uint64_t seed = 1;
    bool pretty = false;
    unsigned jobs = 1;
    std::string templates_file;
    std::string data_dir = REGARD_AUDIT_DATA_DIR;
    std::string remote;
    std::string lexicon, negators, boosters;
};

inline TemplateSet load_template_set(const Globals& g) {
    return g.templates_file.empty() ? TemplateSet{} : load_templates(g.templates_file);
}

inline std::shared_ptr<const sentiment::Analyzer> load_analyzer(const Globals& g, std::ostream& err) {
    std::vector<std::string> warnings;
    auto paths = sentiment::ResourcePaths::in_directory((std::filesystem::path(g.data_dir) / "lexicon").string());
    if (!g.lexicon.empty()) paths.lexicon = g.lexicon;
    if (!g.negators.empty()) paths.negators = g.negators;
    if (!g.boosters.empty()) paths.boosters = g.boosters;
    auto lexicon = sentiment::load_resources(paths, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << "\n";
    return std::make_shared<const sentiment::Analyzer>(std::move(lexicon));
}

inline std::unique_ptr<RegardScorer> make_scorer(const std::string& kind_name, const std::string& model_path,
                                                 const Globals& g, std::ostream& err) {
    auto kind = parse_scorer_kind(kind_name);
    if (!kind) throw UsageError("unknown scorer '" + kind_name + "' (sentiment_baseline, trained, remote)");
    switch (*kind) {
    case ScorerKind::sentiment_baseline: return std::make_unique<SentimentBaselineScorer>(load_analyzer(g, err));
    case ScorerKind::trained:
        if (model_path.empty()) throw UsageError("--scorer trained needs --model");
        return std::make_unique<LinearRegardScorer>(load_model(model_path));
    case ScorerKind::remote:
        if (g.remote.empty()) throw UsageError("--scorer remote needs --remote or " + std::string(kRemoteEnv));
        return std::make_unique<RemoteRegardScorer>(g.remote);
    }
    throw UsageError("unknown scorer");
}

/// Digest over the subcommand and every option value that can change results.
/// Output locations, --jobs and --pretty are left out.
inline std::string config_digest(const CLI::App& root, const CLI::App& sub) {
    nlohmann::ordered_json j;
    j["subcommand"] = sub.get_name();
    auto collect = [&](const CLI::App& app) {
        for (const CLI::Option* o : app.get_options()) {
            const auto name = o->get_name();
            if (name == "--help" || name == "--jobs" || name == "--pretty" || o->get_group() == "Output") continue;
            if (o->count() > 0) j[name] = o->results();
            else j[name] = o->get_default_str();
        }
    };
    collect(root);
    collect(sub);
    return sha256_hex(j.dump());
}

inline nlohmann::ordered_json provenance_json(const std::string& digest, std::uint64_t seed) {
    return {{"config_digest", digest}, {"seed", seed}};
}

/// Tabular data files keep their exact formats; their provenance goes to a
/// `<file>.provenance.json` sidecar.
inline void write_tabular(const std::string& path, const std::string& content, const std::string& digest,
                          std::uint64_t seed) {
    text::write_file(path, content);
    auto meta = provenance_json(digest, seed);
    meta["artifact"] = std::filesystem::path(path).filename().string();
    text::write_file(path + ".provenance.json", meta.dump(2) + "\n");
}

inline void emit(std::ostream& out, const std::string& path, const std::string& content, const std::string& digest,
                 std::uint64_t seed) {
    if (path.empty() || path == "-") out << content;
    else write_tabular(path, content, digest, seed);
}

inline std::string svg_with_digest(std::string svg, const std::string& digest) {
    const auto eol = svg.find('\n');
    svg.insert(eol + 1, "<!-- config_digest: " + digest + " -->\n");
    return svg;
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto part : text::split(s, ',')) {
        auto t = text::trim(part);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

inline Splits load_splits(const std::vector<LabeledSample>& gold, const std::string& split_file, std::uint64_t seed) {
    if (split_file.empty()) return split_dataset(gold, seed);
    return apply_split_assignment(gold, parse_split_assignment(text::read_file(split_file)));
}

inline nlohmann::ordered_json counts_json(const std::array<std::size_t, 3>& c) {
    return {{"negative", c[0]}, {"neutral", c[1]}, {"positive", c[2]}};
}

inline std::vector<analysis::ScoredSample> to_scored(const std::vector<Sample>& samples,
                                                     const std::vector<RegardResult>& results) {
    std::vector<analysis::ScoredSample> out;
    out.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        out.push_back({samples[i].context, samples[i].group, results[i].label});
    return out;
}

inline nlohmann::ordered_json deltas_json(const std::vector<analysis::GapReport>& first,
                                          const std::vector<analysis::GapReport>& second) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& a : first) {
        for (const auto& b : second) {
            if (a.context != b.context) continue;
            for (const auto& d : analysis::compare_gaps(a, b)) {
                arr.push_back({{"context", std::string(to_string(a.context))},
                               {"scorer", a.scorer_name},
                               {"against", b.scorer_name},
                               {"group_a", std::string(to_string(d.group_a))},
                               {"group_b", std::string(to_string(d.group_b))},
                               {"delta_negative", d.delta_negative},
                               {"delta_neutral", d.delta_neutral},
                               {"delta_positive", d.delta_positive},
                               {"magnitude_delta_negative", d.magnitude_delta_negative},
                               {"magnitude_delta_neutral", d.magnitude_delta_neutral},
                               {"magnitude_delta_positive", d.magnitude_delta_positive}});
            }
        }
    }
    return arr;
}

inline void write_charts(const std::filesystem::path& dir, const std::vector<analysis::DistributionReport>& reports,
                         const std::string& digest, std::vector<std::string>& written) {
    for (const auto& r : reports) {
        const auto path = dir / ("chart-" + r.scorer_name + "-" + std::string(to_string(r.context)) + ".svg");
        text::write_file(path.string(),
                         svg_with_digest(analysis::render_stacked_chart(std::span<const analysis::DistributionReport>(&r, 1)), digest));
        written.push_back(path.string());
    }
}

} // namespace detail

/// Runs one subcommand. Returns 0 on success, 1 on usage errors, 2 on data
/// errors.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using detail::Globals;
    Globals g;
    if (const char* env = std::getenv(std::string(kRemoteEnv).c_str())) g.remote = env;

    CLI::App app{"Regard and sentiment bias audit for generated text", "regard_audit"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--seed", g.seed, "Seed for all randomness");
    app.add_flag("--pretty", g.pretty, "Human-readable tables instead of JSON");
    app.add_option("--jobs", g.jobs, "Worker threads for scoring")->check(CLI::Range(1u, 256u));
    app.add_option("--templates", g.templates_file, "Placeholder template file (default: built-in set)");
    app.add_option("--data-dir", g.data_dir, "Directory holding lexicon/");
    app.add_option("--lexicon", g.lexicon, "Valence TSV (default: <data-dir>/lexicon/valence.tsv)");
    app.add_option("--negators", g.negators, "Negator list (default: <data-dir>/lexicon/negators.txt)");
    app.add_option("--boosters", g.boosters, "Booster list (default: <data-dir>/lexicon/boosters.txt)");
    app.add_option("--remote", g.remote, "Remote regard scorer endpoint (default: $" + std::string(kRemoteEnv) + ")");

    // templates
    bool placeholders_only = false;
    auto* templates_cmd = app.add_subcommand("templates", "Print the complete prompts");
    templates_cmd->add_flag("--placeholders", placeholders_only, "Print the placeholder template file instead");

    // ingest
    std::string ingest_input, ingest_out;
    bool no_truncate = false, strict = false;
    auto* ingest_cmd = app.add_subcommand("ingest", "Parse generations into a masked corpus archive");
    ingest_cmd->add_option("--input", ingest_input, "template_id<TAB>text file")->required();
    ingest_cmd->add_option("--out", ingest_out, "Archive path (default: stdout)")->group("Output");
    ingest_cmd->add_flag("--no-truncate", no_truncate, "Keep text past the first sentence");
    ingest_cmd->add_flag("--strict", strict, "Fail on any rejected record");

    // truncate
    std::string truncate_input;
    auto* truncate_cmd = app.add_subcommand("truncate", "Cut each input line after its first sentence");
    truncate_cmd->add_option("--input", truncate_input, "Input file (default: stdin)");

    // select-batch
    std::string select_archive, select_out;
    auto* select_cmd = app.add_subcommand("select-batch", "Pick 3 positive and 3 negative samples per template");
    select_cmd->add_option("--archive", select_archive, "Corpus archive")->required();
    select_cmd->add_option("--out", select_out, "Batch TSV (default: stdout)")->group("Output");

    // serve
    std::string serve_batch, serve_annotators, serve_host = "127.0.0.1", serve_log, serve_ui;
    int serve_port = 8080;
    int claim_minutes = 30;
    auto* serve_cmd = app.add_subcommand("serve", "Run the annotation service");
    serve_cmd->add_option("--batch", serve_batch, "Batch TSV")->required();
    serve_cmd->add_option("--annotators", serve_annotators, "Comma-separated annotator ids")->required();
    serve_cmd->add_option("--host", serve_host);
    serve_cmd->add_option("--port", serve_port)->check(CLI::Range(1, 65535));
    serve_cmd->add_option("--log", serve_log, "Append-log file for submissions");
    serve_cmd->add_option("--claim-timeout", claim_minutes, "Claim expiry in minutes")->check(CLI::PositiveNumber);
    serve_cmd->add_option("--ui-dir", serve_ui, "Static files served at /");

    // gold
    std::string gold_raw, gold_batch, gold_out, gold_split_out;
    auto* gold_cmd = app.add_subcommand("gold", "Majority-vote gold labels from raw annotations");
    gold_cmd->add_option("--raw", gold_raw, "Raw annotation TSV")->required();
    gold_cmd->add_option("--batch", gold_batch, "Batch TSV")->required();
    gold_cmd->add_option("--out", gold_out, "Gold TSV (default: stdout)")->group("Output");
    gold_cmd->add_option("--split-out", gold_split_out, "Also write a seeded split assignment")->group("Output");

    // stats
    std::string stats_raw, stats_gold, stats_predictions, stats_restriction = "items";
    auto* stats_cmd = app.add_subcommand("stats", "Agreement and correlation statistics");
    stats_cmd->add_option("--raw", stats_raw, "Raw annotation TSV");
    stats_cmd->add_option("--gold", stats_gold, "Gold TSV");
    stats_cmd->add_option("--predictions", stats_predictions, "Recorded sentiment predictions (id<TAB>prediction)");
    stats_cmd->add_option("--restriction", stats_restriction, "Original-category kappa: items or ratings")
        ->check(CLI::IsMember({"items", "ratings"}));

    // train
    std::string train_gold, train_splits, train_out;
    TrainConfig train_cfg;
    auto* train_cmd = app.add_subcommand("train", "Train the linear regard classifier");
    train_cmd->add_option("--gold", train_gold, "Gold TSV")->required();
    train_cmd->add_option("--splits", train_splits, "Split assignment (default: seeded split)");
    train_cmd->add_option("--out", train_out, "Model JSON")->required()->group("Output");
    train_cmd->add_option("--epochs", train_cfg.epochs)->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", train_cfg.learning_rate)->check(CLI::PositiveNumber);
    train_cmd->add_option("--l2", train_cfg.l2)->check(CLI::NonNegativeNumber);

    // eval
    std::string eval_gold, eval_splits, eval_scorer = "trained", eval_model;
    int eval_runs = 5;
    TrainConfig eval_cfg;
    auto* eval_cmd = app.add_subcommand("eval", "Accuracy on the test split");
    eval_cmd->add_option("--gold", eval_gold, "Gold TSV")->required();
    eval_cmd->add_option("--splits", eval_splits, "Split assignment (default: seeded split)");
    eval_cmd->add_option("--scorer", eval_scorer, "sentiment_baseline, trained or remote");
    eval_cmd->add_option("--model", eval_model, "Trained model (default: retrain per run)");
    eval_cmd->add_option("--runs", eval_runs, "Training runs with seeds seed..seed+runs-1")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--epochs", eval_cfg.epochs)->check(CLI::PositiveNumber);
    eval_cmd->add_option("--lr", eval_cfg.learning_rate)->check(CLI::PositiveNumber);
    eval_cmd->add_option("--l2", eval_cfg.l2)->check(CLI::NonNegativeNumber);

    // audit
    std::string audit_archive, audit_generations, audit_scorer = "sentiment_baseline", audit_model, audit_compare,
                                                   audit_out;
    auto* audit_cmd = app.add_subcommand("audit", "Score a corpus and report distributions, gaps and charts");
    audit_cmd->add_option("--archive", audit_archive, "Corpus archive");
    audit_cmd->add_option("--generations", audit_generations, "Raw generations (template_id<TAB>text)");
    audit_cmd->add_option("--scorer", audit_scorer, "sentiment_baseline, trained or remote");
    audit_cmd->add_option("--model", audit_model, "Model for --scorer trained");
    audit_cmd->add_option("--compare", audit_compare, "Second scorer for gap comparison");
    bool audit_unmasked = false;
    audit_cmd->add_flag("--unmasked", audit_unmasked, "Score raw instead of masked text (ablation)");
    audit_cmd->add_option("--out-dir", audit_out, "Output directory")->required()->group("Output");

    // report
    std::string report_in, report_out;
    auto* report_cmd = app.add_subcommand("report", "Re-render an audit report");
    report_cmd->add_option("--report", report_in, "report.json from audit")->required();
    report_cmd->add_option("--out-dir", report_out, "Write CSV and charts here")->group("Output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    const auto digest = detail::config_digest(app, *sub);

    try {
        if (sub == templates_cmd) {
            const auto set = detail::load_template_set(g);
            if (placeholders_only) {
                out << serialize_templates(set.placeholders());
                return kExitOk;
            }
            for (const auto& t : set.complete()) {
                if (g.pretty) out << t.id << std::string(t.id.size() < 24 ? 24 - t.id.size() : 1, ' ') << t.prompt << "\n";
                else out << t.id << "\t" << t.prompt << "\n";
            }
            return kExitOk;
        }

        if (sub == ingest_cmd) {
            const auto set = detail::load_template_set(g);
            auto result = ingest(ingest_input, set, IngestOptions{!no_truncate});
            for (const auto& d : result.diagnostics) err << ingest_input << ":" << d.line << ": " << d.message << "\n";
            if (strict && !result.diagnostics.empty()) return kExitData;
            detail::emit(out, ingest_out, serialize_archive(result.samples), digest, g.seed);
            err << result.samples.size() << " samples, " << result.diagnostics.size() << " rejected\n";
            return kExitOk;
        }

        if (sub == truncate_cmd) {
            std::string content;
            if (truncate_input.empty()) content.assign(std::istreambuf_iterator<char>(std::cin), {});
            else content = text::read_file(truncate_input);
            for (auto line : text::lines(content)) out << truncate_to_sentence(line) << "\n";
            return kExitOk;
        }

        if (sub == select_cmd) {
            const auto set = detail::load_template_set(g);
            const auto samples = load_archive(select_archive, set);
            const auto analyzer = detail::load_analyzer(g, err);
            auto batch = select_batch(std::span<const Sample>(samples), *analyzer, g.seed);
            for (const auto& d : batch.diagnostics) err << "warning: " << d << "\n";
            detail::emit(out, select_out, serialize_batch(batch), digest, g.seed);
            err << batch.members.size() << " samples selected" << (batch.incomplete ? " (incomplete)" : "") << "\n";
            return kExitOk;
        }

        if (sub == serve_cmd) {
            service::StoreOptions options;
            options.claim_timeout = std::chrono::minutes(claim_minutes);
            if (!serve_log.empty()) options.log_path = serve_log;
            service::AnnotationStore store(load_batch(serve_batch), options);
            const auto annotators = detail::split_list(serve_annotators);
            if (annotators.empty()) throw UsageError("--annotators lists no ids");
            for (const auto& a : annotators) store.register_annotator(a);
            httplib::Server server;
            std::optional<std::filesystem::path> ui;
            if (!serve_ui.empty()) ui = serve_ui;
            service::bind_routes(server, store, ui);
            err << "serving " << store.batch().members.size() << " samples on http://" << serve_host << ":" << serve_port
                << "\n";
            if (!server.listen(serve_host, serve_port)) throw DataError("cannot listen on " + serve_host + ":" + std::to_string(serve_port));
            return kExitOk;
        }

        if (sub == gold_cmd) {
            const auto records = load_raw_annotations(gold_raw);
            const auto batch = load_batch(gold_batch);
            const auto build = build_gold_dataset(records, batch);
            detail::emit(out, gold_out, serialize_gold(build.gold), digest, g.seed);
            nlohmann::ordered_json summary;
            summary["gold"] = build.gold.size();
            summary["excluded"] = {{"no_majority", build.excluded.no_majority},
                                   {"non_original_majority", build.excluded.non_original_majority}};
            if (!gold_split_out.empty()) {
                const auto splits = split_dataset(build.gold, g.seed);
                detail::write_tabular(gold_split_out, serialize_split_assignment(splits), digest, g.seed);
                for (const auto& s : splits)
                    summary["splits"][std::string(to_string(s.name))] = detail::counts_json(label_counts(s.members));
            }
            summary["config_digest"] = digest;
            err << summary.dump() << "\n";
            return kExitOk;
        }

        if (sub == stats_cmd) {
            if (stats_raw.empty() && stats_gold.empty()) throw UsageError("stats needs --raw and/or --gold");
            if (!stats_predictions.empty() && stats_gold.empty()) throw UsageError("--predictions needs --gold");
            const auto set = detail::load_template_set(g);
            std::vector<stats::ReportEntry> agreement_rows, correlation_rows;
            if (!stats_raw.empty()) {
                const auto records = load_raw_annotations(stats_raw);
                agreement_rows = agreement::agreement_report(
                    records, stats_restriction == "ratings" ? agreement::Restriction::original_ratings
                                                            : agreement::Restriction::original_items);
            }
            if (!stats_gold.empty()) {
                const auto gold = load_gold_dataset(stats_gold);
                std::optional<std::map<std::string, PolarityLabel, std::less<>>> predictions;
                if (!stats_predictions.empty())
                    predictions = agreement::parse_predictions(text::read_file(stats_predictions));
                correlation_rows = agreement::correlation_report(gold, set, predictions ? &*predictions : nullptr);
            }
            if (g.pretty) {
                if (!agreement_rows.empty()) out << stats::render_table(agreement_rows) << "\n";
                if (!correlation_rows.empty()) out << stats::render_table(correlation_rows) << "\n";
                out << "config digest " << digest << "\n";
            } else {
                auto all = agreement_rows;
                all.insert(all.end(), correlation_rows.begin(), correlation_rows.end());
                nlohmann::ordered_json j = detail::provenance_json(digest, g.seed);
                j["entries"] = stats::to_json(all);
                out << j.dump(2) << "\n";
            }
            return kExitOk;
        }

        if (sub == train_cmd) {
            const auto gold = load_gold_dataset(train_gold);
            const auto splits = detail::load_splits(gold, train_splits, g.seed);
            train_cfg.seed = g.seed;
            auto run = train_traced(splits[0].members, splits[1].members, train_cfg);
            auto j = to_json(run.model);
            j["config_digest"] = digest;
            text::write_file(train_out, j.dump() + "\n");
            nlohmann::ordered_json summary = detail::provenance_json(digest, g.seed);
            summary["selected_epoch"] = run.model.selected_epoch;
            summary["dev_accuracy"] = run.model.selected_epoch > 0 && !splits[1].members.empty()
                                          ? nlohmann::ordered_json(run.dev_accuracy[static_cast<std::size_t>(run.model.selected_epoch - 1)])
                                          : nlohmann::ordered_json(nullptr);
            summary["vocabulary"] = run.model.vocabulary.size();
            out << summary.dump(g.pretty ? 2 : -1) << "\n";
            return kExitOk;
        }

        if (sub == eval_cmd) {
            const auto set = detail::load_template_set(g);
            const auto gold = load_gold_dataset(eval_gold);
            const auto splits = detail::load_splits(gold, eval_splits, g.seed);
            const auto& test = splits[2].members;
            if (test.empty()) throw DataError("test split is empty");
            const auto counts = label_counts(test);

            nlohmann::ordered_json j = detail::provenance_json(digest, g.seed);
            j["scorer"] = eval_scorer;
            j["split_sizes"] = {{"train", splits[0].members.size()}, {"dev", splits[1].members.size()}, {"test", test.size()}};
            j["test_label_counts"] = detail::counts_json(counts);
            j["constant_neutral_accuracy"] = static_cast<double>(counts[1]) / static_cast<double>(test.size());

            auto context_json = [](const std::map<BiasContext, double>& m) {
                nlohmann::ordered_json c = nlohmann::ordered_json::object();
                for (const auto& [ctx, a] : m) c[std::string(to_string(ctx))] = a;
                return c;
            };
            if (eval_scorer == "trained" && eval_model.empty()) {
                std::vector<std::uint64_t> seeds;
                for (int i = 0; i < eval_runs; ++i) seeds.push_back(g.seed + static_cast<std::uint64_t>(i));
                const auto result = evaluate_trained(splits, eval_cfg, seeds, set);
                j["seeds"] = result.seeds;
                j["per_run"] = result.accuracy.per_run;
                j["accuracy"] = result.accuracy.mean;
                j["per_context"] = context_json(result.mean_per_context);
            } else {
                auto scorer = detail::make_scorer(eval_scorer, eval_model, g, err);
                const auto e = evaluate(*scorer, test, set);
                j["accuracy"] = e.accuracy;
                j["per_context"] = context_json(e.per_context);
            }
            out << j.dump(g.pretty ? 2 : -1) << "\n";
            return kExitOk;
        }

        if (sub == audit_cmd) {
            if (audit_archive.empty() == audit_generations.empty())
                throw UsageError("audit needs exactly one of --archive or --generations");
            const auto set = detail::load_template_set(g);
            std::vector<Sample> samples;
            if (!audit_archive.empty()) {
                samples = load_archive(audit_archive, set);
            } else {
                auto result = ingest(audit_generations, set);
                for (const auto& d : result.diagnostics) err << audit_generations << ":" << d.line << ": " << d.message << "\n";
                samples = std::move(result.samples);
            }
            if (samples.empty()) throw DataError("corpus holds no samples");

            std::vector<std::string> texts;
            texts.reserve(samples.size());
            for (const auto& s : samples) texts.push_back(audit_unmasked ? s.raw_text : s.masked_text);

            auto scorer = detail::make_scorer(audit_scorer, audit_model, g, err);
            const auto scored = detail::to_scored(samples, score_parallel(*scorer, texts, g.jobs));

            analysis::Report report;
            report.provenance = {scorer->name(), sha256_hex(serialize_archive(samples)), g.seed, digest};
            report.distributions = analysis::distribution(scored, scorer->name());
            for (const auto& d : report.distributions) report.gaps.push_back(analysis::gaps(d));
            auto j = analysis::to_json(report);

            std::vector<analysis::DistributionReport> compare_reports;
            if (!audit_compare.empty()) {
                auto other = detail::make_scorer(audit_compare, audit_model, g, err);
                const auto other_scored = detail::to_scored(samples, score_parallel(*other, texts, g.jobs));
                compare_reports = analysis::distribution(other_scored, other->name());
                std::vector<analysis::GapReport> other_gaps;
                for (const auto& d : compare_reports) other_gaps.push_back(analysis::gaps(d));
                analysis::Report other_report;
                other_report.provenance = report.provenance;
                other_report.provenance.scorer = other->name();
                other_report.distributions = compare_reports;
                other_report.gaps = other_gaps;
                j["comparison"] = analysis::to_json(other_report);
                j["gap_deltas"] = detail::deltas_json(report.gaps, other_gaps);
            }

            const std::filesystem::path dir(audit_out);
            std::filesystem::create_directories(dir);
            std::vector<std::string> written;
            text::write_file((dir / "report.json").string(), j.dump(2) + "\n");
            written.push_back((dir / "report.json").string());
            auto all = report.distributions;
            all.insert(all.end(), compare_reports.begin(), compare_reports.end());
            detail::write_tabular((dir / "distributions.csv").string(), analysis::to_csv(all), digest, g.seed);
            written.push_back((dir / "distributions.csv").string());
            detail::write_charts(dir, all, digest, written);

            if (g.pretty) out << analysis::render_text(report);
            else
                for (const auto& w : written) out << w << "\n";
            return kExitOk;
        }

        if (sub == report_cmd) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(text::read_file(report_in));
            } catch (const nlohmann::json::parse_error& e) {
                throw DataError(std::string("report is not valid JSON: ") + e.what());
            }
            auto report = analysis::report_from_json(j);
            if (j.contains("comparison")) {
                auto other = analysis::report_from_json(j["comparison"]);
                report.distributions.insert(report.distributions.end(), other.distributions.begin(), other.distributions.end());
                report.gaps.insert(report.gaps.end(), other.gaps.begin(), other.gaps.end());
            }
            const auto& d = report.provenance.config_digest;
            if (!report_out.empty()) {
                const std::filesystem::path dir(report_out);
                std::filesystem::create_directories(dir);
                std::vector<std::string> written;
                detail::write_tabular((dir / "distributions.csv").string(), analysis::to_csv(report.distributions), d,
                                      report.provenance.seed);
                detail::write_charts(dir, report.distributions, d, written);
            }
            if (g.pretty) out << analysis::render_text(report);
            else out << analysis::to_csv(report.distributions);
            return kExitOk;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const RemoteError& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

} // namespace regard_audit::cli
