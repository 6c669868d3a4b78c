#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "regard_audit/corpus.hpp"
#include "regard_audit/labels.hpp"
#include "regard_audit/rng.hpp"
#include "regard_audit/sentiment.hpp"
#include "regard_audit/stats.hpp"
#include "regard_audit/templates.hpp"

namespace regard_audit {

using ScoreTriple = std::array<double, 3>; // (negative, neutral, positive)

/// argmax over (negative, neutral, positive); ties go to neutral, then negative.
inline PolarityLabel argmax_label(const ScoreTriple& scores) noexcept {
    const double best = std::max({scores[0], scores[1], scores[2]});
    if (scores[1] == best) return PolarityLabel::neutral;
    if (scores[0] == best) return PolarityLabel::negative;
    return PolarityLabel::positive;
}

struct RegardResult {
    PolarityLabel label = PolarityLabel::neutral;
    ScoreTriple scores{0.0, 1.0, 0.0};

    static RegardResult from_scores(const ScoreTriple& scores) { return {argmax_label(scores), scores}; }

    friend bool operator==(const RegardResult&, const RegardResult&) = default;
};

/// The common boundary behind which the baseline, trained and remote scorers
/// sit. Implementations take masked texts and return one result per text, in
/// input order.
class RegardScorer {
public:
    virtual ~RegardScorer() = default;
    virtual std::string name() const = 0;
    virtual std::vector<RegardResult> score(std::span<const std::string> texts) const = 0;
};

// ---------------------------------------------------------------------------
// Re-purposed sentiment baseline
// ---------------------------------------------------------------------------

inline RegardResult smoothed_one_hot(PolarityLabel label) {
    ScoreTriple scores{0.1, 0.1, 0.1};
    scores[index_of(label)] = 0.8;
    return {label, scores};
}

inline RegardResult score_with_sentiment_baseline(std::string_view text, const sentiment::Analyzer& analyzer) {
    return smoothed_one_hot(analyzer.label(text));
}

class SentimentBaselineScorer final : public RegardScorer {
public:
    explicit SentimentBaselineScorer(std::shared_ptr<const sentiment::Analyzer> analyzer)
        : analyzer_(std::move(analyzer)) {}

    std::string name() const override { return "sentiment_baseline"; }

    std::vector<RegardResult> score(std::span<const std::string> texts) const override {
        std::vector<RegardResult> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(score_with_sentiment_baseline(t, *analyzer_));
        return out;
    }

private:
    std::shared_ptr<const sentiment::Analyzer> analyzer_;
};

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

/// Lowercased word tokens: runs of letters, digits, apostrophes and hyphens.
inline std::vector<std::string> feature_tokens(std::string_view input) {
    std::vector<std::string> out;
    std::string current;
    for (char c : input) {
        if (text::is_alnum(c) || c == '\'' || c == '-') {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

/// Unigrams followed by space-joined bigrams.
inline std::vector<std::string> ngrams(std::string_view input) {
    auto tokens = feature_tokens(input);
    std::vector<std::string> out = tokens;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) out.push_back(tokens[i] + " " + tokens[i + 1]);
    return out;
}

using Vocabulary = std::map<std::string, std::size_t, std::less<>>;

/// Dense indices assigned in lexicographic n-gram order.
inline Vocabulary build_vocabulary(std::span<const std::string> texts) {
    Vocabulary vocab;
    for (const auto& t : texts) {
        for (auto& g : ngrams(t)) vocab.emplace(std::move(g), 0);
    }
    std::size_t next = 0;
    for (auto& [gram, index] : vocab) index = next++;
    return vocab;
}

/// Sparse (index, count) pairs sorted by index. The last entry is always the
/// bias feature at index |vocabulary| with value 1.
struct SparseFeatures {
    std::vector<std::pair<std::size_t, double>> entries;
};

inline SparseFeatures featurize(std::string_view masked_text, const Vocabulary& vocabulary) {
    std::map<std::size_t, double> counts;
    for (const auto& g : ngrams(masked_text)) {
        auto it = vocabulary.find(g);
        if (it != vocabulary.end()) counts[it->second] += 1.0;
    }
    SparseFeatures f;
    f.entries.assign(counts.begin(), counts.end());
    f.entries.emplace_back(vocabulary.size(), 1.0);
    return f;
}

// ---------------------------------------------------------------------------
// Linear classifier
// ---------------------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 0.5;
    double l2 = 1e-3;
    int epochs = 200;
    std::uint64_t seed = 1;
    double init_scale = 0.01;
};

/// Row-major 3 x (|vocab| + 1) weights; the last column is the bias.
struct Weights {
    std::size_t columns = 1;
    std::vector<double> values = std::vector<double>(3, 0.0);

    Weights() = default;
    explicit Weights(std::size_t cols) : columns(cols), values(3 * cols, 0.0) {}

    double& at(std::size_t row, std::size_t col) { return values[row * columns + col]; }
    double at(std::size_t row, std::size_t col) const { return values[row * columns + col]; }
};

struct RegardModel {
    static constexpr int kFormatVersion = 1;

    Vocabulary vocabulary;
    Weights weights;
    TrainConfig config;
    int selected_epoch = 0;
};

inline ScoreTriple class_scores(const Weights& w, const SparseFeatures& f) {
    ScoreTriple z{0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < 3; ++k) {
        for (const auto& [j, x] : f.entries) z[k] += w.at(k, j) * x;
    }
    return z;
}

inline ScoreTriple softmax(const ScoreTriple& z) {
    const double m = std::max({z[0], z[1], z[2]});
    ScoreTriple p{std::exp(z[0] - m), std::exp(z[1] - m), std::exp(z[2] - m)};
    const double total = p[0] + p[1] + p[2];
    for (auto& v : p) v /= total;
    return p;
}

inline RegardResult predict(const RegardModel& model, std::string_view masked_text) {
    return RegardResult::from_scores(softmax(class_scores(model.weights, featurize(masked_text, model.vocabulary))));
}

struct Example {
    SparseFeatures features;
    std::size_t target; // index_of(label)
};

inline std::vector<Example> make_examples(std::span<const LabeledSample> samples, const Vocabulary& vocab) {
    std::vector<Example> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({featurize(s.masked_text, vocab), index_of(s.regard)});
    return out;
}

/// Mean cross-entropy plus (l2 / 2) * ||W||^2 over the non-bias columns.
/// Fills `gradient` (same shape as `w`) when given.
inline double loss_and_gradient(const Weights& w, std::span<const Example> data, double l2,
                                Weights* gradient = nullptr) {
    const std::size_t bias = w.columns - 1;
    if (gradient) *gradient = Weights(w.columns);
    double loss = 0.0;
    const double scale = data.empty() ? 0.0 : 1.0 / static_cast<double>(data.size());
    for (const auto& ex : data) {
        const auto z = class_scores(w, ex.features);
        const double m = std::max({z[0], z[1], z[2]});
        const double log_total = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m) + std::exp(z[2] - m));
        loss += (log_total - z[ex.target]) * scale;
        if (!gradient) continue;
        for (std::size_t k = 0; k < 3; ++k) {
            const double residual = std::exp(z[k] - log_total) - (k == ex.target ? 1.0 : 0.0);
            for (const auto& [j, x] : ex.features.entries) gradient->at(k, j) += residual * x * scale;
        }
    }
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t j = 0; j < bias; ++j) {
            const double v = w.at(k, j);
            loss += 0.5 * l2 * v * v;
            if (gradient) gradient->at(k, j) += l2 * v;
        }
    }
    return loss;
}

inline double accuracy(const RegardModel& model, std::span<const Example> data) {
    if (data.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& ex : data) {
        if (index_of(argmax_label(softmax(class_scores(model.weights, ex.features)))) == ex.target) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

struct TrainingRun {
    RegardModel model;
    std::vector<double> loss_history; // training loss before each epoch's step, then after the last
    std::vector<double> dev_accuracy; // per epoch, after the step
};

/// Full-batch gradient descent on the multinomial logistic loss. The
/// vocabulary comes from the training split only; the returned model holds
/// the weights of the epoch with the best dev accuracy (earliest on ties, the
/// final epoch when dev is empty).
inline TrainingRun train_traced(std::span<const LabeledSample> train_split, std::span<const LabeledSample> dev_split,
                                const TrainConfig& config) {
    if (train_split.empty()) throw std::invalid_argument("training split is empty");
    if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");

    std::vector<std::string> texts;
    for (const auto& s : train_split) texts.push_back(s.masked_text);

    TrainingRun run;
    auto& model = run.model;
    model.config = config;
    model.vocabulary = build_vocabulary(texts);
    model.weights = Weights(model.vocabulary.size() + 1);
    Rng rng(config.seed);
    for (auto& v : model.weights.values) v = config.init_scale * (2.0 * rng.uniform_real() - 1.0);

    const auto train_ex = make_examples(train_split, model.vocabulary);
    const auto dev_ex = make_examples(dev_split, model.vocabulary);

    Weights best = model.weights;
    double best_dev = -1.0;
    int best_epoch = 0;
    Weights grad;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        run.loss_history.push_back(loss_and_gradient(model.weights, train_ex, config.l2, &grad));
        for (std::size_t i = 0; i < model.weights.values.size(); ++i)
            model.weights.values[i] -= config.learning_rate * grad.values[i];
        const double dev = dev_ex.empty() ? 0.0 : accuracy(model, dev_ex);
        run.dev_accuracy.push_back(dev);
        if (dev_ex.empty() || dev > best_dev) {
            best_dev = dev;
            best = model.weights;
            best_epoch = epoch;
        }
    }
    run.loss_history.push_back(loss_and_gradient(model.weights, train_ex, config.l2));
    model.weights = std::move(best);
    model.selected_epoch = best_epoch;
    return run;
}

inline RegardModel train(std::span<const LabeledSample> train_split, std::span<const LabeledSample> dev_split,
                         const TrainConfig& config) {
    return train_traced(train_split, dev_split, config).model;
}

class LinearRegardScorer final : public RegardScorer {
public:
    explicit LinearRegardScorer(RegardModel model) : model_(std::move(model)) {}

    std::string name() const override { return "trained"; }

    std::vector<RegardResult> score(std::span<const std::string> texts) const override {
        std::vector<RegardResult> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(predict(model_, t));
        return out;
    }

    const RegardModel& model() const noexcept { return model_; }

private:
    RegardModel model_;
};

// ---------------------------------------------------------------------------
// Model persistence
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const RegardModel& model) {
    nlohmann::ordered_json j;
    j["format_version"] = RegardModel::kFormatVersion;
    std::vector<std::string> vocab(model.vocabulary.size());
    for (const auto& [gram, index] : model.vocabulary) vocab[index] = gram;
    j["vocabulary"] = vocab;
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < 3; ++k) {
        std::vector<double> row(model.weights.values.begin() + static_cast<std::ptrdiff_t>(k * model.weights.columns),
                                model.weights.values.begin() +
                                    static_cast<std::ptrdiff_t>((k + 1) * model.weights.columns));
        rows.push_back(row);
    }
    j["weights"] = rows;
    j["config"] = {{"learning_rate", model.config.learning_rate}, {"l2", model.config.l2},
                   {"epochs", model.config.epochs},               {"seed", model.config.seed},
                   {"init_scale", model.config.init_scale},       {"selected_epoch", model.selected_epoch}};
    return j;
}

inline RegardModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != RegardModel::kFormatVersion)
            throw DataError("unsupported model format_version");
        RegardModel m;
        const auto vocab = j.at("vocabulary").get<std::vector<std::string>>();
        for (std::size_t i = 0; i < vocab.size(); ++i) {
            if (!m.vocabulary.emplace(vocab[i], i).second) throw DataError("duplicate vocabulary entry '" + vocab[i] + "'");
        }
        m.weights = Weights(vocab.size() + 1);
        const auto& rows = j.at("weights");
        if (rows.size() != 3) throw DataError("weights must have 3 rows");
        for (std::size_t k = 0; k < 3; ++k) {
            auto row = rows[k].get<std::vector<double>>();
            if (row.size() != m.weights.columns) throw DataError("weight row width does not match vocabulary");
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (!std::isfinite(row[c])) throw DataError("non-finite weight");
                m.weights.at(k, c) = row[c];
            }
        }
        const auto& c = j.at("config");
        m.config.learning_rate = c.at("learning_rate").get<double>();
        m.config.l2 = c.at("l2").get<double>();
        m.config.epochs = c.at("epochs").get<int>();
        m.config.seed = c.at("seed").get<std::uint64_t>();
        m.config.init_scale = c.at("init_scale").get<double>();
        m.selected_epoch = c.value("selected_epoch", 0);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad model document: ") + e.what());
    }
}

inline void save_model(const RegardModel& model, const std::string& path) {
    text::write_file(path, to_json(model).dump(2) + "\n");
}

inline RegardModel load_model(const std::string& path) {
    try {
        return model_from_json(nlohmann::json::parse(text::read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("bad model document: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct Evaluation {
    double accuracy = 0.0;
    std::size_t n = 0;
    std::map<BiasContext, double> per_context; // contexts present in the data only
};

/// Exact-label accuracy of `scorer` on `samples`, overall and per context.
inline Evaluation evaluate(const RegardScorer& scorer, std::span<const LabeledSample> samples,
                           const TemplateSet& templates = TemplateSet{}) {
    if (samples.empty()) throw std::invalid_argument("evaluation needs at least one sample");
    std::vector<std::string> texts;
    for (const auto& s : samples) texts.push_back(s.masked_text);
    const auto results = scorer.score(texts);
    if (results.size() != samples.size()) throw std::runtime_error("scorer returned a wrong number of results");

    std::size_t hits = 0;
    std::map<BiasContext, std::pair<std::size_t, std::size_t>> ctx; // hits, total
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const bool hit = results[i].label == samples[i].regard;
        hits += hit;
        if (auto c = context_of(samples[i].id, templates)) {
            ctx[*c].first += hit;
            ++ctx[*c].second;
        }
    }
    Evaluation e;
    e.n = samples.size();
    e.accuracy = static_cast<double>(hits) / static_cast<double>(samples.size());
    for (const auto& [c, ht] : ctx) e.per_context[c] = static_cast<double>(ht.first) / static_cast<double>(ht.second);
    return e;
}

struct RunSetEvaluation {
    std::vector<std::uint64_t> seeds;
    std::vector<Evaluation> runs;
    stats::MeanAccuracy accuracy;
    std::map<BiasContext, double> mean_per_context;
};

/// Retrains once per seed on `train`/`dev` and averages test accuracy.
inline RunSetEvaluation evaluate_trained(const Splits& splits, TrainConfig config, std::span<const std::uint64_t> seeds,
                                         const TemplateSet& templates = TemplateSet{}) {
    if (seeds.empty()) throw std::invalid_argument("at least one run is required");
    RunSetEvaluation out;
    std::map<BiasContext, double> ctx_sum;
    for (auto seed : seeds) {
        config.seed = seed;
        LinearRegardScorer scorer(train(splits[0].members, splits[1].members, config));
        out.seeds.push_back(seed);
        out.runs.push_back(evaluate(scorer, splits[2].members, templates));
    }
    std::vector<double> per_run;
    for (const auto& r : out.runs) {
        per_run.push_back(r.accuracy);
        for (const auto& [c, a] : r.per_context) ctx_sum[c] += a;
    }
    out.accuracy = stats::mean_accuracy(per_run);
    const auto n = static_cast<double>(out.runs.size());
    for (const auto& [c, s] : ctx_sum) out.mean_per_context[c] = s / n;
    return out;
}

} // namespace regard_audit
