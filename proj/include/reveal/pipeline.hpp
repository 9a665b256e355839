#pragma once

#include <chrono>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "reveal/checkpoint.hpp"
#include "reveal/config.hpp"
#include "reveal/encode.hpp"
#include "reveal/infer.hpp"
#include "reveal/metrics.hpp"
#include "reveal/retrieve.hpp"
#include "reveal/tabledata.hpp"
#include "reveal/verify.hpp"

namespace reveal {

// FNV over the raw bytes of every parameter array; used to assert that the
// prediction module stays frozen once verifier training starts.
inline std::uint64_t param_hash(const ParamView& view) {
    std::uint64_t h = kFnvOffsetBasis;
    for (const auto& a : view.arrays) {
        for (double x : a) {
            std::uint64_t bits;
            std::memcpy(&bits, &x, sizeof(bits));
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xffull;
                h *= kFnvPrime;
            }
        }
    }
    return h;
}

inline std::uint64_t param_hash(PredictionParams p) {
    ParamView v = prediction_view(p);
    return param_hash(v);
}

struct TrainSummary {
    Checkpoint checkpoint;
    std::size_t train_targets = 0;
    std::size_t valid_targets = 0;
    std::size_t pair_count = 0;
    std::size_t verification_samples = 0;
    std::vector<double> prediction_loss;   // per epoch
    std::vector<double> verifier_loss;     // per epoch, empty in reveal mode
    std::uint64_t f_hash_before_verifier = 0;
    std::uint64_t f_hash_after_verifier = 0;
    double seconds = 0.0;
};

// Lines 1-5 of the REVEAL+ training procedure over pre-split data:
// retrieve contexts, build the pair set, train f, build the verification
// set, train the verifier. REVEAL mode skips the last two.
inline TrainSummary run_training(const Dataset& train, const Dataset& valid, const RunConfig& cfg,
                                 const CorpusEmbeddings& emb) {
    cfg.validate();
    auto t0 = std::chrono::steady_clock::now();

    TrainSummary s;
    s.train_targets = train.targets.size();
    s.valid_targets = valid.targets.size();

    std::vector<PairSample> train_pairs =
        build_pair_dataset(train, emb, cfg.k, cfg.lambda, cfg.strategy, cfg.seed);
    std::vector<PairSample> valid_pairs =
        build_pair_dataset(valid, emb, cfg.k, cfg.lambda, cfg.strategy, cfg.seed);
    s.pair_count = train_pairs.size();

    PredictionTrainConfig pc;
    pc.epochs = cfg.epochs;
    pc.lr = cfg.lr;
    pc.batch_size = cfg.batch_size;
    pc.hidden_dim = cfg.hidden_dim;
    pc.repr_dim = cfg.repr_dim;
    PredictionTrainResult ptr = train_prediction(train_pairs, valid_pairs, emb, cfg.task,
                                                 train.label_vocab.size(), pc, cfg.seed);
    s.prediction_loss = ptr.epoch_loss;

    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.labels = train.label_vocab;
    ckpt.prediction = std::move(ptr.params);

    s.f_hash_before_verifier = param_hash(ckpt.prediction);
    if (cfg.mode == Mode::RevealPlus) {
        std::vector<VerificationSample> vset = build_verification_dataset(
            train_pairs, valid_pairs, ckpt.prediction, emb, cfg.subset_cap, cfg.seed);
        s.verification_samples = vset.size();
        VerifierTrainConfig vc;
        vc.epochs = cfg.verifier_epochs ? cfg.verifier_epochs : cfg.epochs;
        vc.lr = cfg.verifier_lr > 0.0 ? cfg.verifier_lr : cfg.lr;
        vc.batch_size = cfg.verifier_batch_size ? cfg.verifier_batch_size : cfg.batch_size;
        vc.v_dim = cfg.v_dim;
        VerifierTrainResult vtr = train_verifier(vset, ckpt.prediction, emb, vc, cfg.seed);
        s.verifier_loss = vtr.epoch_loss;
        ckpt.verifier = std::move(vtr.params);
    }
    s.f_hash_after_verifier = param_hash(ckpt.prediction);

    s.checkpoint = std::move(ckpt);
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
}

// Internal train/valid/test split used by cmd_train; the test share is held
// out and never touched here.
inline constexpr double kTrainRatio = 0.8;
inline constexpr double kValidRatio = 0.1;
inline constexpr double kTestRatio = 0.1;

inline TrainSummary cmd_train(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.data_path.empty()) throw ConfigError("train: --data is required");
    if (cfg.out_path.empty()) throw ConfigError("train: --out is required");
    std::optional<std::string> labels;
    if (!cfg.labels_path.empty()) labels = cfg.labels_path;
    Dataset full = load_dataset(cfg.data_path, cfg.task, labels);
    if (full.targets.empty()) throw DataError("train: dataset has no labeled targets");
    SplitResult split = split_dataset(full, kTrainRatio, kValidRatio, kTestRatio, cfg.seed);
    if (split.train.targets.empty()) throw DataError("train: empty training split");

    HashingEmbedder embedder(cfg.embedder);
    CorpusEmbeddings emb = embed_corpus(*full.tables, embedder);
    TrainSummary s = run_training(split.train, split.valid, cfg, emb);

    std::cout << "pair set size: " << s.pair_count << " (train targets: " << s.train_targets
              << ")\n";
    if (cfg.mode == Mode::RevealPlus)
        std::cout << "verification set size: " << s.verification_samples << "\n";
    if (!s.prediction_loss.empty())
        std::cout << "prediction loss: " << s.prediction_loss.front() << " -> "
                  << s.prediction_loss.back() << "\n";
    save_checkpoint(s.checkpoint, cfg.out_path);
    std::cout << "checkpoint written to " << cfg.out_path << "\n";
    return s;
}

// Annotates one target according to the configured mode and verification
// strategy. `position` feeds the per-target seed of the randomized
// strategies so reruns stay deterministic.
inline Annotation annotate_target(const ColumnEmbeddings& emb, const Target& target,
                                  const Checkpoint& ckpt, const RunConfig& cfg,
                                  std::size_t position) {
    SimilarityMatrix sims = build_similarity(emb, target);
    ColumnContext ctx = baseline_context_from_sims(cfg.strategy, sims, target, cfg.k, cfg.lambda,
                                                   cfg.seed + position);
    Annotation a;
    if (cfg.mode == Mode::Reveal) {
        a.context_used = std::move(ctx);
        a.label_id = predict_label(emb, target, a.context_used, ckpt.prediction);
        return a;
    }

    if (uses_verifier(cfg.verify_strategy)) {
        if (!ckpt.verifier)
            throw ConfigError("reveal-plus annotation requires a checkpoint with a verifier");
        const VerifierParams& v = *ckpt.verifier;
        if (ctx.empty()) {
            a.context_used = std::move(ctx);
            a.score = quality_score(emb, target, a.context_used, ckpt.prediction, v);
        } else {
            SubsetScorer scorer = make_quality_scorer(emb, target, ckpt.prediction, v);
            SearchResult r;
            switch (cfg.verify_strategy) {
                case VerifyStrategy::TopDown:
                    r = topdown_select(ctx, scorer);
                    break;
                case VerifyStrategy::Exhaustive:
                    r = exhaustive_select(ctx, scorer);
                    break;
                case VerifyStrategy::BottomUp: {
                    std::size_t start = ctx.col_indices[0];
                    for (std::size_t c : ctx.col_indices)
                        if (sims.target_sim(c) > sims.target_sim(start)) start = c;
                    r = bottomup_select(ctx, start, scorer);
                    break;
                }
                default:
                    break;
            }
            a.context_used = std::move(r.selected);
            a.score = r.score;
        }
        a.label_id = predict_label(emb, target, a.context_used, ckpt.prediction);
        return a;
    }

    AggregateStrategy agg;
    switch (cfg.verify_strategy) {
        case VerifyStrategy::MaxConfidence: agg = AggregateStrategy::MaxConfidence; break;
        case VerifyStrategy::MajorityVoting: agg = AggregateStrategy::MajorityVoting; break;
        case VerifyStrategy::WeightedVoting: agg = AggregateStrategy::WeightedVoting; break;
        default: agg = AggregateStrategy::RandomSubset; break;
    }
    a.label_id = aggregate_predict(agg, emb, target, ctx, ckpt.prediction, cfg.seed + position);
    a.context_used = std::move(ctx);
    return a;
}

namespace detail {

inline nlohmann::ordered_json target_to_json(const Target& t) {
    nlohmann::ordered_json j;
    j["kind"] = to_string(t.kind);
    if (t.kind == TaskKind::CTA)
        j["col"] = t.indices[0];
    else
        j["cols"] = t.indices;
    return j;
}

}  // namespace detail

// Writes one JSONL prediction line per target, preceded by a comment line
// describing the run. "score" is null whenever no verifier score applies.
inline std::vector<Annotation> cmd_annotate(const RunConfig& cfg, const Checkpoint& ckpt,
                                            const Dataset& data, std::ostream& out) {
    if (ckpt.config.task != data.task)
        throw ConfigError("checkpoint task '" + to_string(ckpt.config.task) +
                          "' does not match dataset task '" + to_string(data.task) + "'");
    HashingEmbedder embedder(cfg.embedder);
    out << "# reveal annotations task=" << to_string(cfg.task) << " mode=" << to_string(cfg.mode)
        << " strategy=" << to_string(cfg.strategy)
        << " verify=" << to_string(cfg.verify_strategy) << "\n";

    std::vector<Annotation> results;
    results.reserve(data.targets.size());
    std::unordered_map<std::size_t, ColumnEmbeddings> cache;
    for (std::size_t i = 0; i < data.targets.size(); ++i) {
        const TargetRef& ref = data.targets[i];
        auto it = cache.find(ref.table_index);
        if (it == cache.end())
            it = cache.emplace(ref.table_index, embed_table(data.table_of(ref), embedder)).first;
        Annotation a = annotate_target(it->second, ref.labeled.target, ckpt, cfg, i);

        nlohmann::ordered_json j;
        j["table_id"] = data.table_of(ref).table_id;
        j["target"] = detail::target_to_json(ref.labeled.target);
        j["pred_label"] = ckpt.labels.at(a.label_id);
        j["context_used"] = a.context_used.col_indices;
        if (a.score)
            j["score"] = *a.score;
        else
            j["score"] = nullptr;
        out << j.dump() << "\n";
        results.push_back(std::move(a));
    }
    return results;
}

inline std::vector<Annotation> cmd_annotate(const RunConfig& cfg, const std::string& ckpt_path,
                                            const std::string& data_path,
                                            const std::string& out_path) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Dataset data = load_dataset(data_path, ckpt.config.task);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot write predictions: " + out_path);
    return cmd_annotate(cfg, ckpt, data, out);
}

struct BucketReport {
    std::string name;
    std::size_t count = 0;
    MetricsReport metrics;
};

struct EvalReport {
    MetricsReport overall;
    std::vector<BucketReport> buckets;
    double reduced_context_fraction = 0.0;
    std::size_t num_targets = 0;
    double seconds = 0.0;
};

// Column-count buckets used in the width analysis.
inline std::size_t width_bucket(std::size_t n_columns) {
    if (n_columns <= 4) return 0;
    if (n_columns <= 8) return 1;
    if (n_columns <= 12) return 2;
    if (n_columns <= 16) return 3;
    return 4;
}

inline const char* width_bucket_name(std::size_t b) {
    static const char* names[] = {"1-4", "5-8", "9-12", "13-16", "17+"};
    return names[b];
}

// Runs annotation over a labeled dataset and scores it. Ground-truth labels
// are mapped into the checkpoint vocabulary by name.
inline EvalReport evaluate_dataset(const RunConfig& cfg, const Checkpoint& ckpt,
                                   const Dataset& data) {
    auto t0 = std::chrono::steady_clock::now();
    if (ckpt.config.task != data.task) throw ConfigError("checkpoint/dataset task mismatch");
    std::unordered_map<std::string, std::size_t> vocab_id;
    for (std::size_t i = 0; i < ckpt.labels.size(); ++i) vocab_id[ckpt.labels[i]] = i;

    HashingEmbedder embedder(cfg.embedder);
    std::vector<std::size_t> preds, gts;
    std::vector<std::size_t> bucket_of;
    std::size_t reduced = 0;
    std::unordered_map<std::size_t, ColumnEmbeddings> cache;
    for (std::size_t i = 0; i < data.targets.size(); ++i) {
        const TargetRef& ref = data.targets[i];
        const Table& table = data.table_of(ref);
        auto it = cache.find(ref.table_index);
        if (it == cache.end())
            it = cache.emplace(ref.table_index, embed_table(table, embedder)).first;
        Annotation a = annotate_target(it->second, ref.labeled.target, ckpt, cfg, i);

        auto vit = vocab_id.find(data.label_vocab.at(ref.labeled.label_id));
        if (vit == vocab_id.end())
            throw DataError("dataset label '" + data.label_vocab.at(ref.labeled.label_id) +
                            "' is not in the checkpoint vocabulary");
        preds.push_back(a.label_id);
        gts.push_back(vit->second);
        bucket_of.push_back(width_bucket(table.columns.size()));
        std::size_t full = table.columns.size() - ref.labeled.target.indices.size();
        if (a.context_used.size() < full) ++reduced;
    }

    EvalReport r;
    r.num_targets = preds.size();
    r.overall = evaluate_metrics(preds, gts, ckpt.labels.size());
    for (std::size_t b = 0; b < 5; ++b) {
        std::vector<std::size_t> bp, bg;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (bucket_of[i] != b) continue;
            bp.push_back(preds[i]);
            bg.push_back(gts[i]);
        }
        BucketReport br;
        br.name = width_bucket_name(b);
        br.count = bp.size();
        if (!bp.empty()) br.metrics = evaluate_metrics(bp, bg, ckpt.labels.size());
        r.buckets.push_back(std::move(br));
    }
    r.reduced_context_fraction =
        preds.empty() ? 0.0 : static_cast<double>(reduced) / static_cast<double>(preds.size());
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline nlohmann::ordered_json eval_report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["num_targets"] = r.num_targets;
    j["micro_f1"] = r.overall.micro_f1;
    j["macro_f1"] = r.overall.macro_f1;
    j["weighted_f1"] = r.overall.weighted_f1;
    j["per_class_f1"] = r.overall.per_class_f1;
    auto buckets = nlohmann::ordered_json::object();
    for (const BucketReport& b : r.buckets) {
        buckets[b.name] = {{"count", b.count},
                           {"micro_f1", b.metrics.micro_f1},
                           {"macro_f1", b.metrics.macro_f1}};
    }
    j["width_buckets"] = std::move(buckets);
    j["reduced_context_fraction"] = r.reduced_context_fraction;
    j["seconds"] = r.seconds;
    return j;
}

inline void print_eval_report(const EvalReport& r, std::ostream& out) {
    out << std::fixed << std::setprecision(4);
    out << "targets:      " << r.num_targets << "\n";
    out << "micro-F1:     " << r.overall.micro_f1 << "\n";
    out << "macro-F1:     " << r.overall.macro_f1 << "\n";
    out << "weighted-F1:  " << r.overall.weighted_f1 << "\n";
    out << "reduced ctx:  " << r.reduced_context_fraction << "\n";
    out << "columns  count  micro-F1  macro-F1\n";
    for (const BucketReport& b : r.buckets) {
        out << std::left << std::setw(9) << b.name << std::right << std::setw(5) << b.count
            << std::setw(10) << b.metrics.micro_f1 << std::setw(10) << b.metrics.macro_f1 << "\n";
    }
    out.unsetf(std::ios::fixed);
}

inline EvalReport cmd_evaluate(const RunConfig& cfg, const std::string& ckpt_path,
                               const std::string& data_path, const std::string& report_path) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Dataset data = load_dataset(data_path, ckpt.config.task);
    EvalReport r = evaluate_dataset(cfg, ckpt, data);
    if (!report_path.empty()) {
        std::ofstream out(report_path, std::ios::binary);
        if (!out) throw DataError("cannot write report: " + report_path);
        out << eval_report_to_json(r).dump(2) << "\n";
    }
    print_eval_report(r, std::cout);
    return r;
}

// Emits the chosen context per target as JSONL, for inspection.
inline void cmd_retrieve(const RunConfig& cfg, const Dataset& data, std::ostream& out) {
    HashingEmbedder embedder(cfg.embedder);
    out << "# reveal contexts task=" << to_string(cfg.task)
        << " strategy=" << to_string(cfg.strategy) << " k=" << cfg.k << " lambda=" << cfg.lambda
        << "\n";
    std::unordered_map<std::size_t, ColumnEmbeddings> cache;
    for (std::size_t i = 0; i < data.targets.size(); ++i) {
        const TargetRef& ref = data.targets[i];
        auto it = cache.find(ref.table_index);
        if (it == cache.end())
            it = cache.emplace(ref.table_index, embed_table(data.table_of(ref), embedder)).first;
        SimilarityMatrix sims = build_similarity(it->second, ref.labeled.target);
        ColumnContext ctx = baseline_context_from_sims(cfg.strategy, sims, ref.labeled.target,
                                                       cfg.k, cfg.lambda, cfg.seed + i);
        nlohmann::ordered_json j;
        j["table_id"] = data.table_of(ref).table_id;
        j["target"] = detail::target_to_json(ref.labeled.target);
        j["context"] = ctx.col_indices;
        out << j.dump() << "\n";
    }
}

struct GradCheckReport {
    double prediction_max_rel = 0.0;
    double verifier_max_rel = 0.0;
    double tolerance = 1e-4;
    bool passed() const {
        return prediction_max_rel <= tolerance && verifier_max_rel <= tolerance;
    }
};

// Checks the analytic gradients of the prediction loss and the verifier
// loss against central finite differences on a small random-init problem.
// Probes step by 1e-5: a 1e-4 step can cross a ReLU kink and report a large
// spurious error. `corrupt` perturbs one analytic gradient entry; it exists
// so the negative path is testable.
inline GradCheckReport cmd_gradcheck(std::uint64_t seed, std::size_t probes = 25,
                                     double corrupt = 0.0) {
    const double eps = 1e-5;
    GradCheckReport report;

    SynthConfig scfg;
    scfg.num_tables = 6;
    scfg.cols_min = 4;
    scfg.cols_max = 6;
    scfg.num_classes = 3;
    scfg.rows = 4;
    Dataset data = generate_synthetic(scfg, seed);
    EmbedderConfig ecfg;
    ecfg.dim = 16;
    HashingEmbedder embedder(ecfg);
    CorpusEmbeddings emb = embed_corpus(*data.tables, embedder);
    std::vector<PairSample> pairs = build_pair_dataset(data, emb, 3, 0.5);

    PredictionParams f = init_prediction_params(TaskKind::CTA, ecfg.dim, 12, 8,
                                                data.label_vocab.size(), seed + 1);
    std::vector<EncodedInput> inputs;
    for (const PairSample& s : pairs)
        inputs.push_back(make_encoded_input(emb.tables[s.table_index], s.target, s.context));

    {
        PredictionParams grad = zeros_like(f);
        double scale = 1.0 / static_cast<double>(pairs.size());
        for (std::size_t i = 0; i < pairs.size(); ++i)
            prediction_loss_backward(inputs[i], pairs[i].label_id, f, grad, scale);
        ParamView gv = prediction_view(grad);
        Vector analytic = flatten(gv);
        if (corrupt != 0.0)
            for (double& g : analytic) g += corrupt;
        auto loss_fn = [&]() {
            double total = 0.0;
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                Vector logits = dense_forward(encode_from_input(inputs[i], f), f.classifier);
                total += softmax_xent(logits, pairs[i].label_id).loss;
            }
            return total / static_cast<double>(pairs.size());
        };
        ParamView pv = prediction_view(f);
        Rng rng(seed + 2);
        report.prediction_max_rel = finite_diff_check(pv, analytic, loss_fn, probes, eps, rng);
    }

    {
        std::vector<VerificationSample> vset =
            build_verification_dataset(pairs, {}, f, emb, 16, seed + 3);
        std::vector<Vector> features;
        std::vector<int> labels;
        for (const VerificationSample& s : vset) {
            features.push_back(encode_target(emb.tables[s.table_index], s.target, s.subset, f));
            labels.push_back(s.label);
        }
        VerifierParams v = init_verifier_params(f.repr_dim(), 10, seed + 4);
        VerifierParams grad = zeros_like(v);
        double scale = 1.0 / static_cast<double>(features.size());
        for (std::size_t i = 0; i < features.size(); ++i)
            verifier_loss_backward(features[i], labels[i], v, grad, scale);
        ParamView gv = verifier_view(grad);
        Vector analytic = flatten(gv);
        if (corrupt != 0.0)
            for (double& g : analytic) g += corrupt;
        auto loss_fn = [&]() {
            double total = 0.0;
            for (std::size_t i = 0; i < features.size(); ++i) {
                Vector z = mlp_forward(features[i], std::span<const DenseParams>(v.layers));
                total += softmax_xent(z, static_cast<std::size_t>(labels[i])).loss;
            }
            return total / static_cast<double>(features.size());
        };
        ParamView pv = verifier_view(v);
        Rng rng(seed + 5);
        report.verifier_max_rel = finite_diff_check(pv, analytic, loss_fn, probes, eps, rng);
    }
    return report;
}

}  // namespace reveal
