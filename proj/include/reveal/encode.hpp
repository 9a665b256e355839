#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "reveal/common.hpp"
#include "reveal/embed.hpp"
#include "reveal/metrics.hpp"
#include "reveal/nnkernel.hpp"
#include "reveal/retrieve.hpp"
#include "reveal/tabledata.hpp"

namespace reveal {

// Two trainable role vectors: r0 marks context columns, r1 the target.
// Zero-initialized, so an untrained encoder sees plain embeddings.
struct RoleTable {
    Vector r0, r1;

    RoleTable() = default;
    explicit RoleTable(std::size_t dim) : r0(dim, 0.0), r1(dim, 0.0) {}
    bool operator==(const RoleTable&) const = default;
};

// Context-aware encoder plus linear classifier for one task. The encoder
// input is [target slots ; context slot]: the target occupies one embedding
// slot for CTA and two (ordered) for CPA; the context slot is the mean of
// the role-tagged context embeddings, or r0 alone when the context is empty.
struct PredictionParams {
    TaskKind task = TaskKind::CTA;
    std::size_t embed_dim = 0;
    std::size_t num_classes = 0;
    RoleTable role;
    std::array<DenseParams, 2> encoder;  // input -> hidden -> d_h
    DenseParams classifier;              // d_h -> num_classes

    bool operator==(const PredictionParams&) const = default;

    std::size_t target_slots() const { return task == TaskKind::CTA ? 1 : 2; }
    std::size_t input_dim() const { return (target_slots() + 1) * embed_dim; }
    std::size_t repr_dim() const { return encoder[1].out; }
};

inline PredictionParams init_prediction_params(TaskKind task, std::size_t embed_dim,
                                               std::size_t hidden_dim, std::size_t repr_dim,
                                               std::size_t num_classes, std::uint64_t seed) {
    PredictionParams p;
    p.task = task;
    p.embed_dim = embed_dim;
    p.num_classes = num_classes;
    p.role = RoleTable(embed_dim);
    p.encoder[0] = DenseParams(p.input_dim(), hidden_dim);
    p.encoder[1] = DenseParams(hidden_dim, repr_dim);
    p.classifier = DenseParams(repr_dim, num_classes);
    Rng rng(seed);
    init_dense(p.encoder[0], rng);
    init_dense(p.encoder[1], rng);
    init_dense(p.classifier, rng);
    return p;
}

// Canonical array order for the optimizer, checkpoints and grad checks.
inline ParamView prediction_view(PredictionParams& p) {
    ParamView v;
    v.arrays.emplace_back(p.role.r0);
    v.arrays.emplace_back(p.role.r1);
    append_view(v, p.encoder[0]);
    append_view(v, p.encoder[1]);
    append_view(v, p.classifier);
    return v;
}

inline PredictionParams zeros_like(const PredictionParams& p) {
    PredictionParams g = p;
    std::fill(g.role.r0.begin(), g.role.r0.end(), 0.0);
    std::fill(g.role.r1.begin(), g.role.r1.end(), 0.0);
    for (DenseParams* d : {&g.encoder[0], &g.encoder[1], &g.classifier}) {
        std::fill(d->weight.begin(), d->weight.end(), 0.0);
        std::fill(d->bias.begin(), d->bias.end(), 0.0);
    }
    return g;
}

// One training unit: a target paired with its own retrieved context (Eq. 6
// style target-context pairs rather than whole tables).
struct PairSample {
    std::size_t table_index = 0;
    Target target;
    ColumnContext context;
    std::size_t label_id = 0;
    bool operator==(const PairSample&) const = default;
};

// Embeddings for every table of a corpus, index-aligned with Dataset tables.
struct CorpusEmbeddings {
    std::vector<ColumnEmbeddings> tables;
};

inline CorpusEmbeddings embed_corpus(const std::vector<Table>& tables,
                                     const ColumnEmbedder& embedder) {
    CorpusEmbeddings e;
    e.tables.reserve(tables.size());
    for (const Table& t : tables) e.tables.push_back(embed_table(t, embedder));
    return e;
}

// The fixed, parameter-independent part of one sample's encoder input:
// raw target embedding slots and the mean context embedding (zeros when the
// context is empty, so the r0 slot alone encodes "no context").
struct EncodedInput {
    Vector pre_target;  // embed_dim (CTA) or 2*embed_dim (CPA)
    Vector pre_context; // embed_dim
};

inline EncodedInput make_encoded_input(const ColumnEmbeddings& emb, const Target& target,
                                       const ColumnContext& context) {
    EncodedInput in;
    for (std::size_t t : target.indices)
        in.pre_target.insert(in.pre_target.end(), emb.cols[t].begin(), emb.cols[t].end());
    std::size_t d = emb.cols.empty() ? 0 : emb.cols[0].size();
    in.pre_context.assign(d, 0.0);
    if (!context.empty()) {
        // Sum in ascending index order so the mean is bitwise identical for
        // any permutation of the same context.
        std::vector<std::size_t> sorted = context.col_indices;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t c : sorted)
            for (std::size_t i = 0; i < d; ++i) in.pre_context[i] += emb.cols[c][i];
        double inv = 1.0 / static_cast<double>(context.size());
        for (double& x : in.pre_context) x *= inv;
    }
    return in;
}

inline Vector assemble_encoder_input(const EncodedInput& in, const PredictionParams& p) {
    std::size_t d = p.embed_dim;
    if (in.pre_target.size() != p.target_slots() * d || in.pre_context.size() != d)
        throw std::invalid_argument("encoder input does not match parameter shapes");
    Vector x;
    x.reserve(p.input_dim());
    for (std::size_t s = 0; s < p.target_slots(); ++s)
        for (std::size_t i = 0; i < d; ++i) x.push_back(in.pre_target[s * d + i] + p.role.r1[i]);
    for (std::size_t i = 0; i < d; ++i) x.push_back(in.pre_context[i] + p.role.r0[i]);
    return x;
}

struct EncodeCache {
    Vector x;
    MlpCache encoder;
};

inline Vector encode_from_input(const EncodedInput& in, const PredictionParams& p,
                                EncodeCache* cache = nullptr) {
    Vector x = assemble_encoder_input(in, p);
    std::span<const DenseParams> enc(p.encoder);
    if (cache) {
        cache->x = std::move(x);
        return mlp_forward(cache->x, enc, &cache->encoder);
    }
    return mlp_forward(x, enc);
}

// h = enc2(ReLU(enc1([x_target ; x_context]))), Eqs. 3-5 at column level.
inline Vector encode_target(const ColumnEmbeddings& emb, const Target& target,
                            const ColumnContext& context, const PredictionParams& p) {
    return encode_from_input(make_encoded_input(emb, target, context), p);
}

inline Vector encode_target(const Table& table, const Target& target, const ColumnContext& context,
                            const PredictionParams& p, const ColumnEmbedder& embedder) {
    return encode_target(embed_table(table, embedder), target, context, p);
}

// Class probability vector softmax(classifier(h)). Predicted label is the
// argmax, ties to the lowest label id.
inline Vector predict(const ColumnEmbeddings& emb, const Target& target,
                      const ColumnContext& context, const PredictionParams& p) {
    return softmax(dense_forward(encode_target(emb, target, context, p), p.classifier));
}

inline Vector predict(const Table& table, const Target& target, const ColumnContext& context,
                      const PredictionParams& p, const ColumnEmbedder& embedder) {
    return predict(embed_table(table, embedder), target, context, p);
}

inline std::size_t predict_label(const ColumnEmbeddings& emb, const Target& target,
                                 const ColumnContext& context, const PredictionParams& p) {
    return argmax(predict(emb, target, context, p));
}

// Cross-entropy loss (unscaled) and full parameter gradient for one sample;
// gradients accumulate into `grad` scaled by `scale`. Embeddings are inputs,
// not trainable, so nothing flows into them.
inline double prediction_loss_backward(const EncodedInput& in, std::size_t label,
                                       const PredictionParams& p, PredictionParams& grad,
                                       double scale) {
    EncodeCache cache;
    Vector h = encode_from_input(in, p, &cache);
    Vector logits = dense_forward(h, p.classifier);
    SoftmaxXent sx = softmax_xent(logits, label);
    for (double& g : sx.grad) g *= scale;

    Vector dh = dense_backward(h, p.classifier, sx.grad, grad.classifier);
    Vector dx = mlp_backward(dh, std::span<const DenseParams>(p.encoder), cache.encoder,
                             std::span<DenseParams>(grad.encoder));

    std::size_t d = p.embed_dim;
    for (std::size_t s = 0; s < p.target_slots(); ++s)
        for (std::size_t i = 0; i < d; ++i) grad.role.r1[i] += dx[s * d + i];
    for (std::size_t i = 0; i < d; ++i) grad.role.r0[i] += dx[p.target_slots() * d + i];
    return sx.loss;
}

// Builds one PairSample per labeled target, with the context chosen by the
// configured strategy (greedy MMR by default).
inline std::vector<PairSample> build_pair_dataset(const Dataset& d, const CorpusEmbeddings& emb,
                                                  std::size_t k, double lambda,
                                                  RetrievalStrategy strategy = RetrievalStrategy::MMR,
                                                  std::uint64_t seed = 0) {
    std::vector<PairSample> pairs;
    pairs.reserve(d.targets.size());
    for (const TargetRef& ref : d.targets) {
        const ColumnEmbeddings& te = emb.tables[ref.table_index];
        SimilarityMatrix sims = build_similarity(te, ref.labeled.target);
        ColumnContext ctx =
            baseline_context_from_sims(strategy, sims, ref.labeled.target, k, lambda, seed);
        pairs.push_back({ref.table_index, ref.labeled.target, std::move(ctx), ref.labeled.label_id});
    }
    return pairs;
}

inline std::vector<PairSample> build_pair_dataset(const Dataset& d, std::size_t k, double lambda,
                                                  const ColumnEmbedder& embedder) {
    return build_pair_dataset(d, embed_corpus(*d.tables, embedder), k, lambda);
}

enum class SelectMetric { MacroF1, MicroF1 };

struct PredictionTrainConfig {
    std::size_t epochs = 30;
    double lr = 1e-3;
    std::size_t batch_size = 64;
    std::size_t hidden_dim = 256;
    std::size_t repr_dim = 128;
    SelectMetric select_metric = SelectMetric::MacroF1;
};

struct PredictionTrainResult {
    PredictionParams params;
    std::vector<double> epoch_loss;   // mean per-sample loss per epoch
    std::vector<double> valid_metric; // per epoch, empty if no validation set
    std::size_t best_epoch = 0;
};

// Adam on the mean cross-entropy over target-context pairs. With a
// validation set, returns the parameters of the epoch with the best
// validation metric (first best wins); otherwise the final epoch.
inline PredictionTrainResult train_prediction(const std::vector<PairSample>& train_pairs,
                                              const std::vector<PairSample>& valid_pairs,
                                              const CorpusEmbeddings& emb, TaskKind task,
                                              std::size_t num_classes,
                                              const PredictionTrainConfig& cfg,
                                              std::uint64_t seed) {
    if (train_pairs.empty()) throw ConfigError("train_prediction: empty pair dataset");
    if (num_classes == 0) throw ConfigError("train_prediction: empty label vocabulary");
    std::size_t embed_dim = 0;
    for (const auto& t : emb.tables)
        if (!t.cols.empty()) {
            embed_dim = t.cols[0].size();
            break;
        }
    if (embed_dim == 0) throw ConfigError("train_prediction: no embeddings");

    PredictionTrainResult out;
    out.params = init_prediction_params(task, embed_dim, cfg.hidden_dim, cfg.repr_dim, num_classes,
                                        seed);
    PredictionParams& p = out.params;

    std::vector<EncodedInput> inputs;
    inputs.reserve(train_pairs.size());
    for (const PairSample& s : train_pairs)
        inputs.push_back(make_encoded_input(emb.tables[s.table_index], s.target, s.context));
    std::vector<EncodedInput> valid_inputs;
    valid_inputs.reserve(valid_pairs.size());
    for (const PairSample& s : valid_pairs)
        valid_inputs.push_back(make_encoded_input(emb.tables[s.table_index], s.target, s.context));

    ParamView view = prediction_view(p);
    AdamState adam(view.total(), AdamHyper{cfg.lr});
    Rng shuffler(seed ^ 0x5e0d5e0d5e0d5e0dull);

    std::vector<std::size_t> order(train_pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    double best_metric = -1.0;
    std::optional<PredictionParams> best_params;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffler.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            PredictionParams grad = zeros_like(p);
            double scale = 1.0 / static_cast<double>(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const PairSample& s = train_pairs[order[i]];
                epoch_loss += prediction_loss_backward(inputs[order[i]], s.label_id, p, grad, scale);
            }
            ParamView gview = prediction_view(grad);
            adam_step(view, flatten(gview), adam);
        }
        out.epoch_loss.push_back(epoch_loss / static_cast<double>(train_pairs.size()));

        if (!valid_pairs.empty()) {
            std::vector<std::size_t> preds, gts;
            preds.reserve(valid_pairs.size());
            for (std::size_t i = 0; i < valid_pairs.size(); ++i) {
                Vector probs =
                    softmax(dense_forward(encode_from_input(valid_inputs[i], p), p.classifier));
                preds.push_back(argmax(probs));
                gts.push_back(valid_pairs[i].label_id);
            }
            MetricsReport m = evaluate_metrics(preds, gts, num_classes);
            double metric = cfg.select_metric == SelectMetric::MacroF1 ? m.macro_f1 : m.micro_f1;
            out.valid_metric.push_back(metric);
            if (metric > best_metric) {
                best_metric = metric;
                best_params = p;
                out.best_epoch = epoch;
            }
        }
    }
    if (best_params) out.params = std::move(*best_params);
    return out;
}

}  // namespace reveal
