#pragma once

#include <array>
#include <cstdint>
#include <iostream>
#include <span>
#include <unordered_set>
#include <vector>

#include "reveal/common.hpp"
#include "reveal/encode.hpp"
#include "reveal/nnkernel.hpp"

namespace reveal {

// A context subset B of some target's retrieved context, labeled 1 when the
// frozen prediction module annotates the target correctly using B.
struct VerificationSample {
    std::size_t table_index = 0;
    Target target;
    ColumnContext subset;
    int label = 0;  // 0 or 1
    bool operator==(const VerificationSample&) const = default;
};

// Three-layer MLP emitting two logits (negative, positive). The quality
// score is the positive-class softmax probability, which stays near 0.5
// when the model is uncertain instead of saturating like a single sigmoid.
// The single-logit head is kept only as an ablation.
struct VerifierParams {
    std::array<DenseParams, 3> layers;  // d_h -> v_dim -> v_dim -> 2 (or 1 for the ablation)
    bool operator==(const VerifierParams&) const = default;

    std::size_t input_dim() const { return layers[0].in; }
    bool single_logit() const { return layers[2].out == 1; }
};

inline VerifierParams init_verifier_params(std::size_t repr_dim, std::size_t v_dim,
                                           std::uint64_t seed, bool single_logit = false) {
    VerifierParams v;
    v.layers[0] = DenseParams(repr_dim, v_dim);
    v.layers[1] = DenseParams(v_dim, v_dim);
    v.layers[2] = DenseParams(v_dim, single_logit ? 1 : 2);
    Rng rng(seed);
    for (auto& l : v.layers) init_dense(l, rng);
    return v;
}

inline ParamView verifier_view(VerifierParams& v) {
    ParamView view;
    for (auto& l : v.layers) append_view(view, l);
    return view;
}

inline VerifierParams zeros_like(const VerifierParams& v) {
    VerifierParams g = v;
    for (auto& l : g.layers) {
        std::fill(l.weight.begin(), l.weight.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    return g;
}

inline double quality_score_from_repr(const Vector& h, const VerifierParams& v) {
    Vector z = mlp_forward(h, std::span<const DenseParams>(v.layers));
    if (v.single_logit()) return 1.0 / (1.0 + std::exp(-z[0]));
    return softmax(z)[1];
}

// Pi(tau, B): probability that the frozen prediction module gets the target
// right when B is the context. Uses the context-aware encoding of f.
inline double quality_score(const ColumnEmbeddings& emb, const Target& target,
                            const ColumnContext& subset, const PredictionParams& f,
                            const VerifierParams& v) {
    return quality_score_from_repr(encode_target(emb, target, subset, f), v);
}

inline double quality_score(const Table& table, const Target& target, const ColumnContext& subset,
                            const PredictionParams& f, const VerifierParams& v,
                            const ColumnEmbedder& embedder) {
    return quality_score(embed_table(table, embedder), target, subset, f, v);
}

namespace detail {

inline ColumnContext subset_from_mask(const ColumnContext& context, std::uint64_t mask) {
    ColumnContext b;
    for (std::size_t i = 0; i < context.size(); ++i)
        if (mask & (1ull << i)) b.col_indices.push_back(context.col_indices[i]);
    return b;
}

}  // namespace detail

// Enumerates every subset of each pair's context (including the empty set
// and the full context) when 2^|C| fits under `cap`; otherwise samples `cap`
// distinct subsets, always keeping the empty and the full one. Labels come
// from the frozen prediction module.
inline std::vector<VerificationSample> build_verification_dataset(
    const std::vector<PairSample>& train_pairs, const std::vector<PairSample>& valid_pairs,
    const PredictionParams& f, const CorpusEmbeddings& emb, std::size_t cap, std::uint64_t seed) {
    if (cap < 2) throw ConfigError("subset cap must be >= 2");
    std::vector<VerificationSample> out;
    Rng rng(seed);

    auto process = [&](const PairSample& pair) {
        std::size_t k = pair.context.size();
        if (k > 62) throw ConfigError("context too large for subset enumeration");
        std::uint64_t full = k == 0 ? 0 : ((1ull << k) - 1);
        std::vector<std::uint64_t> masks;
        if ((1ull << k) <= cap) {
            for (std::uint64_t m = 0; m <= full; ++m) masks.push_back(m);
        } else {
            std::unordered_set<std::uint64_t> seen{0, full};
            masks = {0, full};
            while (masks.size() < cap) {
                std::uint64_t m = rng.next_u64() & full;
                if (seen.insert(m).second) masks.push_back(m);
            }
        }
        const ColumnEmbeddings& te = emb.tables[pair.table_index];
        for (std::uint64_t m : masks) {
            ColumnContext b = detail::subset_from_mask(pair.context, m);
            int y = predict_label(te, pair.target, b, f) == pair.label_id ? 1 : 0;
            out.push_back({pair.table_index, pair.target, std::move(b), y});
        }
    };

    for (const PairSample& p : train_pairs) process(p);
    for (const PairSample& p : valid_pairs) process(p);
    return out;
}

// Binary cross-entropy on the positive-class probability; returns the
// unscaled loss, accumulating gradients scaled by `scale`.
inline double verifier_loss_backward(const Vector& h, int label, const VerifierParams& v,
                                     VerifierParams& grad, double scale) {
    MlpCache cache;
    Vector z = mlp_forward(h, std::span<const DenseParams>(v.layers), &cache);
    double loss;
    Vector dz(z.size());
    if (v.single_logit()) {
        double p = 1.0 / (1.0 + std::exp(-z[0]));
        loss = label ? -std::log(p) : -std::log(1.0 - p);
        dz[0] = (p - static_cast<double>(label)) * scale;
    } else {
        SoftmaxXent sx = softmax_xent(z, static_cast<std::size_t>(label));
        loss = sx.loss;
        dz = sx.grad;
        for (double& g : dz) g *= scale;
    }
    mlp_backward(dz, std::span<const DenseParams>(v.layers), cache, std::span<DenseParams>(grad.layers));
    return loss;
}

struct VerifierTrainConfig {
    std::size_t epochs = 30;
    double lr = 1e-3;
    std::size_t batch_size = 64;
    std::size_t v_dim = 128;
    bool single_logit = false;  // ablation only
};

struct VerifierTrainResult {
    VerifierParams params;
    std::vector<double> epoch_loss;
};

// Core trainer over precomputed target representations.
inline VerifierTrainResult train_verifier_on_features(const std::vector<Vector>& features,
                                                      const std::vector<int>& labels,
                                                      const VerifierTrainConfig& cfg,
                                                      std::uint64_t seed) {
    if (features.empty()) throw ConfigError("train_verifier: empty dataset");
    if (features.size() != labels.size())
        throw std::invalid_argument("train_verifier: features/labels length mismatch");
    bool has_pos = false, has_neg = false;
    for (int y : labels) (y ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
        std::cerr << "warning: verification dataset has a single class; training proceeds\n";

    VerifierTrainResult out;
    out.params = init_verifier_params(features[0].size(), cfg.v_dim, seed, cfg.single_logit);
    VerifierParams& v = out.params;
    ParamView view = verifier_view(v);
    AdamState adam(view.total(), AdamHyper{cfg.lr});
    Rng shuffler(seed ^ 0x9c0ffee1badf00dull);

    std::vector<std::size_t> order(features.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffler.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            VerifierParams grad = zeros_like(v);
            double scale = 1.0 / static_cast<double>(end - start);
            for (std::size_t i = start; i < end; ++i)
                epoch_loss +=
                    verifier_loss_backward(features[order[i]], labels[order[i]], v, grad, scale);
            ParamView gview = verifier_view(grad);
            adam_step(view, flatten(gview), adam);
        }
        out.epoch_loss.push_back(epoch_loss / static_cast<double>(features.size()));
    }
    return out;
}

// Trains the verifier on Eq.-8-labeled subsets. The prediction module is
// frozen: target representations are computed once up front and f is never
// touched again.
inline VerifierTrainResult train_verifier(const std::vector<VerificationSample>& samples,
                                          const PredictionParams& f, const CorpusEmbeddings& emb,
                                          const VerifierTrainConfig& cfg, std::uint64_t seed) {
    if (samples.empty()) throw ConfigError("train_verifier: empty dataset");
    std::vector<Vector> features;
    std::vector<int> labels;
    features.reserve(samples.size());
    labels.reserve(samples.size());
    for (const VerificationSample& s : samples) {
        features.push_back(encode_target(emb.tables[s.table_index], s.target, s.subset, f));
        labels.push_back(s.label);
    }
    return train_verifier_on_features(features, labels, cfg, seed);
}

}  // namespace reveal
