#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "reveal/common.hpp"
#include "reveal/encode.hpp"
#include "reveal/retrieve.hpp"
#include "reveal/verify.hpp"

namespace reveal {

enum class StopReason { EarlyStop, SizeOne, Exhausted };

struct SearchTrace {
    std::size_t evaluated = 0;                              // verifier invocations
    std::vector<std::pair<ColumnContext, double>> steps;    // accepted (subset, score) per iteration
    StopReason stop = StopReason::Exhausted;
};

struct SearchResult {
    ColumnContext selected;
    double score = 0.0;
    SearchTrace trace;
};

// Scores one candidate subset; the search algorithms only see this.
using SubsetScorer = std::function<double(const ColumnContext&)>;

// Top-down greedy refinement: start from the full context, repeatedly drop
// the column whose removal scores best, stop on a strict score decrease or
// at size 1. Equal scores continue the search. Ties pick the candidate that
// removes the lowest column index. Evaluates at most |C|(|C|+1)/2 subsets.
inline SearchResult topdown_select(const ColumnContext& context, const SubsetScorer& score) {
    if (context.empty()) throw ConfigError("topdown_select: context must be nonempty");
    SearchResult r;
    r.selected = context;
    r.score = score(context);
    r.trace.evaluated = 1;
    r.trace.steps.emplace_back(r.selected, r.score);
    r.trace.stop = StopReason::SizeOne;

    while (r.selected.size() > 1) {
        double best = std::numeric_limits<double>::lowest();
        ColumnContext best_subset;
        for (std::size_t drop = 0; drop < r.selected.size(); ++drop) {
            ColumnContext cand;
            cand.col_indices.reserve(r.selected.size() - 1);
            for (std::size_t i = 0; i < r.selected.size(); ++i)
                if (i != drop) cand.col_indices.push_back(r.selected.col_indices[i]);
            double s = score(cand);
            ++r.trace.evaluated;
            if (s > best) {
                best = s;
                best_subset = std::move(cand);
            }
        }
        if (best < r.score) {
            r.trace.stop = StopReason::EarlyStop;
            break;
        }
        r.selected = std::move(best_subset);
        r.score = best;
        r.trace.steps.emplace_back(r.selected, r.score);
    }
    return r;
}

// Scores all 2^|C| subsets (including the empty one). Ties prefer the larger
// subset, then the lexicographically smallest index sequence.
inline SearchResult exhaustive_select(const ColumnContext& context, const SubsetScorer& score) {
    if (context.size() > 16) throw ConfigError("exhaustive_select: |C| must be <= 16");
    SearchResult r;
    bool first = true;
    std::uint64_t n_masks = 1ull << context.size();
    for (std::uint64_t m = 0; m < n_masks; ++m) {
        ColumnContext cand = detail::subset_from_mask(context, m);
        double s = score(cand);
        ++r.trace.evaluated;
        bool better = false;
        if (first || s > r.score) {
            better = true;
        } else if (s == r.score) {
            if (cand.size() > r.selected.size())
                better = true;
            else if (cand.size() == r.selected.size() &&
                     cand.col_indices < r.selected.col_indices)
                better = true;
        }
        if (better) {
            r.selected = std::move(cand);
            r.score = s;
        }
        first = false;
    }
    r.trace.steps.emplace_back(r.selected, r.score);
    r.trace.stop = StopReason::Exhausted;
    return r;
}

// Bottom-up baseline: start from the retrieval method's top-ranked column
// and greedily add the best-scoring column; a strict decrease stops early.
// `start` is that first column (max target cosine, ties to lowest index).
inline SearchResult bottomup_select(const ColumnContext& context, std::size_t start,
                                    const SubsetScorer& score) {
    if (context.empty()) throw ConfigError("bottomup_select: context must be nonempty");
    if (!context.contains(start))
        throw std::invalid_argument("bottomup_select: start column not in context");
    SearchResult r;
    r.selected.col_indices = {start};
    r.score = score(r.selected);
    r.trace.evaluated = 1;
    r.trace.steps.emplace_back(r.selected, r.score);
    r.trace.stop = StopReason::Exhausted;

    while (r.selected.size() < context.size()) {
        double best = std::numeric_limits<double>::lowest();
        ColumnContext best_subset;
        for (std::size_t c : context.col_indices) {
            if (r.selected.contains(c)) continue;
            ColumnContext cand = r.selected;
            cand.col_indices.push_back(c);
            std::sort(cand.col_indices.begin(), cand.col_indices.end());
            double s = score(cand);
            ++r.trace.evaluated;
            if (s > best) {
                best = s;
                best_subset = std::move(cand);
            }
        }
        if (best < r.score) {
            r.trace.stop = StopReason::EarlyStop;
            break;
        }
        r.selected = std::move(best_subset);
        r.score = best;
        r.trace.steps.emplace_back(r.selected, r.score);
    }
    return r;
}

// Scorer bound to one target and a frozen model pair.
inline SubsetScorer make_quality_scorer(const ColumnEmbeddings& emb, const Target& target,
                                        const PredictionParams& f, const VerifierParams& v) {
    return [&emb, target, &f, &v](const ColumnContext& subset) {
        return quality_score(emb, target, subset, f, v);
    };
}

// Model-bound convenience overloads matching the search contracts.
inline SearchResult topdown_select(const Table& table, const Target& target,
                                   const ColumnContext& context, const PredictionParams& f,
                                   const VerifierParams& v, const ColumnEmbedder& embedder) {
    ColumnEmbeddings emb = embed_table(table, embedder);
    return topdown_select(context, make_quality_scorer(emb, target, f, v));
}

inline SearchResult exhaustive_select(const Table& table, const Target& target,
                                      const ColumnContext& context, const PredictionParams& f,
                                      const VerifierParams& v, const ColumnEmbedder& embedder) {
    ColumnEmbeddings emb = embed_table(table, embedder);
    return exhaustive_select(context, make_quality_scorer(emb, target, f, v));
}

inline SearchResult bottomup_select(const Table& table, const Target& target,
                                    const ColumnContext& context, const PredictionParams& f,
                                    const VerifierParams& v, const ColumnEmbedder& embedder) {
    ColumnEmbeddings emb = embed_table(table, embedder);
    SimilarityMatrix sims = build_similarity(emb, target);
    std::size_t start = context.col_indices[0];
    for (std::size_t c : context.col_indices)
        if (sims.target_sim(c) > sims.target_sim(start)) start = c;
    return bottomup_select(context, start, make_quality_scorer(emb, target, f, v));
}

enum class AggregateStrategy { MaxConfidence, MajorityVoting, WeightedVoting, RandomSubset };

inline std::string to_string(AggregateStrategy s) {
    switch (s) {
        case AggregateStrategy::MaxConfidence: return "max-confidence";
        case AggregateStrategy::MajorityVoting: return "majority-voting";
        case AggregateStrategy::WeightedVoting: return "weighted-voting";
        case AggregateStrategy::RandomSubset: return "random-subset";
    }
    return "?";
}

// Aggregation core over per-subset probability rows. Label ties go to the
// lowest label id; MaxConfidence ties keep the earliest row.
inline std::size_t aggregate_from_probs(AggregateStrategy strategy,
                                        const std::vector<Vector>& prob_rows) {
    if (prob_rows.empty()) throw std::invalid_argument("aggregate_from_probs: no rows");
    std::size_t num_classes = prob_rows[0].size();
    std::vector<std::size_t> votes(num_classes, 0);
    Vector prob_sum(num_classes, 0.0);
    double best_conf = std::numeric_limits<double>::lowest();
    std::size_t best_conf_label = 0;
    for (const Vector& probs : prob_rows) {
        std::size_t label = argmax(probs);
        ++votes[label];
        for (std::size_t k = 0; k < probs.size(); ++k) prob_sum[k] += probs[k];
        if (probs[label] > best_conf) {
            best_conf = probs[label];
            best_conf_label = label;
        }
    }
    switch (strategy) {
        case AggregateStrategy::MaxConfidence:
            return best_conf_label;
        case AggregateStrategy::MajorityVoting: {
            std::size_t best = 0;
            for (std::size_t k = 1; k < votes.size(); ++k)
                if (votes[k] > votes[best]) best = k;
            return best;
        }
        case AggregateStrategy::WeightedVoting:
            return argmax(prob_sum);
        default:
            throw ConfigError("unknown aggregate strategy");
    }
}

// Verifier-free baselines that aggregate the prediction module's outputs
// over all subsets of the context.
inline std::size_t aggregate_predict(AggregateStrategy strategy, const ColumnEmbeddings& emb,
                                     const Target& target, const ColumnContext& context,
                                     const PredictionParams& f, std::uint64_t seed) {
    if (context.size() > 16) throw ConfigError("aggregate_predict: |C| must be <= 16");
    std::uint64_t n_masks = 1ull << context.size();

    if (strategy == AggregateStrategy::RandomSubset) {
        Rng rng(seed);
        std::uint64_t m = rng.next_u64() & (n_masks - 1);
        return predict_label(emb, target, detail::subset_from_mask(context, m), f);
    }

    std::vector<Vector> prob_rows;
    prob_rows.reserve(n_masks);
    for (std::uint64_t m = 0; m < n_masks; ++m)
        prob_rows.push_back(predict(emb, target, detail::subset_from_mask(context, m), f));
    return aggregate_from_probs(strategy, prob_rows);
}

inline std::size_t aggregate_predict(AggregateStrategy strategy, const Table& table,
                                     const Target& target, const ColumnContext& context,
                                     const PredictionParams& f, const ColumnEmbedder& embedder,
                                     std::uint64_t seed) {
    return aggregate_predict(strategy, embed_table(table, embedder), target, context, f, seed);
}

enum class Mode { Reveal, RevealPlus };

inline std::string to_string(Mode m) { return m == Mode::Reveal ? "reveal" : "reveal-plus"; }

inline Mode mode_from_string(const std::string& s) {
    if (s == "reveal") return Mode::Reveal;
    if (s == "reveal-plus" || s == "reveal+") return Mode::RevealPlus;
    throw ConfigError("unknown mode '" + s + "' (expected 'reveal' or 'reveal-plus')");
}

struct Annotation {
    std::size_t label_id = 0;
    ColumnContext context_used;
    std::optional<double> score;  // final verifier score, REVEAL+ only
};

// End-to-end annotation of one target. REVEAL predicts straight from the
// retrieved context; REVEAL+ first refines it with top-down verification.
// REVEAL never touches the verifier.
inline Annotation annotate(const ColumnEmbeddings& emb, const Target& target, Mode mode,
                           const PredictionParams& f, const VerifierParams* v, std::size_t k,
                           double lambda) {
    SimilarityMatrix sims = build_similarity(emb, target);
    ColumnContext ctx = retrieve_context_from_sims(sims, target, k, lambda).context;
    Annotation a;
    if (mode == Mode::RevealPlus) {
        if (!v) throw ConfigError("annotate: reveal-plus requires a trained verifier");
        if (ctx.empty()) {
            a.context_used = ctx;
            a.score = quality_score(emb, target, ctx, f, *v);
        } else {
            SearchResult r = topdown_select(ctx, make_quality_scorer(emb, target, f, *v));
            a.context_used = std::move(r.selected);
            a.score = r.score;
        }
    } else {
        a.context_used = std::move(ctx);
    }
    a.label_id = predict_label(emb, target, a.context_used, f);
    return a;
}

inline Annotation annotate(const Table& table, const Target& target, Mode mode,
                           const PredictionParams& f, const VerifierParams* v, std::size_t k,
                           double lambda, const ColumnEmbedder& embedder) {
    return annotate(embed_table(table, embedder), target, mode, f, v, k, lambda);
}

}  // namespace reveal
