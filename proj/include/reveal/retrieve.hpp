#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "reveal/common.hpp"
#include "reveal/embed.hpp"
#include "reveal/tabledata.hpp"

namespace reveal {

// Ordered subset of non-target column indices; order is always the original
// table order.
struct ColumnContext {
    std::vector<std::size_t> col_indices;

    bool operator==(const ColumnContext&) const = default;
    std::size_t size() const { return col_indices.size(); }
    bool empty() const { return col_indices.empty(); }
    bool contains(std::size_t c) const {
        return std::find(col_indices.begin(), col_indices.end(), c) != col_indices.end();
    }
};

// Pairwise column cosines plus per-column similarity to the target. For CPA
// the target similarity of a column is the max over the two target columns.
struct SimilarityMatrix {
    std::size_t n = 0;
    std::vector<double> pair;    // n*n, row-major
    std::vector<double> target;  // n

    double pair_sim(std::size_t a, std::size_t b) const { return pair[a * n + b]; }
    double target_sim(std::size_t c) const { return target[c]; }
};

inline SimilarityMatrix build_similarity(const ColumnEmbeddings& e, const Target& target) {
    SimilarityMatrix m;
    m.n = e.cols.size();
    m.pair.assign(m.n * m.n, 0.0);
    m.target.assign(m.n, 0.0);
    for (std::size_t a = 0; a < m.n; ++a) {
        for (std::size_t b = a; b < m.n; ++b) {
            double s = cosine(e.cols[a], e.cols[b]);
            m.pair[a * m.n + b] = s;
            m.pair[b * m.n + a] = s;
        }
    }
    for (std::size_t c = 0; c < m.n; ++c) {
        double best = std::numeric_limits<double>::lowest();
        for (std::size_t t : target.indices) best = std::max(best, m.pair_sim(c, t));
        m.target[c] = best;
    }
    return m;
}

// lambda-weighted marginal relevance: lambda * cos(e_c, e_tau) minus
// (1 - lambda) * max similarity to an already selected column. With an empty
// selection the penalty term is 0. At lambda = 0.5 this is half the
// unweighted score, which leaves every argmax unchanged.
inline double marginal_relevance(std::size_t c, const SimilarityMatrix& sims,
                                 const ColumnContext& selected, double lambda) {
    double penalty = 0.0;
    if (!selected.empty()) {
        penalty = std::numeric_limits<double>::lowest();
        for (std::size_t s : selected.col_indices)
            penalty = std::max(penalty, sims.pair_sim(c, s));
    }
    return lambda * sims.target_sim(c) - (1.0 - lambda) * penalty;
}

struct RetrievalResult {
    ColumnContext context;                // sorted into table order
    std::vector<std::size_t> pick_order;  // greedy selection order (empty if all-available)
};

// Greedy MMR over a prebuilt similarity matrix. Ties in every argmax go to
// the lowest column index.
inline RetrievalResult retrieve_context_from_sims(const SimilarityMatrix& sims,
                                                  const Target& target, std::size_t k,
                                                  double lambda) {
    if (k < 1) throw ConfigError("retrieval K must be >= 1");
    if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must be in [0, 1]");

    std::vector<std::size_t> candidates;
    for (std::size_t c = 0; c < sims.n; ++c)
        if (!target.contains(c)) candidates.push_back(c);

    RetrievalResult r;
    if (candidates.size() <= k) {
        r.context.col_indices = candidates;  // all available columns, table order
        return r;
    }

    ColumnContext selected;
    while (selected.size() < k) {
        double best = std::numeric_limits<double>::lowest();
        std::size_t best_c = 0;
        bool found = false;
        for (std::size_t c : candidates) {
            if (selected.contains(c)) continue;
            double score = selected.empty() ? sims.target_sim(c)
                                            : marginal_relevance(c, sims, selected, lambda);
            if (!found || score > best) {
                best = score;
                best_c = c;
                found = true;
            }
        }
        selected.col_indices.push_back(best_c);
        r.pick_order.push_back(best_c);
    }
    std::sort(selected.col_indices.begin(), selected.col_indices.end());
    r.context = std::move(selected);
    return r;
}

inline RetrievalResult retrieve_context_detailed(const Table& table, const Target& target,
                                                 std::size_t k, double lambda,
                                                 const ColumnEmbedder& embedder) {
    ColumnEmbeddings e = embed_table(table, embedder);
    return retrieve_context_from_sims(build_similarity(e, target), target, k, lambda);
}

inline ColumnContext retrieve_context(const Table& table, const Target& target, std::size_t k,
                                      double lambda, const ColumnEmbedder& embedder) {
    return retrieve_context_detailed(table, target, k, lambda, embedder).context;
}

// Every non-target column, in table order.
inline ColumnContext full_context(std::size_t n_columns, const Target& target) {
    ColumnContext c;
    for (std::size_t i = 0; i < n_columns; ++i)
        if (!target.contains(i)) c.col_indices.push_back(i);
    return c;
}

enum class RetrievalStrategy { MMR, Random, First, Nearby, Similar, Position };

inline std::string to_string(RetrievalStrategy s) {
    switch (s) {
        case RetrievalStrategy::MMR: return "mmr";
        case RetrievalStrategy::Random: return "random";
        case RetrievalStrategy::First: return "first";
        case RetrievalStrategy::Nearby: return "nearby";
        case RetrievalStrategy::Similar: return "similar";
        case RetrievalStrategy::Position: return "position";
    }
    return "?";
}

inline RetrievalStrategy retrieval_strategy_from_string(const std::string& s) {
    if (s == "mmr") return RetrievalStrategy::MMR;
    if (s == "random") return RetrievalStrategy::Random;
    if (s == "first") return RetrievalStrategy::First;
    if (s == "nearby") return RetrievalStrategy::Nearby;
    if (s == "similar") return RetrievalStrategy::Similar;
    if (s == "position") return RetrievalStrategy::Position;
    throw ConfigError("unknown retrieval strategy '" + s + "'");
}

namespace detail {

inline ColumnContext nearby_context(std::size_t n, const Target& target, std::size_t k) {
    // Expand alternately left/right around each target index, left first.
    ColumnContext c;
    std::size_t dist = 1;
    while (c.size() < k && dist < n) {
        bool any = false;
        for (std::size_t t : target.indices) {
            if (t >= dist) {
                std::size_t cand = t - dist;
                any = true;
                if (!target.contains(cand) && !c.contains(cand) && c.size() < k)
                    c.col_indices.push_back(cand);
            }
            if (t + dist < n) {
                std::size_t cand = t + dist;
                any = true;
                if (!target.contains(cand) && !c.contains(cand) && c.size() < k)
                    c.col_indices.push_back(cand);
            }
        }
        if (!any) break;
        ++dist;
    }
    std::sort(c.col_indices.begin(), c.col_indices.end());
    return c;
}

inline ColumnContext position_context(std::size_t n, const Target& target, std::size_t k) {
    // Two leftmost non-target columns, then the immediate left/right
    // neighbors of each target index; deduplicated and capped at K in that
    // priority order.
    std::vector<std::size_t> prio;
    std::size_t taken = 0;
    for (std::size_t i = 0; i < n && taken < 2; ++i) {
        if (target.contains(i)) continue;
        prio.push_back(i);
        ++taken;
    }
    for (std::size_t t : target.indices) {
        if (t >= 1) prio.push_back(t - 1);
        if (t + 1 < n) prio.push_back(t + 1);
    }
    ColumnContext c;
    for (std::size_t cand : prio) {
        if (c.size() >= k) break;
        if (!target.contains(cand) && !c.contains(cand)) c.col_indices.push_back(cand);
    }
    std::sort(c.col_indices.begin(), c.col_indices.end());
    return c;
}

}  // namespace detail

// The non-learned context strategies used as retrieval baselines. `sims` is
// only consulted by Similar (and MMR delegates to retrieve_context).
inline ColumnContext baseline_context_from_sims(RetrievalStrategy strategy,
                                                const SimilarityMatrix& sims, const Target& target,
                                                std::size_t k, double lambda, std::uint64_t seed) {
    if (k < 1) throw ConfigError("K must be >= 1");
    std::size_t n = sims.n;
    std::vector<std::size_t> candidates;
    for (std::size_t c = 0; c < n; ++c)
        if (!target.contains(c)) candidates.push_back(c);

    switch (strategy) {
        case RetrievalStrategy::MMR:
            return retrieve_context_from_sims(sims, target, k, lambda).context;
        case RetrievalStrategy::Random: {
            if (candidates.size() <= k) return ColumnContext{candidates};
            Rng rng(seed);
            rng.shuffle(candidates);
            candidates.resize(k);
            std::sort(candidates.begin(), candidates.end());
            return ColumnContext{candidates};
        }
        case RetrievalStrategy::First: {
            if (candidates.size() > k) candidates.resize(k);
            return ColumnContext{candidates};
        }
        case RetrievalStrategy::Nearby:
            return detail::nearby_context(n, target, std::min(k, candidates.size()));
        case RetrievalStrategy::Similar: {
            // Top-K by target cosine, ties to lowest index.
            std::stable_sort(candidates.begin(), candidates.end(),
                             [&](std::size_t a, std::size_t b) {
                                 return sims.target_sim(a) > sims.target_sim(b);
                             });
            if (candidates.size() > k) candidates.resize(k);
            std::sort(candidates.begin(), candidates.end());
            return ColumnContext{candidates};
        }
        case RetrievalStrategy::Position:
            return detail::position_context(n, target, k);
    }
    throw ConfigError("unknown retrieval strategy");
}

inline ColumnContext baseline_context(RetrievalStrategy strategy, const Table& table,
                                      const Target& target, std::size_t k, double lambda,
                                      std::uint64_t seed, const ColumnEmbedder& embedder) {
    if (strategy == RetrievalStrategy::First || strategy == RetrievalStrategy::Nearby ||
        strategy == RetrievalStrategy::Position || strategy == RetrievalStrategy::Random) {
        // These never look at embeddings; skip the similarity build.
        SimilarityMatrix sims;
        sims.n = table.columns.size();
        return baseline_context_from_sims(strategy, sims, target, k, lambda, seed);
    }
    ColumnEmbeddings e = embed_table(table, embedder);
    return baseline_context_from_sims(strategy, build_similarity(e, target), target, k, lambda,
                                      seed);
}

}  // namespace reveal
