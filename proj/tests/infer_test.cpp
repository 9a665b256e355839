#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

#include "reveal/infer.hpp"

using namespace reveal;

namespace {

ColumnContext make_context(std::initializer_list<std::size_t> idx) {
    return ColumnContext{idx};
}

// score(B) = 1 - |B symdiff B*| / |C|: strictly improves while removing
// columns outside B*, strictly degrades once B* is touched.
SubsetScorer planted_oracle(const ColumnContext& full, const std::set<std::size_t>& planted) {
    double denom = static_cast<double>(full.size());
    return [planted, denom](const ColumnContext& b) {
        std::set<std::size_t> bs(b.col_indices.begin(), b.col_indices.end());
        std::size_t sym = 0;
        for (std::size_t x : bs) sym += planted.count(x) == 0;
        for (std::size_t x : planted) sym += bs.count(x) == 0;
        return 1.0 - static_cast<double>(sym) / denom;
    };
}

// Deterministic pseudo-random scorer: a fresh "verifier" per seed.
SubsetScorer random_scorer(std::uint64_t seed) {
    return [seed](const ColumnContext& b) {
        std::uint64_t h = seed ^ kFnvOffsetBasis;
        for (std::size_t c : b.col_indices) {
            h ^= c + 0x9e3779b97f4a7c15ull;
            h *= kFnvPrime;
        }
        h ^= 0x1234567;
        h *= kFnvPrime;
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    };
}

}  // namespace

TEST_CASE("top-down stops immediately when every removal scores lower") {
    ColumnContext c = make_context({0, 1, 2, 3, 4});
    SubsetScorer size_score = [](const ColumnContext& b) {
        return static_cast<double>(b.size());
    };
    SearchResult r = topdown_select(c, size_score);
    CHECK(r.selected == c);
    CHECK(r.trace.evaluated == 1 + c.size());
    CHECK(r.trace.stop == StopReason::EarlyStop);
}

TEST_CASE("equal scores continue the search down to one column") {
    ColumnContext c = make_context({2, 5, 9});
    SubsetScorer constant = [](const ColumnContext&) { return 0.5; };
    SearchResult r = topdown_select(c, constant);
    CHECK(r.selected.size() == 1);
    CHECK(r.trace.stop == StopReason::SizeOne);
    // Ties always remove the lowest index, so the survivor is the highest.
    CHECK(r.selected.col_indices == std::vector<std::size_t>{9});
}

TEST_CASE("top-down recovers a planted subset and matches exhaustive search") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        Rng rng(seed);
        std::size_t n = 2 + rng.index(9);  // |C| in 2..10
        ColumnContext c;
        for (std::size_t i = 0; i < n; ++i) c.col_indices.push_back(i * 2);
        std::set<std::size_t> planted;
        std::size_t planted_size = 1 + rng.index(n - 1);  // strict subset
        while (planted.size() < planted_size) planted.insert(c.col_indices[rng.index(n)]);
        SubsetScorer oracle = planted_oracle(c, planted);

        SearchResult td = topdown_select(c, oracle);
        SearchResult ex = exhaustive_select(c, oracle);
        std::vector<std::size_t> want(planted.begin(), planted.end());
        CHECK(td.selected.col_indices == want);
        CHECK(ex.selected.col_indices == want);
        CHECK(td.selected == ex.selected);
    }
}

TEST_CASE("top-down evaluation count is quadratically bounded") {
    Rng rng(77);
    for (int trial = 0; trial < 500; ++trial) {
        std::size_t n = 1 + rng.index(12);
        ColumnContext c;
        for (std::size_t i = 0; i < n; ++i) c.col_indices.push_back(i);
        SearchResult r = topdown_select(c, random_scorer(rng.next_u64()));
        CHECK(r.trace.evaluated <= n * (n + 1) / 2);
        // Accepted scores never decrease along the trace.
        for (std::size_t s = 1; s < r.trace.steps.size(); ++s)
            CHECK(r.trace.steps[s].second >= r.trace.steps[s - 1].second);
    }
}

TEST_CASE("exhaustive search scores every subset") {
    ColumnContext c = make_context({1, 4, 7});
    SubsetScorer constant = [](const ColumnContext&) { return 1.0; };
    SearchResult r = exhaustive_select(c, constant);
    CHECK(r.trace.evaluated == 8);
    // Tie rule: larger subset first, so the full context wins.
    CHECK(r.selected == c);

    ColumnContext too_big;
    for (std::size_t i = 0; i < 17; ++i) too_big.col_indices.push_back(i);
    CHECK_THROWS_AS(exhaustive_select(too_big, constant), ConfigError);
}

TEST_CASE("exhaustive tie-break prefers the lexicographically smallest set") {
    ColumnContext c = make_context({0, 1});
    // {0} and {1} score 1, everything else 0.
    SubsetScorer s = [](const ColumnContext& b) { return b.size() == 1 ? 1.0 : 0.0; };
    SearchResult r = exhaustive_select(c, s);
    CHECK(r.selected.col_indices == std::vector<std::size_t>{0});
}

TEST_CASE("bottom-up grows from the top-ranked column") {
    ColumnContext c = make_context({0, 1, 2, 3});
    SECTION("increasing score reaches the full context") {
        SubsetScorer size_score = [](const ColumnContext& b) {
            return static_cast<double>(b.size());
        };
        SearchResult r = bottomup_select(c, 2, size_score);
        CHECK(r.selected == c);
        CHECK(r.trace.stop == StopReason::Exhausted);
    }
    SECTION("decreasing score keeps the singleton start") {
        SubsetScorer shrink = [](const ColumnContext& b) {
            return -static_cast<double>(b.size());
        };
        SearchResult r = bottomup_select(c, 2, shrink);
        CHECK(r.selected.col_indices == std::vector<std::size_t>{2});
        CHECK(r.trace.stop == StopReason::EarlyStop);
    }
    SECTION("planted subset containing the start is recovered") {
        SubsetScorer oracle = planted_oracle(c, {1, 3});
        SearchResult r = bottomup_select(c, 1, oracle);
        CHECK(r.selected.col_indices == std::vector<std::size_t>{1, 3});
    }
}

TEST_CASE("aggregate strategies on fixed probability rows") {
    SECTION("unanimous rows agree under every strategy") {
        std::vector<Vector> rows(5, Vector{0.1, 0.2, 0.6, 0.1});
        for (auto s : {AggregateStrategy::MaxConfidence, AggregateStrategy::MajorityVoting,
                       AggregateStrategy::WeightedVoting})
            CHECK(aggregate_from_probs(s, rows) == 2);
    }
    SECTION("majority vs max confidence split") {
        std::vector<Vector> rows{{0.9, 0.1}, {0.2, 0.8}, {0.2, 0.8}};
        CHECK(aggregate_from_probs(AggregateStrategy::MajorityVoting, rows) == 1);
        CHECK(aggregate_from_probs(AggregateStrategy::MaxConfidence, rows) == 0);
    }
    SECTION("weighted voting averages the rows") {
        std::vector<Vector> rows{{0.6, 0.4}, {0.3, 0.7}};
        CHECK(aggregate_from_probs(AggregateStrategy::WeightedVoting, rows) == 1);
    }
    SECTION("vote ties go to the lowest label id") {
        std::vector<Vector> rows{{0.9, 0.1}, {0.1, 0.9}};
        CHECK(aggregate_from_probs(AggregateStrategy::MajorityVoting, rows) == 0);
    }
}

TEST_CASE("annotate modes agree when top-down keeps the full context") {
    SynthConfig cfg;
    cfg.num_tables = 8;
    cfg.cols_min = 4;
    cfg.cols_max = 5;
    cfg.num_classes = 2;
    cfg.rows = 4;
    Dataset d = generate_synthetic(cfg, 51);
    EmbedderConfig ecfg;
    ecfg.dim = 16;
    HashingEmbedder embedder(ecfg);
    CorpusEmbeddings emb = embed_corpus(*d.tables, embedder);
    PredictionParams f = init_prediction_params(TaskKind::CTA, 16, 8, 6, 2, 1);

    // A verifier that always prefers larger subsets forces top-down to keep
    // the full retrieved context, so both modes see the same context.
    VerifierParams v = init_verifier_params(6, 4, 2);
    v.layers[0] = DenseParams(6, 4);
    v.layers[1] = DenseParams(4, 4);
    v.layers[2] = DenseParams(4, 2);  // zero -> constant 0.5, ties keep C

    for (const TargetRef& ref : d.targets) {
        Annotation plain =
            annotate(emb.tables[ref.table_index], ref.labeled.target, Mode::Reveal, f, nullptr,
                     3, 0.5);
        Annotation plus = annotate(emb.tables[ref.table_index], ref.labeled.target,
                                   Mode::RevealPlus, f, &v, 3, 0.5);
        CHECK(plain.score == std::nullopt);  // REVEAL never touches a verifier
        REQUIRE(plus.score.has_value());
        // Constant verifier walks to a single column; rerun with a strictly
        // size-loving verifier instead to pin the agreement case.
        SubsetScorer size_score = [](const ColumnContext& b) {
            return static_cast<double>(b.size());
        };
        SimilarityMatrix sims = build_similarity(emb.tables[ref.table_index], ref.labeled.target);
        ColumnContext ctx =
            retrieve_context_from_sims(sims, ref.labeled.target, 3, 0.5).context;
        SearchResult td = topdown_select(ctx, size_score);
        CHECK(td.selected == ctx);
        CHECK(plain.context_used == ctx);
    }
}

TEST_CASE("two-column tables use the single non-target column in both modes") {
    Table t;
    t.table_id = "two";
    t.columns = {{{"11.5", "12.5"}}, {{"usd", "gbp"}}};
    HashingEmbedder embedder;
    ColumnEmbeddings emb = embed_table(t, embedder);
    PredictionParams f = init_prediction_params(TaskKind::CTA, embedder.dim(), 8, 6, 2, 3);
    VerifierParams v = init_verifier_params(6, 4, 4);
    Target tgt{TaskKind::CTA, {0}};

    Annotation plain = annotate(emb, tgt, Mode::Reveal, f, nullptr, 8, 0.5);
    Annotation plus = annotate(emb, tgt, Mode::RevealPlus, f, &v, 8, 0.5);
    CHECK(plain.context_used.col_indices == std::vector<std::size_t>{1});
    // |C| = 1: the top-down loop never runs, so S = C.
    CHECK(plus.context_used.col_indices == std::vector<std::size_t>{1});
}

TEST_CASE("reveal-plus without a verifier is rejected") {
    Table t;
    t.table_id = "t";
    t.columns = {{{"a"}}, {{"b"}}};
    HashingEmbedder embedder;
    ColumnEmbeddings emb = embed_table(t, embedder);
    PredictionParams f = init_prediction_params(TaskKind::CTA, embedder.dim(), 8, 6, 2, 3);
    CHECK_THROWS_AS(annotate(emb, Target{TaskKind::CTA, {0}}, Mode::RevealPlus, f, nullptr, 4, 0.5),
                    ConfigError);
}

TEST_CASE("evaluation counter feeds through the scorer exactly once per call") {
    ColumnContext c = make_context({0, 1, 2, 3, 4, 5, 6, 7});
    std::size_t calls = 0;
    SubsetScorer counting = [&calls](const ColumnContext& b) {
        ++calls;
        return static_cast<double>(b.size());
    };
    SearchResult r = topdown_select(c, counting);
    CHECK(calls == r.trace.evaluated);
    CHECK(r.trace.evaluated <= 36);  // 8*(8+1)/2
}
