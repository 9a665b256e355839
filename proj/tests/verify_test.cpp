#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "reveal/verify.hpp"

using namespace reveal;

namespace {

struct SmallFixture {
    Dataset data;
    CorpusEmbeddings emb;
    std::vector<PairSample> pairs;
    PredictionParams f;
};

SmallFixture make_fixture(std::uint64_t seed, std::size_t tables = 12) {
    SynthConfig cfg;
    cfg.num_tables = tables;
    cfg.cols_min = 4;
    cfg.cols_max = 5;
    cfg.num_classes = 2;
    cfg.rows = 4;
    SmallFixture fx;
    fx.data = generate_synthetic(cfg, seed);
    EmbedderConfig ecfg;
    ecfg.dim = 16;
    HashingEmbedder embedder(ecfg);
    fx.emb = embed_corpus(*fx.data.tables, embedder);
    fx.pairs = build_pair_dataset(fx.data, fx.emb, 3, 0.5);
    fx.f = init_prediction_params(TaskKind::CTA, 16, 8, 6, 2, seed + 1);
    return fx;
}

}  // namespace

TEST_CASE("subset enumeration is exhaustive under the cap") {
    SmallFixture fx = make_fixture(3, 4);
    // Force |C| = 3 for every pair in this fixture (cols 4..5 -> 3..4
    // non-target; keep only pairs with exactly 3).
    std::vector<PairSample> pairs;
    for (const PairSample& p : fx.pairs)
        if (p.context.size() == 3) pairs.push_back(p);
    REQUIRE(!pairs.empty());

    std::vector<VerificationSample> vset =
        build_verification_dataset(pairs, {}, fx.f, fx.emb, 1000, 0);
    CHECK(vset.size() == pairs.size() * 8);  // 2^3 per target

    // Includes the empty subset and the full context for each target.
    for (const PairSample& p : pairs) {
        bool has_empty = false, has_full = false;
        for (const VerificationSample& s : vset) {
            if (s.table_index != p.table_index || !(s.target == p.target)) continue;
            has_empty = has_empty || s.subset.empty();
            has_full = has_full || s.subset == p.context;
        }
        CHECK(has_empty);
        CHECK(has_full);
    }
}

TEST_CASE("capped sampling keeps the bounds and the forced subsets") {
    SmallFixture fx = make_fixture(5, 6);
    std::vector<PairSample> wide = build_pair_dataset(fx.data, fx.emb, 4, 0.5);
    std::vector<PairSample> pairs;
    for (const PairSample& p : wide)
        if (p.context.size() == 4) pairs.push_back(p);
    REQUIRE(!pairs.empty());

    std::vector<VerificationSample> vset =
        build_verification_dataset(pairs, {}, fx.f, fx.emb, 6, 17);
    CHECK(vset.size() == pairs.size() * 6);  // cap < 2^4

    std::vector<VerificationSample> again =
        build_verification_dataset(pairs, {}, fx.f, fx.emb, 6, 17);
    CHECK(vset == again);  // deterministic per seed
}

TEST_CASE("stored labels match an independent re-run of the predictor") {
    SmallFixture fx = make_fixture(11);
    std::vector<VerificationSample> vset =
        build_verification_dataset(fx.pairs, {}, fx.f, fx.emb, 64, 2);
    std::size_t positives = 0;
    for (const VerificationSample& s : vset) {
        std::size_t label_id = 0;
        for (const PairSample& p : fx.pairs)
            if (p.table_index == s.table_index && p.target == s.target) label_id = p.label_id;
        Vector probs = predict(fx.emb.tables[s.table_index], s.target, s.subset, fx.f);
        int expect = argmax(probs) == label_id ? 1 : 0;
        REQUIRE(s.label == expect);
        positives += s.label;
    }
    CHECK(positives > 0);
}

TEST_CASE("a target predicted correctly under every subset gets all-positive labels") {
    SmallFixture fx = make_fixture(7, 3);
    // Zero classifier: uniform probabilities, argmax = label 0 everywhere.
    fx.f.classifier = DenseParams(fx.f.repr_dim(), 2);
    std::vector<PairSample> zeros;
    for (const PairSample& p : fx.pairs)
        if (p.label_id == 0) zeros.push_back(p);
    REQUIRE(!zeros.empty());
    std::vector<VerificationSample> vset =
        build_verification_dataset(zeros, {}, fx.f, fx.emb, 64, 0);
    for (const VerificationSample& s : vset) CHECK(s.label == 1);
}

TEST_CASE("quality score conventions") {
    SECTION("zero verifier weights score 0.5 everywhere") {
        SmallFixture fx = make_fixture(19, 3);
        VerifierParams v;
        v.layers[0] = DenseParams(fx.f.repr_dim(), 4);
        v.layers[1] = DenseParams(4, 4);
        v.layers[2] = DenseParams(4, 2);
        for (const PairSample& p : fx.pairs)
            CHECK(quality_score(fx.emb.tables[p.table_index], p.target, p.context, fx.f, v) ==
                  Catch::Approx(0.5).margin(1e-12));
    }
    SECTION("logits (0, ln 3) score 0.75") {
        VerifierParams v;
        v.layers[0] = DenseParams(3, 2);
        v.layers[1] = DenseParams(2, 2);
        v.layers[2] = DenseParams(2, 2);
        v.layers[2].bias = {0.0, std::log(3.0)};
        CHECK(quality_score_from_repr(Vector{0.1, -0.2, 0.3}, v) ==
              Catch::Approx(0.75).margin(1e-12));
    }
    SECTION("score is strictly inside (0,1) and the two logits sum to one") {
        Rng rng(23);
        VerifierParams v = init_verifier_params(5, 6, 31);
        for (int t = 0; t < 50; ++t) {
            Vector h(5);
            for (double& x : h) x = rng.uniform(-3.0, 3.0);
            double score = quality_score_from_repr(h, v);
            CHECK(score > 0.0);
            CHECK(score < 1.0);
            Vector z = mlp_forward(h, std::span<const DenseParams>(v.layers));
            double negative = softmax(z)[0];
            CHECK(score + negative == Catch::Approx(1.0).margin(1e-9));
        }
    }
}

TEST_CASE("verifier loss at zero init is ln 2 per sample") {
    VerifierParams v;
    v.layers[0] = DenseParams(4, 3);
    v.layers[1] = DenseParams(3, 3);
    v.layers[2] = DenseParams(3, 2);
    VerifierParams grad = zeros_like(v);
    double loss = verifier_loss_backward(Vector{1.0, -1.0, 0.5, 0.0}, 1, v, grad, 1.0);
    CHECK(loss == Catch::Approx(std::log(2.0)).margin(1e-12));
}

TEST_CASE("verifier gradient matches finite differences") {
    Rng rng(3);
    VerifierParams v = init_verifier_params(6, 5, 12);
    std::vector<Vector> hs;
    std::vector<int> ys;
    for (int i = 0; i < 10; ++i) {
        Vector h(6);
        for (double& x : h) x = rng.uniform(-1.0, 1.0);
        hs.push_back(h);
        ys.push_back(static_cast<int>(rng.index(2)));
    }
    VerifierParams grad = zeros_like(v);
    double scale = 1.0 / static_cast<double>(hs.size());
    for (std::size_t i = 0; i < hs.size(); ++i)
        verifier_loss_backward(hs[i], ys[i], v, grad, scale);
    ParamView gv = verifier_view(grad);
    auto loss = [&]() {
        double total = 0.0;
        for (std::size_t i = 0; i < hs.size(); ++i) {
            Vector z = mlp_forward(hs[i], std::span<const DenseParams>(v.layers));
            total += softmax_xent(z, static_cast<std::size_t>(ys[i])).loss;
        }
        return total / static_cast<double>(hs.size());
    };
    ParamView pv = verifier_view(v);
    Rng probe(4);
    CHECK(finite_diff_check(pv, flatten(gv), loss, 25, 1e-4, probe) < 1e-4);
}

TEST_CASE("training separates a linearly separable toy set") {
    Rng rng(29);
    std::vector<Vector> hs;
    std::vector<int> ys;
    for (int i = 0; i < 200; ++i) {
        Vector h(6);
        for (double& x : h) x = rng.uniform(-1.0, 1.0);
        hs.push_back(h);
        ys.push_back(h[2] > 0.0 ? 1 : 0);  // one coordinate decides
    }
    VerifierTrainConfig cfg;
    cfg.epochs = 50;
    cfg.v_dim = 16;
    VerifierTrainResult a = train_verifier_on_features(hs, ys, cfg, 5);
    VerifierTrainResult b = train_verifier_on_features(hs, ys, cfg, 5);
    CHECK(a.params == b.params);  // seed determinism

    std::size_t correct = 0;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        int pred = quality_score_from_repr(hs[i], a.params) >= 0.5 ? 1 : 0;
        correct += pred == ys[i];
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(hs.size()) >= 0.95);

    CHECK_THROWS_AS(train_verifier_on_features({}, {}, cfg, 1), ConfigError);
}

TEST_CASE("single-logit ablation head trains and scores in (0,1)") {
    Rng rng(41);
    std::vector<Vector> hs;
    std::vector<int> ys;
    for (int i = 0; i < 80; ++i) {
        Vector h(4);
        for (double& x : h) x = rng.uniform(-1.0, 1.0);
        hs.push_back(h);
        ys.push_back(h[0] > 0.0 ? 1 : 0);
    }
    VerifierTrainConfig cfg;
    cfg.epochs = 30;
    cfg.v_dim = 8;
    cfg.single_logit = true;
    VerifierTrainResult r = train_verifier_on_features(hs, ys, cfg, 6);
    REQUIRE(r.params.single_logit());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        double q = quality_score_from_repr(hs[i], r.params);
        CHECK(q > 0.0);
        CHECK(q < 1.0);
        correct += (q >= 0.5) == (ys[i] == 1);
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(hs.size()) >= 0.9);
}

TEST_CASE("single-class datasets warn but still train") {
    std::vector<Vector> hs{{1.0, 0.0}, {0.5, 0.5}};
    std::vector<int> ys{1, 1};
    VerifierTrainConfig cfg;
    cfg.epochs = 2;
    cfg.v_dim = 4;
    CHECK_NOTHROW(train_verifier_on_features(hs, ys, cfg, 1));
}

TEST_CASE("prediction module is bitwise frozen during verifier training") {
    SmallFixture fx = make_fixture(31);
    PredictionParams before = fx.f;
    std::vector<VerificationSample> vset =
        build_verification_dataset(fx.pairs, {}, fx.f, fx.emb, 32, 1);
    VerifierTrainConfig cfg;
    cfg.epochs = 3;
    cfg.v_dim = 8;
    train_verifier(vset, fx.f, fx.emb, cfg, 2);
    CHECK(fx.f == before);
}

TEST_CASE("validation pairs contribute more negatives once f overfits") {
    // Train f hard on the training pairs only, then compare negative-label
    // fractions between train-derived and validation-derived subsets.
    int majority = 0;
    for (std::uint64_t seed : {101ull, 202ull, 303ull}) {
        SynthConfig cfg;
        cfg.num_tables = 60;
        cfg.cols_min = 5;
        cfg.cols_max = 6;
        cfg.num_classes = 2;
        cfg.rows = 6;
        cfg.noise = 0.25;
        Dataset d = generate_synthetic(cfg, seed);
        EmbedderConfig ecfg;
        ecfg.dim = 32;
        HashingEmbedder embedder(ecfg);
        CorpusEmbeddings emb = embed_corpus(*d.tables, embedder);
        SplitResult split = split_dataset(d, 0.6, 0.3, 0.1, seed);
        std::vector<PairSample> train_pairs = build_pair_dataset(split.train, emb, 3, 0.5);
        std::vector<PairSample> valid_pairs = build_pair_dataset(split.valid, emb, 3, 0.5);

        PredictionTrainConfig pc;
        pc.epochs = 60;
        pc.batch_size = 8;
        pc.lr = 3e-3;
        pc.hidden_dim = 24;
        pc.repr_dim = 12;
        PredictionParams f =
            train_prediction(train_pairs, {}, emb, TaskKind::CTA, 2, pc, seed).params;

        auto neg_fraction = [&](const std::vector<PairSample>& pairs) {
            std::vector<VerificationSample> vs =
                build_verification_dataset(pairs, {}, f, emb, 16, seed);
            std::size_t neg = 0;
            for (const VerificationSample& s : vs) neg += s.label == 0;
            return static_cast<double>(neg) / static_cast<double>(vs.size());
        };
        if (neg_fraction(valid_pairs) > neg_fraction(train_pairs)) ++majority;
    }
    CHECK(majority >= 2);
}
