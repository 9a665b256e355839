#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "reveal/common.hpp"
#include "reveal/embed.hpp"

using namespace reveal;

namespace {

double norm(const Embedding& e) {
    double s = 0.0;
    for (double x : e) s += x * x;
    return std::sqrt(s);
}

std::string random_text(Rng& rng, std::size_t len) {
    std::string s(len, ' ');
    for (auto& ch : s) ch = static_cast<char>('a' + rng.index(26));
    return s;
}

}  // namespace

TEST_CASE("serialize_column joins, lowercases and truncates") {
    EmbedderConfig cfg;
    CHECK(serialize_column({{"NYC", "LDN"}}, cfg) == "nyc ldn");
    CHECK(serialize_column({{}}, cfg) == "");

    Column hundred;
    for (int i = 0; i < 100; ++i) hundred.cells.push_back("x");
    std::string s = serialize_column(hundred, cfg);
    CHECK(s.size() == 39);  // 20 tokens, 19 separators
    std::size_t tokens = 1;
    for (char c : s) tokens += c == ' ';
    CHECK(tokens == 20);

    EmbedderConfig keep = cfg;
    keep.lowercase = false;
    CHECK(serialize_column({{"NYC"}}, keep) == "NYC");

    EmbedderConfig tight = cfg;
    tight.char_budget = 5;
    CHECK(serialize_column({{"abcdefgh"}}, tight) == "abcde");
}

TEST_CASE("serialize_column truncates at a UTF-8 boundary") {
    EmbedderConfig cfg;
    cfg.char_budget = 5;
    // "abcd" + U+00E9 (2 bytes): a 5-byte budget would split the code point.
    std::string s = serialize_column({{"abcd\xc3\xa9xyz"}}, cfg);
    CHECK(s == "abcd");
}

TEST_CASE("embed_column basics") {
    EmbedderConfig cfg;
    CHECK(norm(embed_column("", cfg)) == 0.0);
    CHECK(norm(embed_column("nyc ldn", cfg)) == Catch::Approx(1.0).margin(1e-6));
    CHECK(norm(embed_column("a", cfg)) == Catch::Approx(1.0).margin(1e-6));  // shorter than ngram

    Embedding a = embed_column("same text", cfg);
    Embedding b = embed_column("same text", cfg);
    CHECK(a == b);  // bitwise
    CHECK(cosine(a, b) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("embed_column is a fixed function of (text, cfg)") {
    // Frozen regression pin so a platform or hash change cannot slip by.
    EmbedderConfig cfg;
    cfg.dim = 8;
    Embedding e = embed_column("nyc ldn", cfg);
    Embedding expect{0.44721359549995793, -0.44721359549995793, 0, -0.44721359549995793,
                     0.44721359549995793, 0.44721359549995793, 0, 0};
    REQUIRE(e.size() == expect.size());
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(e[i] == expect[i]);
}

TEST_CASE("cosine conventions") {
    Embedding ex{1.0, 0.0, 0.0};
    Embedding ey{0.0, 1.0, 0.0};
    Embedding zero{0.0, 0.0, 0.0};
    CHECK(cosine(ex, ex) == Catch::Approx(1.0));
    CHECK(cosine(ex, ey) == Catch::Approx(0.0));
    CHECK(cosine(zero, ex) == 0.0);
    CHECK_THROWS_AS(cosine(ex, Embedding{1.0}), std::invalid_argument);
}

TEST_CASE("one-edit neighbors stay closer than random strings") {
    EmbedderConfig cfg;
    Rng rng(2024);
    std::size_t wins = 0;
    const std::size_t trials = 1000;
    for (std::size_t t = 0; t < trials; ++t) {
        std::string s = random_text(rng, 20 + rng.index(20));
        std::string edited = s;
        edited[rng.index(edited.size())] = static_cast<char>('a' + rng.index(26));
        std::string unrelated = random_text(rng, 20 + rng.index(20));
        Embedding es = embed_column(s, cfg);
        if (cosine(es, embed_column(edited, cfg)) > cosine(es, embed_column(unrelated, cfg)))
            ++wins;
    }
    CHECK(wins >= 950);
}

TEST_CASE("embedder config validation") {
    EmbedderConfig cfg;
    cfg.dim = 4;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.dim = 8;
    cfg.ngram = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("HashingEmbedder embeds whole tables") {
    Table t;
    t.table_id = "t";
    t.columns = {{{"USD", "GBP"}}, {{"1.5", "2.5"}}, {{}}};
    HashingEmbedder embedder;
    ColumnEmbeddings e = embed_table(t, embedder);
    REQUIRE(e.cols.size() == 3);
    CHECK(norm(e.cols[0]) == Catch::Approx(1.0).margin(1e-6));
    CHECK(norm(e.cols[2]) == 0.0);  // empty column -> zero vector
}
