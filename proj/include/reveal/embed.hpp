#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "reveal/common.hpp"
#include "reveal/tabledata.hpp"

namespace reveal {

// Unit-norm column embedding; the all-zero vector stands for an entirely
// empty column.
using Embedding = std::vector<double>;

struct EmbedderConfig {
    std::size_t dim = 256;
    std::size_t ngram = 3;
    std::size_t max_rows = 20;
    std::size_t char_budget = 512;
    bool lowercase = true;

    void validate() const {
        if (dim < 8) throw ConfigError("embedding dim must be >= 8");
        if (ngram < 1) throw ConfigError("ngram must be >= 1");
        if (max_rows < 1) throw ConfigError("max_rows must be >= 1");
        if (char_budget < 1) throw ConfigError("char_budget must be >= 1");
    }
};

namespace detail {

// Steps back from `pos` to the nearest UTF-8 code point boundary.
inline std::size_t utf8_boundary(std::string_view s, std::size_t pos) {
    while (pos > 0 && (static_cast<unsigned char>(s[pos]) & 0xC0) == 0x80) --pos;
    return pos;
}

}  // namespace detail

// Joins the first min(m, max_rows) cells with single spaces, lowercases
// (ASCII only), and truncates to char_budget bytes at a code point boundary.
inline std::string serialize_column(const Column& c, const EmbedderConfig& cfg) {
    std::string text;
    std::size_t rows = std::min(c.cells.size(), cfg.max_rows);
    for (std::size_t i = 0; i < rows; ++i) {
        if (i) text += ' ';
        text += c.cells[i];
    }
    if (cfg.lowercase)
        for (auto& ch : text)
            ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (text.size() > cfg.char_budget)
        text.resize(detail::utf8_boundary(text, cfg.char_budget));
    return text;
}

// Second FNV basis decides each n-gram's sign; independent of the bucket hash.
inline constexpr std::uint64_t kSignBasis = 0x9e3779b97f4a7c15ull;

// Signed character n-gram hashing: bucket = mix64(fnv1a(g)) mod dim, sign
// from an independently seeded second hash, accumulate, L2-normalize. The
// mix64 finalizer matters: raw FNV-1a low bits are far from uniform. Texts
// shorter than n contribute themselves as a single gram so any nonempty
// text gets a nonzero chance. Pure and platform-independent.
inline Embedding embed_column(std::string_view text, const EmbedderConfig& cfg) {
    cfg.validate();
    Embedding v(cfg.dim, 0.0);
    auto add_gram = [&](std::string_view g) {
        std::size_t bucket = static_cast<std::size_t>(mix64(fnv1a64(g)) % cfg.dim);
        double sign = (mix64(fnv1a64(g, kSignBasis)) & 1ull) ? 1.0 : -1.0;
        v[bucket] += sign;
    };
    if (text.empty()) return v;
    if (text.size() < cfg.ngram) {
        add_gram(text);
    } else {
        for (std::size_t i = 0; i + cfg.ngram <= text.size(); ++i)
            add_gram(text.substr(i, cfg.ngram));
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 > 0.0) {
        double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v) x *= inv;
    }
    return v;
}

// dot(a,b) / (|a||b|); zero vectors compare as 0 so empty columns are never
// preferred by similarity.
inline double cosine(const Embedding& a, const Embedding& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("cosine: dimension mismatch (" + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()) + ")");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Pluggable encoder: the built-in hashing embedder is the default; an
// external embedding service can be dropped in behind the same interface.
class ColumnEmbedder {
public:
    virtual ~ColumnEmbedder() = default;
    virtual std::size_t dim() const = 0;
    virtual Embedding embed(const Column& c) const = 0;
};

class HashingEmbedder final : public ColumnEmbedder {
public:
    explicit HashingEmbedder(EmbedderConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

    std::size_t dim() const override { return cfg_.dim; }
    const EmbedderConfig& config() const { return cfg_; }

    Embedding embed(const Column& c) const override {
        return embed_column(serialize_column(c, cfg_), cfg_);
    }

private:
    EmbedderConfig cfg_;
};

// All column embeddings of one table, index-aligned with table.columns.
struct ColumnEmbeddings {
    std::vector<Embedding> cols;
};

inline ColumnEmbeddings embed_table(const Table& t, const ColumnEmbedder& embedder) {
    ColumnEmbeddings e;
    e.cols.reserve(t.columns.size());
    for (const Column& c : t.columns) e.cols.push_back(embedder.embed(c));
    return e;
}

}  // namespace reveal
