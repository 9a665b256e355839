#pragma once

#include <cstdint>
#include <string>

#include "reveal/embed.hpp"
#include "reveal/infer.hpp"
#include "reveal/retrieve.hpp"
#include "reveal/tabledata.hpp"

namespace reveal {

// How REVEAL+ turns the retrieved context into a final prediction. The
// search strategies consult the trained verifier; the aggregate ones only
// use the prediction module's softmax outputs.
enum class VerifyStrategy {
    TopDown,
    Exhaustive,
    BottomUp,
    MaxConfidence,
    MajorityVoting,
    WeightedVoting,
    RandomSubset,
};

inline bool uses_verifier(VerifyStrategy s) {
    return s == VerifyStrategy::TopDown || s == VerifyStrategy::Exhaustive ||
           s == VerifyStrategy::BottomUp;
}

inline std::string to_string(VerifyStrategy s) {
    switch (s) {
        case VerifyStrategy::TopDown: return "topdown";
        case VerifyStrategy::Exhaustive: return "exhaustive";
        case VerifyStrategy::BottomUp: return "bottomup";
        case VerifyStrategy::MaxConfidence: return "max-confidence";
        case VerifyStrategy::MajorityVoting: return "majority-voting";
        case VerifyStrategy::WeightedVoting: return "weighted-voting";
        case VerifyStrategy::RandomSubset: return "random-subset";
    }
    return "?";
}

inline VerifyStrategy verify_strategy_from_string(const std::string& s) {
    if (s == "topdown") return VerifyStrategy::TopDown;
    if (s == "exhaustive") return VerifyStrategy::Exhaustive;
    if (s == "bottomup") return VerifyStrategy::BottomUp;
    if (s == "max-confidence") return VerifyStrategy::MaxConfidence;
    if (s == "majority-voting") return VerifyStrategy::MajorityVoting;
    if (s == "weighted-voting") return VerifyStrategy::WeightedVoting;
    if (s == "random-subset") return VerifyStrategy::RandomSubset;
    throw ConfigError("unknown verification strategy '" + s + "'");
}

struct RunConfig {
    TaskKind task = TaskKind::CTA;
    Mode mode = Mode::RevealPlus;
    std::size_t k = 8;
    double lambda = 0.5;
    std::uint64_t seed = 0;
    std::size_t epochs = 30;
    double lr = 1e-3;
    std::size_t batch_size = 64;
    RetrievalStrategy strategy = RetrievalStrategy::MMR;
    VerifyStrategy verify_strategy = VerifyStrategy::TopDown;
    std::size_t subset_cap = 256;

    // Verifier-specific overrides; 0 inherits the prediction settings.
    std::size_t verifier_epochs = 0;
    double verifier_lr = 0.0;
    std::size_t verifier_batch_size = 0;

    EmbedderConfig embedder;
    std::size_t hidden_dim = 256;
    std::size_t repr_dim = 128;
    std::size_t v_dim = 128;

    std::string data_path;
    std::string labels_path;   // optional external label file
    std::string out_path;      // checkpoint / predictions / report destination
    std::string checkpoint_path;

    void validate() const {
        if (k < 1) throw ConfigError("K must be >= 1");
        if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must be in [0, 1]");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch size must be >= 1");
        if (subset_cap < 2) throw ConfigError("subset cap must be >= 2");
        embedder.validate();
    }
};

}  // namespace reveal
