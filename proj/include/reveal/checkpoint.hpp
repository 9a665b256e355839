#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reveal/config.hpp"
#include "reveal/encode.hpp"
#include "reveal/verify.hpp"

namespace reveal {

// One JSON document holding the prediction module, the verifier when
// trained, the run configuration and the label vocabulary. Doubles are
// written as shortest round-trip decimals and keys keep a fixed order, so
// save -> load -> save is byte-identical.
struct Checkpoint {
    RunConfig config;
    std::vector<std::string> labels;
    PredictionParams prediction;
    std::optional<VerifierParams> verifier;
};

namespace detail {

using OJson = nlohmann::ordered_json;

inline void put_array(OJson& arrays, OJson& shapes, const std::string& name, const Vector& v,
                      std::vector<std::size_t> shape) {
    arrays[name] = v;
    shapes[name] = shape;
}

inline void put_dense(OJson& arrays, OJson& shapes, const std::string& name,
                      const DenseParams& d) {
    put_array(arrays, shapes, name + ".weight", d.weight, {d.out, d.in});
    put_array(arrays, shapes, name + ".bias", d.bias, {d.out});
}

inline Vector get_array(const OJson& arrays, const std::string& name) {
    if (!arrays.contains(name)) throw DataError("checkpoint missing array '" + name + "'");
    return arrays.at(name).get<Vector>();
}

inline DenseParams get_dense(const OJson& arrays, const OJson& shapes, const std::string& name) {
    auto shape = shapes.at(name + ".weight").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw DataError("checkpoint array '" + name + "' is not a matrix");
    DenseParams d(shape[1], shape[0]);
    d.weight = get_array(arrays, name + ".weight");
    d.bias = get_array(arrays, name + ".bias");
    if (d.weight.size() != d.in * d.out || d.bias.size() != d.out)
        throw DataError("checkpoint array '" + name + "' has inconsistent shape");
    return d;
}

}  // namespace detail

inline nlohmann::ordered_json checkpoint_to_json(const Checkpoint& ckpt) {
    using detail::OJson;
    const RunConfig& c = ckpt.config;
    OJson j;
    j["version"] = 1;
    j["task"] = to_string(c.task);
    j["mode"] = to_string(c.mode);
    OJson cfg;
    cfg["k"] = c.k;
    cfg["lambda"] = c.lambda;
    cfg["seed"] = c.seed;
    cfg["epochs"] = c.epochs;
    cfg["lr"] = c.lr;
    cfg["batch_size"] = c.batch_size;
    cfg["strategy"] = to_string(c.strategy);
    cfg["verify_strategy"] = to_string(c.verify_strategy);
    cfg["subset_cap"] = c.subset_cap;
    cfg["verifier_epochs"] = c.verifier_epochs;
    cfg["verifier_lr"] = c.verifier_lr;
    cfg["verifier_batch_size"] = c.verifier_batch_size;
    cfg["embedder"] = {{"dim", c.embedder.dim},
                       {"ngram", c.embedder.ngram},
                       {"max_rows", c.embedder.max_rows},
                       {"char_budget", c.embedder.char_budget},
                       {"lowercase", c.embedder.lowercase}};
    cfg["hidden_dim"] = c.hidden_dim;
    cfg["repr_dim"] = c.repr_dim;
    cfg["v_dim"] = c.v_dim;
    j["config"] = std::move(cfg);
    j["labels"] = ckpt.labels;

    OJson arrays = OJson::object();
    OJson shapes = OJson::object();
    const PredictionParams& p = ckpt.prediction;
    detail::put_array(arrays, shapes, "role.r0", p.role.r0, {p.embed_dim});
    detail::put_array(arrays, shapes, "role.r1", p.role.r1, {p.embed_dim});
    detail::put_dense(arrays, shapes, "encoder.0", p.encoder[0]);
    detail::put_dense(arrays, shapes, "encoder.1", p.encoder[1]);
    detail::put_dense(arrays, shapes, "classifier", p.classifier);
    if (ckpt.verifier) {
        for (std::size_t l = 0; l < ckpt.verifier->layers.size(); ++l)
            detail::put_dense(arrays, shapes, "verifier." + std::to_string(l),
                              ckpt.verifier->layers[l]);
    }
    j["arrays"] = std::move(arrays);
    j["shapes"] = std::move(shapes);
    return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::ordered_json& j) try {
    Checkpoint ckpt;
    if (j.value("version", 0) != 1) throw DataError("unsupported checkpoint version");
    RunConfig& c = ckpt.config;
    c.task = task_from_string(j.at("task").get<std::string>());
    c.mode = mode_from_string(j.at("mode").get<std::string>());
    const auto& cfg = j.at("config");
    c.k = cfg.at("k").get<std::size_t>();
    c.lambda = cfg.at("lambda").get<double>();
    c.seed = cfg.at("seed").get<std::uint64_t>();
    c.epochs = cfg.at("epochs").get<std::size_t>();
    c.lr = cfg.at("lr").get<double>();
    c.batch_size = cfg.at("batch_size").get<std::size_t>();
    c.strategy = retrieval_strategy_from_string(cfg.at("strategy").get<std::string>());
    c.verify_strategy = verify_strategy_from_string(cfg.at("verify_strategy").get<std::string>());
    c.subset_cap = cfg.at("subset_cap").get<std::size_t>();
    c.verifier_epochs = cfg.at("verifier_epochs").get<std::size_t>();
    c.verifier_lr = cfg.at("verifier_lr").get<double>();
    c.verifier_batch_size = cfg.at("verifier_batch_size").get<std::size_t>();
    const auto& e = cfg.at("embedder");
    c.embedder.dim = e.at("dim").get<std::size_t>();
    c.embedder.ngram = e.at("ngram").get<std::size_t>();
    c.embedder.max_rows = e.at("max_rows").get<std::size_t>();
    c.embedder.char_budget = e.at("char_budget").get<std::size_t>();
    c.embedder.lowercase = e.at("lowercase").get<bool>();
    c.hidden_dim = cfg.at("hidden_dim").get<std::size_t>();
    c.repr_dim = cfg.at("repr_dim").get<std::size_t>();
    c.v_dim = cfg.at("v_dim").get<std::size_t>();

    ckpt.labels = j.at("labels").get<std::vector<std::string>>();

    const auto& arrays = j.at("arrays");
    const auto& shapes = j.at("shapes");
    PredictionParams& p = ckpt.prediction;
    p.task = c.task;
    p.num_classes = ckpt.labels.size();
    p.role.r0 = detail::get_array(arrays, "role.r0");
    p.role.r1 = detail::get_array(arrays, "role.r1");
    p.embed_dim = p.role.r0.size();
    p.encoder[0] = detail::get_dense(arrays, shapes, "encoder.0");
    p.encoder[1] = detail::get_dense(arrays, shapes, "encoder.1");
    p.classifier = detail::get_dense(arrays, shapes, "classifier");
    if (p.encoder[0].in != p.input_dim() || p.classifier.out != p.num_classes)
        throw DataError("checkpoint parameter shapes are inconsistent");

    if (arrays.contains("verifier.0.weight")) {
        VerifierParams v;
        for (std::size_t l = 0; l < v.layers.size(); ++l)
            v.layers[l] = detail::get_dense(arrays, shapes, "verifier." + std::to_string(l));
        ckpt.verifier = std::move(v);
    }
    return ckpt;
} catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << checkpoint_to_json(ckpt).dump(2) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("checkpoint is not valid JSON: " + path);
    return checkpoint_from_json(j);
}

}  // namespace reveal
