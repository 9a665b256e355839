#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "reveal/common.hpp"

namespace reveal {

enum class TaskKind { CTA, CPA };

inline std::string to_string(TaskKind t) { return t == TaskKind::CTA ? "cta" : "cpa"; }

inline TaskKind task_from_string(const std::string& s) {
    if (s == "cta") return TaskKind::CTA;
    if (s == "cpa") return TaskKind::CPA;
    throw DataError("unknown task '" + s + "' (expected 'cta' or 'cpa')");
}

// One column: raw cell strings, no type coercion.
struct Column {
    std::vector<std::string> cells;
    bool operator==(const Column&) const = default;
};

struct Table {
    std::string table_id;
    std::vector<Column> columns;
    bool operator==(const Table&) const = default;
};

// Annotation target: one column index for CTA, an ordered pair for CPA.
struct Target {
    TaskKind kind = TaskKind::CTA;
    std::vector<std::size_t> indices;  // size 1 (CTA) or 2 (CPA)

    bool operator==(const Target&) const = default;

    bool contains(std::size_t col) const {
        return std::find(indices.begin(), indices.end(), col) != indices.end();
    }

    void validate(std::size_t n_columns) const {
        std::size_t want = kind == TaskKind::CTA ? 1 : 2;
        if (indices.size() != want)
            throw DataError("target has " + std::to_string(indices.size()) +
                            " indices, expected " + std::to_string(want));
        for (std::size_t i : indices)
            if (i >= n_columns)
                throw DataError("target column index " + std::to_string(i) +
                                " out of range for table with " + std::to_string(n_columns) +
                                " columns");
        if (kind == TaskKind::CPA && indices[0] == indices[1])
            throw DataError("CPA indices distinct: got (" + std::to_string(indices[0]) + ", " +
                            std::to_string(indices[1]) + ")");
    }
};

struct LabeledTarget {
    Target target;
    std::size_t label_id = 0;
    bool operator==(const LabeledTarget&) const = default;
};

// A labeled target bound to the table it lives in.
struct TargetRef {
    std::size_t table_index = 0;
    LabeledTarget labeled;
    bool operator==(const TargetRef&) const = default;
};

// Immutable after load. Splits share `tables` by reference.
struct Dataset {
    TaskKind task = TaskKind::CTA;
    std::shared_ptr<const std::vector<Table>> tables;
    std::vector<TargetRef> targets;
    std::vector<std::string> label_vocab;

    const Table& table_of(const TargetRef& ref) const { return (*tables)[ref.table_index]; }
    std::size_t num_tables() const { return tables ? tables->size() : 0; }

    bool operator==(const Dataset& o) const {
        if (task != o.task || targets != o.targets || label_vocab != o.label_vocab) return false;
        if (tables == o.tables) return true;
        if (!tables || !o.tables) return false;
        return *tables == *o.tables;
    }
};

struct DatasetStats {
    std::size_t num_tables = 0;
    std::size_t num_targets = 0;
    std::size_t min_columns = 0;
    std::size_t max_columns = 0;
    double avg_columns = 0.0;
};

inline DatasetStats dataset_stats(const Dataset& d) {
    DatasetStats s;
    s.num_tables = d.num_tables();
    s.num_targets = d.targets.size();
    std::size_t total = 0;
    bool first = true;
    for (const Table& t : *d.tables) {
        std::size_t n = t.columns.size();
        s.min_columns = first ? n : std::min(s.min_columns, n);
        s.max_columns = std::max(s.max_columns, n);
        total += n;
        first = false;
    }
    if (s.num_tables) s.avg_columns = static_cast<double>(total) / static_cast<double>(s.num_tables);
    return s;
}

namespace detail {

inline nlohmann::json parse_line(const std::string& line, std::size_t line_no) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
        throw DataError("line " + std::to_string(line_no) + ": malformed JSON");
    return j;
}

inline std::vector<std::string> read_label_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open label file: " + path);
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) labels.push_back(line);
    }
    return labels;
}

inline std::string dir_of(const std::string& path) {
    auto pos = path.find_last_of('/');
    return pos == std::string::npos ? std::string(".") : path.substr(0, pos);
}

}  // namespace detail

// Loads the JSONL dataset format. The header's "labels" entry is either the
// inline vocabulary array or a path (relative to the dataset file) of a
// newline-delimited label file; `labels_override` replaces both.
inline Dataset load_dataset(const std::string& path, TaskKind task,
                            const std::optional<std::string>& labels_override = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file: " + path);

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw DataError("dataset file is empty: " + path);
    ++line_no;

    nlohmann::json header = detail::parse_line(line, line_no);
    if (!header.is_object() || !header.contains("task"))
        throw DataError("line 1: header object with \"task\" expected");
    if (header.value("version", 0) != 1)
        throw DataError("line 1: unsupported dataset version");
    TaskKind file_task = task_from_string(header.at("task").get<std::string>());
    if (file_task != task)
        throw DataError("dataset task '" + to_string(file_task) + "' does not match requested '" +
                        to_string(task) + "'");

    Dataset d;
    d.task = task;
    if (labels_override) {
        d.label_vocab = detail::read_label_file(*labels_override);
    } else if (header.contains("labels") && header["labels"].is_array()) {
        d.label_vocab = header["labels"].get<std::vector<std::string>>();
    } else if (header.contains("labels") && header["labels"].is_string()) {
        d.label_vocab =
            detail::read_label_file(detail::dir_of(path) + "/" + header["labels"].get<std::string>());
    } else {
        throw DataError("line 1: header lacks a usable \"labels\" entry");
    }
    std::unordered_map<std::string, std::size_t> label_id;
    for (std::size_t i = 0; i < d.label_vocab.size(); ++i) {
        if (!label_id.emplace(d.label_vocab[i], i).second)
            throw DataError("duplicate label in vocabulary: " + d.label_vocab[i]);
    }

    auto tables = std::make_shared<std::vector<Table>>();
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = detail::parse_line(line, line_no);
        try {
            Table t;
            t.table_id = j.at("table_id").get<std::string>();
            for (const auto& cj : j.at("columns")) {
                Column c;
                c.cells = cj.at("cells").get<std::vector<std::string>>();
                t.columns.push_back(std::move(c));
            }
            if (t.columns.empty()) throw DataError("table has no columns");
            std::size_t table_index = tables->size();
            if (j.contains("targets")) {
                for (const auto& tj : j.at("targets")) {
                    Target tgt;
                    tgt.kind = task_from_string(tj.at("kind").get<std::string>());
                    if (tgt.kind != task) throw DataError("target kind does not match dataset task");
                    if (tgt.kind == TaskKind::CTA) {
                        tgt.indices = {tj.at("col").get<std::size_t>()};
                    } else {
                        tgt.indices = tj.at("cols").get<std::vector<std::size_t>>();
                    }
                    tgt.validate(t.columns.size());
                    std::string label = tj.at("label").get<std::string>();
                    auto it = label_id.find(label);
                    if (it == label_id.end()) throw DataError("unknown label '" + label + "'");
                    d.targets.push_back({table_index, {tgt, it->second}});
                }
            }
            tables->push_back(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    d.tables = std::move(tables);
    return d;
}

// Writes the same JSONL format load_dataset reads. Targets are emitted
// grouped by table, preserving their relative order.
inline void serialize_dataset(const Dataset& d, std::ostream& out) {
    nlohmann::ordered_json header;
    header["version"] = 1;
    header["task"] = to_string(d.task);
    header["labels"] = d.label_vocab;
    out << header.dump() << "\n";

    for (std::size_t ti = 0; ti < d.num_tables(); ++ti) {
        const Table& t = (*d.tables)[ti];
        nlohmann::ordered_json j;
        j["table_id"] = t.table_id;
        auto cols = nlohmann::ordered_json::array();
        for (const Column& c : t.columns) cols.push_back({{"cells", c.cells}});
        j["columns"] = std::move(cols);
        auto targets = nlohmann::ordered_json::array();
        for (const TargetRef& ref : d.targets) {
            if (ref.table_index != ti) continue;
            nlohmann::ordered_json tj;
            tj["kind"] = to_string(ref.labeled.target.kind);
            if (ref.labeled.target.kind == TaskKind::CTA)
                tj["col"] = ref.labeled.target.indices[0];
            else
                tj["cols"] = ref.labeled.target.indices;
            tj["label"] = d.label_vocab.at(ref.labeled.label_id);
            targets.push_back(std::move(tj));
        }
        j["targets"] = std::move(targets);
        out << j.dump() << "\n";
    }
}

inline void save_dataset(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset file: " + path);
    serialize_dataset(d, out);
}

struct SplitResult {
    Dataset train, valid, test;
};

// Partitions labeled targets into train/valid/test. Sizes are
// floor(ratio * N) with the remainder going to train; membership is decided
// by a seeded shuffle, but each split keeps the original target order.
inline SplitResult split_dataset(const Dataset& d, double train_ratio, double valid_ratio,
                                 double test_ratio, std::uint64_t seed) {
    if (train_ratio <= 0 || valid_ratio <= 0 || test_ratio <= 0)
        throw ConfigError("split ratios must be positive");
    if (std::abs(train_ratio + valid_ratio + test_ratio - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1");

    std::size_t n = d.targets.size();
    auto n_valid = static_cast<std::size_t>(valid_ratio * static_cast<double>(n));
    auto n_test = static_cast<std::size_t>(test_ratio * static_cast<double>(n));
    std::size_t n_train = n - n_valid - n_test;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    // 0 = train, 1 = valid, 2 = test
    std::vector<int> bucket(n, 0);
    for (std::size_t i = n_train; i < n_train + n_valid; ++i) bucket[order[i]] = 1;
    for (std::size_t i = n_train + n_valid; i < n; ++i) bucket[order[i]] = 2;

    SplitResult r;
    for (Dataset* part : {&r.train, &r.valid, &r.test}) {
        part->task = d.task;
        part->tables = d.tables;
        part->label_vocab = d.label_vocab;
    }
    for (std::size_t i = 0; i < n; ++i) {
        Dataset& part = bucket[i] == 0 ? r.train : bucket[i] == 1 ? r.valid : r.test;
        part.targets.push_back(d.targets[i]);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Synthetic corpus generator.
//
// Each table has one CTA target whose own cells only narrow the label down
// to a two-class pair (both classes of a pair draw target values from the
// same numeric range), one signal column whose word vocabulary uniquely
// identifies the class, and distractors. A distractor is either a numeric
// column from a shared class-independent range or, with probability
// `noise`, a column drawn from the signal vocabulary of a uniformly random
// class -- usually the wrong one, which is what makes wide noisy tables
// hard.

struct SynthConfig {
    std::size_t num_tables = 100;
    std::size_t cols_min = 8;
    std::size_t cols_max = 8;
    std::size_t num_classes = 2;
    std::size_t rows = 8;
    double noise = 0.0;
};

struct SynthTableInfo {
    std::size_t target_col = 0;
    std::size_t signal_col = 0;
    std::size_t label_id = 0;
    std::vector<std::size_t> misleading_cols;  // distractors drawn from some class vocab
};

struct SynthBlueprint {
    Dataset dataset;
    std::vector<std::vector<std::string>> class_vocab;  // per class, the signal words
    std::vector<std::vector<std::string>> target_pool;  // per class pair, the target values
    std::vector<std::string> noise_pool;                // value pool of misleading columns
    std::vector<SynthTableInfo> info;                   // per table
};

namespace detail {

inline std::string random_word(Rng& rng, std::size_t len) {
    std::string w(len, 'a');
    for (auto& ch : w) ch = static_cast<char>('a' + rng.index(26));
    return w;
}

inline std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace detail

inline SynthBlueprint generate_synthetic_blueprint(const SynthConfig& cfg, std::uint64_t seed) {
    if (cfg.cols_min < 3)
        throw ConfigError("synthetic tables need at least 3 columns (target + signal + distractor)");
    if (cfg.cols_max < cfg.cols_min) throw ConfigError("cols_max must be >= cols_min");
    if (cfg.num_classes < 2) throw ConfigError("synthetic corpus needs at least 2 classes");
    if (cfg.rows == 0) throw ConfigError("rows must be positive");
    if (cfg.noise < 0.0 || cfg.noise > 1.0) throw ConfigError("noise must be in [0, 1]");

    Rng rng(seed);
    SynthBlueprint bp;
    bp.dataset.task = TaskKind::CTA;

    for (std::size_t k = 0; k < cfg.num_classes; ++k) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "type_%02zu", k);
        bp.dataset.label_vocab.emplace_back(buf);
        std::vector<std::string> vocab;
        for (int i = 0; i < 8; ++i) vocab.push_back(detail::random_word(rng, 10));
        bp.class_vocab.push_back(std::move(vocab));
    }
    // Classes 2p and 2p+1 draw target values from one shared pool, so the
    // target's own cells identify the pair but never the class.
    std::size_t num_pairs = (cfg.num_classes + 1) / 2;
    for (std::size_t pair = 0; pair < num_pairs; ++pair) {
        double lo = 100.0 * static_cast<double>(pair) + 10.0;
        double hi = 100.0 * static_cast<double>(pair) + 99.0;
        std::vector<std::string> pool;
        for (int i = 0; i < 14; ++i) pool.push_back(detail::format_value(rng.uniform(lo, hi)));
        bp.target_pool.push_back(std::move(pool));
    }
    // Misleading columns share one out-of-range value pool: mutually
    // redundant, unrelated to any target, and cheap for the verifier to
    // tell apart from the aligned signal column.
    for (int i = 0; i < 14; ++i)
        bp.noise_pool.push_back(detail::format_value(rng.uniform(1000.0, 9999.0)));

    auto sample = [&rng](const std::vector<std::string>& pool, std::size_t rows) {
        Column col;
        for (std::size_t r = 0; r < rows; ++r) col.cells.push_back(pool[rng.index(pool.size())]);
        return col;
    };

    auto tables = std::make_shared<std::vector<Table>>();
    for (std::size_t ti = 0; ti < cfg.num_tables; ++ti) {
        std::size_t n = cfg.cols_min + rng.index(cfg.cols_max - cfg.cols_min + 1);
        SynthTableInfo info;
        info.label_id = rng.index(cfg.num_classes);
        info.target_col = rng.index(n);
        do {
            info.signal_col = rng.index(n);
        } while (info.signal_col == info.target_col);

        Column target_cells = sample(bp.target_pool[info.label_id / 2], cfg.rows);

        // The signal column pairs a class word with the target's own cell
        // value, row by row, the way a currency column carries the amounts
        // of the price column beside it: strongly related to the target,
        // but not redundant with the other numeric columns.
        Column signal_cells;
        {
            const auto& vocab = bp.class_vocab[info.label_id];
            for (std::size_t r = 0; r < cfg.rows; ++r)
                signal_cells.cells.push_back(vocab[rng.index(vocab.size())] + " " +
                                             target_cells.cells[r]);
        }

        Table t;
        t.table_id = "synth_" + std::to_string(ti);
        for (std::size_t ci = 0; ci < n; ++ci) {
            Column col;
            if (ci == info.target_col) {
                col = target_cells;
            } else if (ci == info.signal_col) {
                col = signal_cells;
            } else if (rng.uniform() < cfg.noise) {
                // Misleading distractor: the word vocabulary of a class
                // chosen independently of the true label, over noise-pool
                // values.
                const auto& vocab = bp.class_vocab[rng.index(cfg.num_classes)];
                for (std::size_t r = 0; r < cfg.rows; ++r)
                    col.cells.push_back(vocab[rng.index(vocab.size())] + " " +
                                        bp.noise_pool[rng.index(bp.noise_pool.size())]);
                info.misleading_cols.push_back(ci);
            } else {
                // Plain distractor: the value pool of a pair chosen
                // independently of the label. Redundant with the target and
                // with each other, like the id/count columns of real tables.
                col = sample(bp.target_pool[rng.index(num_pairs)], cfg.rows);
            }
            t.columns.push_back(std::move(col));
        }
        Target tgt{TaskKind::CTA, {info.target_col}};
        bp.dataset.targets.push_back({ti, {tgt, info.label_id}});
        bp.info.push_back(std::move(info));
        tables->push_back(std::move(t));
    }
    bp.dataset.tables = std::move(tables);
    return bp;
}

inline Dataset generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
    return generate_synthetic_blueprint(cfg, seed).dataset;
}

}  // namespace reveal
