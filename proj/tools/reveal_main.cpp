// Command-line driver: train | annotate | evaluate | retrieve |
// gen-synthetic | gradcheck. Exit codes: 0 success, 1 usage/config error,
// 2 data error, 3 check failure. Environment variables are never consulted.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "reveal/reveal.hpp"

namespace {

void add_common_flags(CLI::App* cmd, reveal::RunConfig& cfg, std::string& task,
                      std::string& mode, std::string& strategy, std::string& verify_strategy) {
    cmd->add_option("--task", task, "annotation task: cta | cpa");
    cmd->add_option("--mode", mode, "reveal | reveal-plus");
    cmd->add_option("--k", cfg.k, "retrieved context size K");
    cmd->add_option("--lambda", cfg.lambda, "relevance/diversity weight in [0,1]");
    cmd->add_option("--seed", cfg.seed, "random seed");
    cmd->add_option("--epochs", cfg.epochs, "training epochs");
    cmd->add_option("--lr", cfg.lr, "learning rate");
    cmd->add_option("--batch-size", cfg.batch_size, "mini-batch size");
    cmd->add_option("--strategy", strategy,
                    "retrieval strategy: mmr | random | first | nearby | similar | position");
    cmd->add_option("--verify-strategy", verify_strategy,
                    "topdown | exhaustive | bottomup | max-confidence | majority-voting | "
                    "weighted-voting | random-subset");
    cmd->add_option("--subset-cap", cfg.subset_cap, "max verification subsets per target");
    cmd->add_option("--verifier-epochs", cfg.verifier_epochs,
                    "verifier training epochs (0 = same as --epochs)");
    cmd->add_option("--verifier-lr", cfg.verifier_lr, "verifier learning rate (0 = same as --lr)");
    cmd->add_option("--verifier-batch-size", cfg.verifier_batch_size,
                    "verifier mini-batch size (0 = same as --batch-size)");
    cmd->add_option("--data", cfg.data_path, "dataset JSONL path");
    cmd->add_option("--labels", cfg.labels_path, "external label file (overrides header labels)");
    cmd->add_option("--out", cfg.out_path, "output path");
}

void apply_strings(reveal::RunConfig& cfg, const std::string& task, const std::string& mode,
                   const std::string& strategy, const std::string& verify_strategy) {
    try {
        cfg.task = reveal::task_from_string(task);
        cfg.mode = reveal::mode_from_string(mode);
        cfg.strategy = reveal::retrieval_strategy_from_string(strategy);
        cfg.verify_strategy = reveal::verify_strategy_from_string(verify_strategy);
    } catch (const std::exception& e) {
        // Bad flag values are usage errors, not data errors.
        throw reveal::ConfigError(e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reveal: retrieve-and-verify column annotation"};
    app.require_subcommand(1);

    reveal::RunConfig cfg;
    std::string task = "cta", mode = "reveal-plus", strategy = "mmr", verify_strategy = "topdown";
    std::string checkpoint_path, report_path;

    CLI::App* train = app.add_subcommand("train", "run the training procedure, write a checkpoint");
    add_common_flags(train, cfg, task, mode, strategy, verify_strategy);

    CLI::App* annotate = app.add_subcommand("annotate", "predict labels for every target");
    add_common_flags(annotate, cfg, task, mode, strategy, verify_strategy);
    annotate->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();

    CLI::App* evaluate = app.add_subcommand("evaluate", "score predictions against ground truth");
    add_common_flags(evaluate, cfg, task, mode, strategy, verify_strategy);
    evaluate->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    evaluate->add_option("--report", report_path, "where to write the JSON report");

    CLI::App* retrieve = app.add_subcommand("retrieve", "emit retrieved contexts as JSONL");
    add_common_flags(retrieve, cfg, task, mode, strategy, verify_strategy);

    CLI::App* gen = app.add_subcommand("gen-synthetic", "generate a synthetic corpus");
    reveal::SynthConfig synth;
    add_common_flags(gen, cfg, task, mode, strategy, verify_strategy);
    gen->add_option("--tables", synth.num_tables, "number of tables");
    gen->add_option("--cols-min", synth.cols_min, "min columns per table");
    gen->add_option("--cols-max", synth.cols_max, "max columns per table");
    gen->add_option("--classes", synth.num_classes, "number of classes");
    gen->add_option("--rows", synth.rows, "rows per column");
    gen->add_option("--noise", synth.noise, "misleading-distractor probability");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    gradcheck->add_option("--seed", cfg.seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*gradcheck) {
            reveal::GradCheckReport r = reveal::cmd_gradcheck(cfg.seed);
            std::cout << "prediction loss max relative error: " << r.prediction_max_rel << "\n";
            std::cout << "verifier loss   max relative error: " << r.verifier_max_rel << "\n";
            std::cout << (r.passed() ? "PASS" : "FAIL") << " (tolerance " << r.tolerance << ")\n";
            return r.passed() ? 0 : 3;
        }

        apply_strings(cfg, task, mode, strategy, verify_strategy);

        if (*train) {
            reveal::cmd_train(cfg);
        } else if (*annotate) {
            if (cfg.data_path.empty() || cfg.out_path.empty())
                throw reveal::ConfigError("annotate: --data and --out are required");
            reveal::Checkpoint ckpt = reveal::load_checkpoint(checkpoint_path);
            // Checkpoint config drives inference; explicit flags override.
            reveal::RunConfig run = ckpt.config;
            run.seed = cfg.seed;
            run.out_path = cfg.out_path;
            for (CLI::App* c : {annotate}) {
                if (c->count("--mode")) run.mode = cfg.mode;
                if (c->count("--k")) run.k = cfg.k;
                if (c->count("--lambda")) run.lambda = cfg.lambda;
                if (c->count("--strategy")) run.strategy = cfg.strategy;
                if (c->count("--verify-strategy")) run.verify_strategy = cfg.verify_strategy;
                if (c->count("--subset-cap")) run.subset_cap = cfg.subset_cap;
            }
            reveal::Dataset data = reveal::load_dataset(cfg.data_path, ckpt.config.task);
            std::ofstream out(cfg.out_path, std::ios::binary);
            if (!out) throw reveal::DataError("cannot write predictions: " + cfg.out_path);
            reveal::cmd_annotate(run, ckpt, data, out);
            std::cout << "predictions written to " << cfg.out_path << "\n";
        } else if (*evaluate) {
            if (cfg.data_path.empty())
                throw reveal::ConfigError("evaluate: --data is required");
            reveal::Checkpoint ckpt = reveal::load_checkpoint(checkpoint_path);
            reveal::RunConfig run = ckpt.config;
            run.seed = cfg.seed;
            if (evaluate->count("--mode")) run.mode = cfg.mode;
            if (evaluate->count("--k")) run.k = cfg.k;
            if (evaluate->count("--lambda")) run.lambda = cfg.lambda;
            if (evaluate->count("--strategy")) run.strategy = cfg.strategy;
            if (evaluate->count("--verify-strategy")) run.verify_strategy = cfg.verify_strategy;
            if (evaluate->count("--subset-cap")) run.subset_cap = cfg.subset_cap;
            reveal::Dataset data = reveal::load_dataset(cfg.data_path, ckpt.config.task);
            reveal::EvalReport r = reveal::evaluate_dataset(run, ckpt, data);
            if (!report_path.empty()) {
                std::ofstream out(report_path, std::ios::binary);
                if (!out) throw reveal::DataError("cannot write report: " + report_path);
                out << reveal::eval_report_to_json(r).dump(2) << "\n";
            }
            reveal::print_eval_report(r, std::cout);
        } else if (*retrieve) {
            if (cfg.data_path.empty() || cfg.out_path.empty())
                throw reveal::ConfigError("retrieve: --data and --out are required");
            std::optional<std::string> labels;
            if (!cfg.labels_path.empty()) labels = cfg.labels_path;
            reveal::Dataset data = reveal::load_dataset(cfg.data_path, cfg.task, labels);
            std::ofstream out(cfg.out_path, std::ios::binary);
            if (!out) throw reveal::DataError("cannot write contexts: " + cfg.out_path);
            reveal::cmd_retrieve(cfg, data, out);
        } else if (*gen) {
            if (cfg.out_path.empty()) throw reveal::ConfigError("gen-synthetic: --out is required");
            reveal::Dataset data = reveal::generate_synthetic(synth, cfg.seed);
            reveal::save_dataset(data, cfg.out_path);
            std::cout << "wrote " << data.num_tables() << " tables, " << data.targets.size()
                      << " targets to " << cfg.out_path << "\n";
        }
    } catch (const reveal::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const reveal::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
