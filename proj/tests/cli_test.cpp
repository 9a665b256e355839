// Drives the installed CLI binary through a full workflow with std::system:
// gen-synthetic -> train -> annotate -> evaluate -> retrieve, plus the
// documented exit codes for bad input.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#ifndef REVEAL_CLI_PATH
#error "REVEAL_CLI_PATH must point at the reveal binary"
#endif

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
    std::printf("[%s] %s\n", ok ? "ok" : "FAIL", what.c_str());
    if (!ok) ++failures;
}

int run(const std::string& args) {
    std::string cmd = std::string(REVEAL_CLI_PATH) + " " + args + " >cli_test_stdout.txt 2>&1";
    int rc = std::system(cmd.c_str());
    return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t data_lines(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') ++n;
    return n;
}

}  // namespace

int main() {
    check(run("gen-synthetic --tables 40 --cols-min 5 --cols-max 7 --classes 2 --rows 8 "
              "--noise 0.1 --seed 5 --out cli_data.jsonl") == 0,
          "gen-synthetic succeeds");

    check(run("train --task cta --mode reveal-plus --k 4 --lambda 0.5 --seed 7 --epochs 6 "
              "--lr 0.003 --batch-size 16 --subset-cap 16 --data cli_data.jsonl "
              "--out cli_ckpt.json") == 0,
          "train succeeds");

    check(run("annotate --checkpoint cli_ckpt.json --data cli_data.jsonl --out cli_pred.jsonl") ==
              0,
          "annotate succeeds");
    check(data_lines(slurp("cli_pred.jsonl")) == 40, "one prediction line per target");

    check(run("evaluate --checkpoint cli_ckpt.json --data cli_data.jsonl "
              "--report cli_report.json") == 0,
          "evaluate succeeds");
    check(slurp("cli_report.json").find("macro_f1") != std::string::npos,
          "evaluate writes a JSON report");

    check(run("retrieve --task cta --k 3 --data cli_data.jsonl --out cli_ctx.jsonl") == 0,
          "retrieve succeeds");
    check(data_lines(slurp("cli_ctx.jsonl")) == 40, "one context line per target");

    check(run("gradcheck --seed 2") == 0, "gradcheck passes");

    // Exit code contract: 1 usage/config, 2 data.
    check(run("train --task nope --data cli_data.jsonl --out x.json") == 1,
          "unknown task exits with code 1");
    check(run("train --task cta --data missing_file.jsonl --out x.json") == 2,
          "missing dataset exits with code 2");
    check(run("annotate --checkpoint missing.json --data cli_data.jsonl --out x.jsonl") == 2,
          "missing checkpoint exits with code 2");
    check(run("gen-synthetic --tables 5 --cols-min 2 --cols-max 2 --out x.jsonl") == 1,
          "too-narrow synthetic config exits with code 1");

    for (const char* p : {"cli_data.jsonl", "cli_ckpt.json", "cli_pred.jsonl", "cli_report.json",
                          "cli_ctx.jsonl", "cli_test_stdout.txt", "x.json", "x.jsonl"})
        std::remove(p);

    if (failures) {
        std::printf("%d CLI check(s) failed\n", failures);
        return 1;
    }
    std::printf("all CLI checks passed\n");
    return 0;
}
