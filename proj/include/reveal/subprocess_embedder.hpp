#pragma once

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "reveal/embed.hpp"

namespace reveal {

// Drives an external embedding process over newline-delimited JSON:
// request {"id":int,"text":str} on its stdin, response {"id":int,"vec":[...]}
// on its stdout. Responses are L2-normalized here. The child is spawned via
// /bin/sh -c so the command may contain arguments.
class SubprocessEmbedder final : public ColumnEmbedder {
public:
    SubprocessEmbedder(std::string command, std::size_t dim, EmbedderConfig serialize_cfg = {})
        : dim_(dim), cfg_(serialize_cfg) {
        int to_child[2], from_child[2];
        if (pipe(to_child) != 0 || pipe(from_child) != 0)
            throw ConfigError("embedder subprocess: pipe() failed");
        pid_ = fork();
        if (pid_ < 0) throw ConfigError("embedder subprocess: fork() failed");
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        in_ = fdopen(from_child[0], "r");
        out_ = fdopen(to_child[1], "w");
        if (!in_ || !out_) throw ConfigError("embedder subprocess: fdopen() failed");
    }

    SubprocessEmbedder(const SubprocessEmbedder&) = delete;
    SubprocessEmbedder& operator=(const SubprocessEmbedder&) = delete;

    ~SubprocessEmbedder() override {
        if (out_) fclose(out_);
        if (in_) fclose(in_);
        if (pid_ > 0) {
            int status = 0;
            waitpid(pid_, &status, 0);
        }
    }

    std::size_t dim() const override { return dim_; }

    Embedding embed(const Column& c) const override {
        std::string text = serialize_column(c, cfg_);
        if (text.empty()) return Embedding(dim_, 0.0);

        nlohmann::json req{{"id", next_id_}, {"text", text}};
        std::string line = req.dump();
        line += '\n';
        if (std::fwrite(line.data(), 1, line.size(), out_) != line.size() || std::fflush(out_) != 0)
            throw DataError("embedder subprocess: write failed");

        std::string resp_line;
        int ch;
        while ((ch = std::fgetc(in_)) != EOF && ch != '\n') resp_line.push_back(static_cast<char>(ch));
        if (resp_line.empty()) throw DataError("embedder subprocess: no response");
        nlohmann::json resp = nlohmann::json::parse(resp_line);
        if (resp.at("id").get<long long>() != next_id_)
            throw DataError("embedder subprocess: response id mismatch");
        ++next_id_;

        auto vec = resp.at("vec").get<std::vector<double>>();
        if (vec.size() != dim_)
            throw DataError("embedder subprocess: expected dim " + std::to_string(dim_) + ", got " +
                            std::to_string(vec.size()));
        double norm2 = 0.0;
        for (double x : vec) norm2 += x * x;
        if (norm2 > 0.0) {
            double inv = 1.0 / std::sqrt(norm2);
            for (double& x : vec) x *= inv;
        }
        return vec;
    }

private:
    std::size_t dim_;
    EmbedderConfig cfg_;
    pid_t pid_ = -1;
    FILE* in_ = nullptr;
    FILE* out_ = nullptr;
    mutable long long next_id_ = 0;
};

}  // namespace reveal
