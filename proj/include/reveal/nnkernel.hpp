#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "reveal/common.hpp"

namespace reveal {

using Vector = std::vector<double>;

// Row-major out x in weight plus bias. Doubles everywhere: training runs at
// desk scale and bitwise reproducibility matters more than speed.
struct DenseParams {
    std::size_t in = 0, out = 0;
    Vector weight;  // out * in
    Vector bias;    // out

    DenseParams() = default;
    DenseParams(std::size_t in_dim, std::size_t out_dim)
        : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

    bool operator==(const DenseParams&) const = default;
};

// Glorot-uniform init from a seeded generator.
inline void init_dense(DenseParams& d, Rng& rng) {
    double a = std::sqrt(6.0 / static_cast<double>(d.in + d.out));
    for (double& w : d.weight) w = rng.uniform(-a, a);
    for (double& b : d.bias) b = 0.0;
}

inline Vector dense_forward(const Vector& x, const DenseParams& d) {
    if (x.size() != d.in)
        throw std::invalid_argument("dense_forward: input size " + std::to_string(x.size()) +
                                    " != " + std::to_string(d.in));
    Vector y(d.out);
    for (std::size_t o = 0; o < d.out; ++o) {
        double acc = d.bias[o];
        const double* w = &d.weight[o * d.in];
        for (std::size_t i = 0; i < d.in; ++i) acc += w[i] * x[i];
        y[o] = acc;
    }
    return y;
}

// d(out)/d(x), accumulating weight/bias grads into `grad`.
inline Vector dense_backward(const Vector& x, const DenseParams& d, const Vector& dout,
                             DenseParams& grad) {
    Vector dx(d.in, 0.0);
    for (std::size_t o = 0; o < d.out; ++o) {
        grad.bias[o] += dout[o];
        double* gw = &grad.weight[o * d.in];
        const double* w = &d.weight[o * d.in];
        for (std::size_t i = 0; i < d.in; ++i) {
            gw[i] += dout[o] * x[i];
            dx[i] += dout[o] * w[i];
        }
    }
    return dx;
}

inline void relu_inplace(Vector& v) {
    for (double& x : v)
        if (x < 0.0) x = 0.0;
}

// Per-layer inputs captured during the forward pass, for backprop.
struct MlpCache {
    std::vector<Vector> inputs;      // input to each layer (post-ReLU except the first)
    std::vector<Vector> pre_relu;    // affine outputs before ReLU, layers 0..L-2
};

// Affine -> ReLU repeated, final layer affine only.
inline Vector mlp_forward(const Vector& x, std::span<const DenseParams> layers,
                          MlpCache* cache = nullptr) {
    Vector h = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (cache) cache->inputs.push_back(h);
        h = dense_forward(h, layers[l]);
        if (l + 1 < layers.size()) {
            if (cache) cache->pre_relu.push_back(h);
            relu_inplace(h);
        }
    }
    return h;
}

// Returns d(loss)/d(x); accumulates parameter grads (same shapes as layers).
inline Vector mlp_backward(const Vector& dout, std::span<const DenseParams> layers,
                           const MlpCache& cache, std::span<DenseParams> grads) {
    Vector d = dout;
    for (std::size_t l = layers.size(); l-- > 0;) {
        if (l + 1 < layers.size()) {
            const Vector& pre = cache.pre_relu[l];
            for (std::size_t i = 0; i < d.size(); ++i)
                if (pre[i] <= 0.0) d[i] = 0.0;
        }
        d = dense_backward(cache.inputs[l], layers[l], d, grads[l]);
    }
    return d;
}

// Numerically stabilized softmax; strictly positive, sums to 1.
inline Vector softmax(const Vector& logits) {
    double m = logits[0];
    for (double z : logits) m = std::max(m, z);
    Vector p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

struct SoftmaxXent {
    double loss = 0.0;
    Vector grad;  // d(loss)/d(logits) = softmax - onehot
    Vector probs;
};

inline SoftmaxXent softmax_xent(const Vector& logits, std::size_t label) {
    if (label >= logits.size()) throw std::invalid_argument("softmax_xent: label out of range");
    SoftmaxXent r;
    r.probs = softmax(logits);
    r.loss = -std::log(r.probs[label]);
    r.grad = r.probs;
    r.grad[label] -= 1.0;
    return r;
}

// Argmax with ties to the lowest index.
inline std::size_t argmax(const Vector& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

// ---------------------------------------------------------------------------
// Flat parameter views: one canonical ordering of a model's arrays, shared by
// the optimizer, the checkpoint writer and the gradient checker.

struct ParamView {
    std::vector<std::span<double>> arrays;

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& a : arrays) n += a.size();
        return n;
    }

    double& at(std::size_t flat) {
        for (auto& a : arrays) {
            if (flat < a.size()) return a[flat];
            flat -= a.size();
        }
        throw std::invalid_argument("ParamView: flat index out of range");
    }
};

inline ParamView view_of(DenseParams& d) {
    return ParamView{{std::span<double>(d.weight), std::span<double>(d.bias)}};
}

inline void append_view(ParamView& v, DenseParams& d) {
    v.arrays.emplace_back(d.weight);
    v.arrays.emplace_back(d.bias);
}

inline Vector flatten(const ParamView& v) {
    Vector out;
    out.reserve(v.total());
    for (const auto& a : v.arrays) out.insert(out.end(), a.begin(), a.end());
    return out;
}

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamHyper hyper;
    std::size_t step = 0;
    Vector m, v;  // first/second moments, flat

    explicit AdamState(std::size_t total = 0, AdamHyper h = {})
        : hyper(h), m(total, 0.0), v(total, 0.0) {}
};

// Standard Adam with bias correction over a flat parameter view.
inline void adam_step(ParamView params, const Vector& grads, AdamState& state) {
    if (grads.size() != params.total() || grads.size() != state.m.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    ++state.step;
    const auto& h = state.hyper;
    double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
    std::size_t flat = 0;
    for (auto& a : params.arrays) {
        for (double& p : a) {
            double g = grads[flat];
            state.m[flat] = h.beta1 * state.m[flat] + (1.0 - h.beta1) * g;
            state.v[flat] = h.beta2 * state.v[flat] + (1.0 - h.beta2) * g * g;
            double mhat = state.m[flat] / bc1;
            double vhat = state.v[flat] / bc2;
            p -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
            ++flat;
        }
    }
}

// Central finite differences on `probes` randomly chosen scalar parameters.
// `analytic` is the flattened gradient at the current point; `loss_fn` must
// be pure in the viewed parameters. Returns the max relative error
// |a - n| / max(1e-8, |a| + |n|).
inline double finite_diff_check(ParamView params, const Vector& analytic,
                                const std::function<double()>& loss_fn, std::size_t probes,
                                double eps, Rng& rng) {
    if (analytic.size() != params.total())
        throw std::invalid_argument("finite_diff_check: gradient/parameter size mismatch");
    double max_rel = 0.0;
    for (std::size_t p = 0; p < probes; ++p) {
        std::size_t idx = rng.index(params.total());
        double& slot = params.at(idx);
        double saved = slot;
        slot = saved + eps;
        double up = loss_fn();
        slot = saved - eps;
        double down = loss_fn();
        slot = saved;
        double numeric = (up - down) / (2.0 * eps);
        double a = analytic[idx];
        double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace reveal
