// SPDX-License-Identifier: Apache-2.0
#pragma once

// Desk-scale training of the adaptation parameters and the relevance affine
// (a, b): MSE between sigmoid(L_base) and binary per-frame labels, hand-written
// backward pass, AdamW with decoupled weight decay, and a finite-difference
// gradient checker.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lgttp/adaptation.hpp"
#include "lgttp/error.hpp"
#include "lgttp/relevance.hpp"
#include "lgttp/rng.hpp"

namespace lgttp {

/// Everything the pipeline learns, for one adaptation mode.
struct ModelParams {
    AdaptationMode mode = AdaptationMode::TimestampAware;
    RelevanceParams relevance;
    PositionEmbedParams position;  // used in PositionEmbedding mode
    AdapterParams adapter;         // used in LearnedAdapter mode

    struct Tensor {
        std::string name;
        std::span<double> values;
    };

    /// Mutable views over every trainable tensor, in checkpoint order.
    std::vector<Tensor> tensors() {
        std::vector<Tensor> out;
        out.push_back({"relevance.a", {&relevance.a, 1}});
        out.push_back({"relevance.b", {&relevance.b, 1}});
        if (mode == AdaptationMode::PositionEmbedding) {
            out.push_back({"position.w_p", position.w_p});
            out.push_back({"position.b_p", position.b_p});
        } else if (mode == AdaptationMode::LearnedAdapter) {
            out.push_back({"adapter.embed_table", adapter.embed_table});
            out.push_back({"adapter.mlp_w1", adapter.mlp_w1});
            out.push_back({"adapter.mlp_b1", adapter.mlp_b1});
            out.push_back({"adapter.mlp_w2", adapter.mlp_w2});
            out.push_back({"adapter.mlp_b2", adapter.mlp_b2});
            out.push_back({"adapter.ln_gain", adapter.ln_gain});
            out.push_back({"adapter.ln_bias", adapter.ln_bias});
            out.push_back({"adapter.scale", {&adapter.scale, 1}});
        }
        return out;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (const auto& t : tensors()) n += t.values.size();
        return n;
    }

    /// Same shapes, all zeros; used as a gradient accumulator.
    ModelParams zeros_like() const {
        ModelParams z = *this;
        for (auto& t : z.tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);
        return z;
    }

    /// Parameters that leave embeddings untouched (zero offsets, scale 0).
    static ModelParams identity(AdaptationMode mode, std::size_t dim, std::size_t max_frames = kDefaultMaxFrames) {
        ModelParams p;
        p.mode = mode;
        if (mode == AdaptationMode::PositionEmbedding) p.position = PositionEmbedParams::zeros(dim);
        if (mode == AdaptationMode::LearnedAdapter) p.adapter = AdapterParams::zeros(dim, max_frames);
        return p;
    }
};

/// Applies the mode's adaptation to produce E'.
inline FrameEmbeddings adapt(const FrameEmbeddings& e, const ModelParams& p) {
    switch (p.mode) {
        case AdaptationMode::TimestampAware: return adapt_timestamp_aware(e);
        case AdaptationMode::PositionEmbedding: return adapt_position(e, p.position);
        case AdaptationMode::LearnedAdapter: return adapt_learned(e, p.adapter);
    }
    fail(ErrorCode::Internal, "unhandled adaptation mode");
}

struct TrainingSample {
    FrameEmbeddings embeddings;
    QueryEmbedding query;
    std::vector<double> labels;  // 0/1 per frame
};

struct TrainConfig {
    double learning_rate = 1e-4;
    double weight_decay = 0.01;
    int epochs = 20;
    std::uint64_t seed = 0;
    std::size_t batch_size = 1;
    std::size_t max_frames = kDefaultMaxFrames;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

inline void validate(const TrainConfig& c) {
    require(c.learning_rate > 0.0 && std::isfinite(c.learning_rate), "learning rate must be positive");
    require(c.weight_decay >= 0.0 && std::isfinite(c.weight_decay), "weight decay must be non-negative");
    require(c.epochs >= 1, "epochs must be at least 1");
    require(c.batch_size >= 1, "batch size must be positive");
    require(c.max_frames >= 1, "max_frames must be positive");
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double z = std::exp(x);
    return z / (1.0 + z);
}

namespace detail {

inline void check_sample(const TrainingSample& s, const ModelParams& p) {
    require(s.embeddings.dim() == s.query.dim(), "sample query dim does not match embeddings");
    require(s.labels.size() == s.embeddings.n_frames(), "sample labels do not match frame count");
    if (p.mode == AdaptationMode::PositionEmbedding) {
        require(p.position.dim() == s.embeddings.dim(), "position params do not match embedding dim");
    } else if (p.mode == AdaptationMode::LearnedAdapter) {
        require(p.adapter.dim == s.embeddings.dim(), "adapter dim does not match embedding dim");
        require(s.embeddings.n_frames() <= p.adapter.max_frames, "sample has more frames than the adapter table");
    }
}

// Backprop of one adapter evaluation given d(out).
inline void adapter_backward(const AdapterParams& a, const AdapterTrace& t, std::span<const double> d_out,
                             AdapterParams& g) {
    const std::size_t d = a.dim;
    std::vector<double> dh3(d);
    for (std::size_t k = 0; k < d; ++k) {
        g.scale += d_out[k] * t.h3[k];
        dh3[k] = a.scale * d_out[k];
    }
    std::vector<double> dh2(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        const double* w_row = a.mlp_w2.data() + j * d;
        double* g_row = g.mlp_w2.data() + j * d;
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            g_row[k] += t.h2[j] * dh3[k];
            acc += w_row[k] * dh3[k];
        }
        dh2[j] = acc;
    }
    for (std::size_t k = 0; k < d; ++k) g.mlp_b2[k] += dh3[k];

    std::vector<double> dz1(d);
    for (std::size_t k = 0; k < d; ++k) dz1[k] = dh2[k] * gelu_grad(t.z1[k]);
    std::vector<double> dh1(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        const double* w_row = a.mlp_w1.data() + j * d;
        double* g_row = g.mlp_w1.data() + j * d;
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            g_row[k] += t.h1[j] * dz1[k];
            acc += w_row[k] * dz1[k];
        }
        dh1[j] = acc;
    }
    for (std::size_t k = 0; k < d; ++k) g.mlp_b1[k] += dz1[k];

    // LayerNorm: h1 = gain * xhat + bias, xhat = (h0 - mean) * inv_std
    std::vector<double> dxhat(d);
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        g.ln_gain[k] += dh1[k] * t.normalized[k];
        g.ln_bias[k] += dh1[k];
        dxhat[k] = dh1[k] * a.ln_gain[k];
        mean_dxhat += dxhat[k];
        mean_dxhat_xhat += dxhat[k] * t.normalized[k];
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    double* g_embed = g.embed_table.data() + t.index * d;
    for (std::size_t k = 0; k < d; ++k) {
        g_embed[k] += t.inv_std * (dxhat[k] - mean_dxhat - t.normalized[k] * mean_dxhat_xhat);
    }
}

}  // namespace detail

/// Mean loss over `batch`; when `grad` is non-null, adds the gradient of that
/// mean loss into it.
inline double batch_loss(const ModelParams& p, std::span<const TrainingSample* const> batch, ModelParams* grad) {
    require(!batch.empty(), "batch is empty");
    std::size_t max_n = 0;
    for (const auto* s : batch) {
        detail::check_sample(*s, p);
        max_n = std::max(max_n, s->embeddings.n_frames());
    }
    const std::size_t d = batch.front()->embeddings.dim();
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    // The adapter offset depends only on the frame index, so it is evaluated
    // once per batch and its gradient is accumulated across samples.
    std::vector<AdapterTrace> traces;
    std::vector<std::vector<double>> adapter_out;
    std::vector<std::vector<double>> d_adapter;
    if (p.mode == AdaptationMode::LearnedAdapter) {
        traces.resize(max_n);
        adapter_out.resize(max_n);
        for (std::size_t i = 0; i < max_n; ++i) adapter_out[i] = adapter_forward(i + 1, p.adapter, &traces[i]);
        if (grad != nullptr) d_adapter.assign(max_n, std::vector<double>(d, 0.0));
    }

    double total = 0.0;
    std::vector<double> row(d);
    for (const auto* s : batch) {
        const std::size_t n = s->embeddings.n_frames();
        const double q_norm = norm(s->query.vector);
        const double inv_n = 1.0 / static_cast<double>(n);
        double sample_loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto e = s->embeddings.row(i);
            const double pos = static_cast<double>(i + 1) / static_cast<double>(n);
            for (std::size_t k = 0; k < d; ++k) {
                double v = e[k];
                if (p.mode == AdaptationMode::PositionEmbedding) v += p.position.w_p[k] * pos + p.position.b_p[k];
                if (p.mode == AdaptationMode::LearnedAdapter) v += adapter_out[i][k];
                row[k] = v;
            }
            const double r_norm = norm(row);
            const double c = (r_norm == 0.0 || q_norm == 0.0) ? 0.0 : dot(row, s->query.vector) / (r_norm * q_norm);
            const double logit = p.relevance.a * c + p.relevance.b;
            const double prob = sigmoid(logit);
            const double diff = prob - s->labels[i];
            sample_loss += diff * diff;
            if (grad == nullptr) continue;

            const double d_logit = 2.0 * diff * prob * (1.0 - prob) * inv_n * inv_batch;
            grad->relevance.a += d_logit * c;
            grad->relevance.b += d_logit;
            if (p.mode == AdaptationMode::TimestampAware || r_norm == 0.0 || q_norm == 0.0) continue;
            const double d_c = p.relevance.a * d_logit;
            for (std::size_t k = 0; k < d; ++k) {
                const double d_row =
                    d_c * (s->query.vector[k] / (r_norm * q_norm) - c * row[k] / (r_norm * r_norm));
                if (p.mode == AdaptationMode::PositionEmbedding) {
                    grad->position.w_p[k] += d_row * pos;
                    grad->position.b_p[k] += d_row;
                } else {
                    d_adapter[i][k] += d_row;
                }
            }
        }
        total += sample_loss * inv_n;
    }
    if (grad != nullptr && p.mode == AdaptationMode::LearnedAdapter) {
        for (std::size_t i = 0; i < max_n; ++i) detail::adapter_backward(p.adapter, traces[i], d_adapter[i], grad->adapter);
    }
    return total * inv_batch;
}

inline double sample_loss(const ModelParams& p, const TrainingSample& s, ModelParams* grad = nullptr) {
    const TrainingSample* ptr = &s;
    return batch_loss(p, std::span<const TrainingSample* const>(&ptr, 1), grad);
}

inline double dataset_loss(const ModelParams& p, std::span<const TrainingSample> data) {
    double total = 0.0;
    for (const auto& s : data) total += sample_loss(p, s);
    return total / static_cast<double>(data.size());
}

/// AdamW with decoupled weight decay (PyTorch ordering: decay, then the
/// bias-corrected Adam step). Applies to every trainable tensor.
class AdamW {
public:
    AdamW(std::size_t n_params, const TrainConfig& cfg) : m_cfg(cfg), m_m(n_params, 0.0), m_v(n_params, 0.0) {}

    void step(ModelParams& params, ModelParams& grad) {
        ++m_t;
        const double bc1 = 1.0 - std::pow(m_cfg.beta1, static_cast<double>(m_t));
        const double bc2 = 1.0 - std::pow(m_cfg.beta2, static_cast<double>(m_t));
        auto p_tensors = params.tensors();
        auto g_tensors = grad.tensors();
        std::size_t offset = 0;
        for (std::size_t t = 0; t < p_tensors.size(); ++t) {
            auto values = p_tensors[t].values;
            auto grads = g_tensors[t].values;
            for (std::size_t k = 0; k < values.size(); ++k, ++offset) {
                const double g = grads[k];
                m_m[offset] = m_cfg.beta1 * m_m[offset] + (1.0 - m_cfg.beta1) * g;
                m_v[offset] = m_cfg.beta2 * m_v[offset] + (1.0 - m_cfg.beta2) * g * g;
                const double m_hat = m_m[offset] / bc1;
                const double v_hat = m_v[offset] / bc2;
                values[k] *= 1.0 - m_cfg.learning_rate * m_cfg.weight_decay;
                values[k] -= m_cfg.learning_rate * m_hat / (std::sqrt(v_hat) + m_cfg.adam_eps);
            }
        }
    }

    long long steps() const { return m_t; }

private:
    TrainConfig m_cfg;
    std::vector<double> m_m;
    std::vector<double> m_v;
    long long m_t = 0;
};

/// Initial parameters for training: relevance (1, 0); Xavier-uniform W_p with
/// zero b_p; init_adapter for the learned adapter.
inline ModelParams init_params(AdaptationMode mode, std::size_t dim, std::size_t max_frames, std::uint64_t seed) {
    ModelParams p = ModelParams::identity(mode, dim, max_frames);
    if (mode == AdaptationMode::PositionEmbedding) {
        Rng rng(seed);
        const double bound = std::sqrt(6.0 / static_cast<double>(dim + 1));
        for (double& v : p.position.w_p) v = rng.uniform(-bound, bound);
    } else if (mode == AdaptationMode::LearnedAdapter) {
        p.adapter = init_adapter(dim, max_frames, seed);
    }
    return p;
}

struct TrainResult {
    ModelParams params;
    std::vector<double> loss_history;  // [0] before training, [k] after epoch k
    std::vector<double> best_loss;     // running minimum of loss_history
    long long steps = 0;
};

inline TrainResult train(std::span<const TrainingSample> dataset, AdaptationMode mode, const TrainConfig& cfg) {
    validate(cfg);
    require(!dataset.empty(), "training dataset is empty");
    const std::size_t dim = dataset.front().embeddings.dim();
    ModelParams params = init_params(mode, dim, cfg.max_frames, cfg.seed);
    for (const auto& s : dataset) detail::check_sample(s, params);

    AdamW opt(params.parameter_count(), cfg);
    Rng shuffle_rng(mix_seed(cfg.seed, 1));
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    result.loss_history.push_back(dataset_loss(params, dataset));
    result.best_loss.push_back(result.loss_history.back());
    std::vector<const TrainingSample*> batch;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        }
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            batch.clear();
            for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
                batch.push_back(&dataset[order[k]]);
            }
            ModelParams grad = params.zeros_like();
            batch_loss(params, batch, &grad);
            opt.step(params, grad);
        }
        const double loss = dataset_loss(params, dataset);
        result.loss_history.push_back(loss);
        result.best_loss.push_back(std::min(result.best_loss.back(), loss));
    }
    result.steps = opt.steps();
    result.params = std::move(params);
    return result;
}

struct GradCheckProblem {
    ModelParams params;
    TrainingSample sample;
};

/// Seeded toy problem at a generic (non-initial) parameter point: Gaussian
/// frames and query, random 0/1 labels, every parameter jittered.
inline GradCheckProblem toy_gradcheck_problem(AdaptationMode mode, std::size_t dim, std::size_t n_frames, std::uint64_t seed) {
    require(dim >= 1 && n_frames >= 1, "toy problem needs dim >= 1 and n_frames >= 1");
    Rng rng(seed);
    GradCheckProblem prob;
    prob.params = init_params(mode, dim, n_frames, mix_seed(seed, 3));
    prob.params.relevance = {1.5, -0.25};
    for (auto& t : prob.params.tensors()) {
        if (t.name == "relevance.a" || t.name == "relevance.b") continue;
        const double jitter = t.name == "adapter.scale" ? 0.5 : 0.1;
        for (double& v : t.values) v += rng.normal(0.0, jitter);
    }
    std::vector<double> data(n_frames * dim);
    for (double& v : data) v = rng.normal();
    prob.sample.embeddings = FrameEmbeddings(n_frames, dim, std::move(data));
    prob.sample.query.vector.resize(dim);
    for (double& v : prob.sample.query.vector) v = rng.normal();
    prob.sample.labels.resize(n_frames);
    for (double& v : prob.sample.labels) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    return prob;
}

struct GradCheckOptions {
    double epsilon = 1e-5;
    std::size_t full_check_limit = 4096;  // check every coordinate up to this many
    std::size_t sampled_coords = 256;     // otherwise a seeded random subset
    std::uint64_t seed = 0;
    double corrupt_gradient = 0.0;  // test hook: added to the first analytic coordinate
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t coords_checked = 0;
    std::string worst_tensor;
};

/// Central finite differences vs. the analytic gradient of sample_loss.
/// Relative error uses max(|fd|, |analytic|, 1e-8) as denominator.
inline GradCheckResult grad_check(const ModelParams& params, const TrainingSample& sample, const GradCheckOptions& opt = {}) {
    require(opt.epsilon > 0.0 && opt.epsilon <= 1e-2, "epsilon must lie in (0, 1e-2]");
    ModelParams probe = params;
    ModelParams analytic = params.zeros_like();
    sample_loss(params, sample, &analytic);

    struct Coord {
        std::size_t tensor;
        std::size_t index;
    };
    auto p_tensors = probe.tensors();
    auto a_tensors = analytic.tensors();
    std::vector<Coord> coords;
    for (std::size_t t = 0; t < p_tensors.size(); ++t) {
        for (std::size_t k = 0; k < p_tensors[t].values.size(); ++k) coords.push_back({t, k});
    }
    if (opt.corrupt_gradient != 0.0 && !coords.empty()) a_tensors[0].values[0] += opt.corrupt_gradient;
    if (coords.size() > opt.full_check_limit) {
        Rng rng(opt.seed);
        for (std::size_t i = 0; i < opt.sampled_coords; ++i) {
            std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
        }
        coords.resize(opt.sampled_coords);
    }

    GradCheckResult result;
    for (const auto& c : coords) {
        double& x = p_tensors[c.tensor].values[c.index];
        const double saved = x;
        x = saved + opt.epsilon;
        const double up = sample_loss(probe, sample);
        x = saved - opt.epsilon;
        const double down = sample_loss(probe, sample);
        x = saved;
        const double fd = (up - down) / (2.0 * opt.epsilon);
        const double an = a_tensors[c.tensor].values[c.index];
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
        const double err = std::abs(fd - an) / denom;
        if (err > result.max_relative_error) {
            result.max_relative_error = err;
            result.worst_tensor = p_tensors[c.tensor].name;
        }
        ++result.coords_checked;
    }
    return result;
}

}  // namespace lgttp
