// SPDX-License-Identifier: Apache-2.0
#pragma once

// Temporally-adapted frame embeddings for the three host-model classes:
// timestamp-aware passthrough, linear position embedding, and the learned
// temporal adapter (embedding table -> LayerNorm -> MLP with GELU -> scale).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lgttp/error.hpp"
#include "lgttp/relevance.hpp"
#include "lgttp/rng.hpp"

namespace lgttp {

enum class AdaptationMode { TimestampAware, PositionEmbedding, LearnedAdapter };

inline constexpr std::string_view to_string(AdaptationMode m) {
    switch (m) {
        case AdaptationMode::TimestampAware: return "timestamp";
        case AdaptationMode::PositionEmbedding: return "position";
        case AdaptationMode::LearnedAdapter: return "adapter";
    }
    return "unknown";
}

inline std::optional<AdaptationMode> parse_mode(std::string_view name) {
    if (name == "timestamp") return AdaptationMode::TimestampAware;
    if (name == "position") return AdaptationMode::PositionEmbedding;
    if (name == "adapter") return AdaptationMode::LearnedAdapter;
    return std::nullopt;
}

inline constexpr std::size_t kDefaultMaxFrames = 128;
inline constexpr std::size_t kDefaultAdapterDim = 768;
inline constexpr double kLayerNormEps = 1e-5;

/// P_temp(x) = w_p * x + b_p.
struct PositionEmbedParams {
    std::vector<double> w_p;
    std::vector<double> b_p;

    static PositionEmbedParams zeros(std::size_t dim) { return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)}; }

    std::size_t dim() const { return w_p.size(); }
};

/// Learned temporal adapter. Matrices are row-major with the input feature as
/// the row: out_k = sum_j in_j * W[j * d + k].
struct AdapterParams {
    std::size_t dim = 0;
    std::size_t max_frames = 0;
    std::vector<double> embed_table;  // max_frames x dim
    std::vector<double> mlp_w1;       // dim x dim
    std::vector<double> mlp_b1;
    std::vector<double> mlp_w2;  // dim x dim
    std::vector<double> mlp_b2;
    std::vector<double> ln_gain;
    std::vector<double> ln_bias;
    double scale = 0.1;

    /// All-zero parameters with unit LayerNorm gain and scale 0 (an identity adapter).
    static AdapterParams zeros(std::size_t dim, std::size_t max_frames) {
        AdapterParams p;
        p.dim = dim;
        p.max_frames = max_frames;
        p.embed_table.assign(max_frames * dim, 0.0);
        p.mlp_w1.assign(dim * dim, 0.0);
        p.mlp_b1.assign(dim, 0.0);
        p.mlp_w2.assign(dim * dim, 0.0);
        p.mlp_b2.assign(dim, 0.0);
        p.ln_gain.assign(dim, 1.0);
        p.ln_bias.assign(dim, 0.0);
        p.scale = 0.0;
        return p;
    }
};

inline void validate(const AdapterParams& a) {
    require(a.dim >= 1 && a.max_frames >= 1, "adapter needs dim >= 1 and max_frames >= 1");
    const std::size_t d = a.dim;
    require(a.embed_table.size() == a.max_frames * d && a.mlp_w1.size() == d * d && a.mlp_w2.size() == d * d &&
                a.mlp_b1.size() == d && a.mlp_b2.size() == d && a.ln_gain.size() == d && a.ln_bias.size() == d,
            "adapter tensor shapes are inconsistent");
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

inline double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

/// Intermediate activations of one adapter evaluation, kept for backprop.
struct AdapterTrace {
    std::size_t index = 0;  // 0-based table row
    std::vector<double> normalized;  // (h0 - mean) / std
    double inv_std = 0.0;
    std::vector<double> h1;  // after LayerNorm affine
    std::vector<double> z1;  // pre-activation of the first layer
    std::vector<double> h2;  // gelu(z1)
    std::vector<double> h3;  // second layer output (before scale)
};

namespace detail {

inline void matvec_rows(std::span<const double> in, std::span<const double> w, std::span<const double> bias,
                        std::span<double> out) {
    const std::size_t d = out.size();
    for (std::size_t k = 0; k < d; ++k) out[k] = bias[k];
    for (std::size_t j = 0; j < in.size(); ++j) {
        const double x = in[j];
        if (x == 0.0) continue;
        const double* row = w.data() + j * d;
        for (std::size_t k = 0; k < d; ++k) out[k] += x * row[k];
    }
}

}  // namespace detail

/// Forward pass for 1-based frame index `frame`, recording the trace.
inline std::vector<double> adapter_forward(std::size_t frame, const AdapterParams& a, AdapterTrace* trace) {
    require(frame >= 1 && frame <= a.max_frames, "frame index " + std::to_string(frame) + " outside adapter table");
    const std::size_t d = a.dim;
    AdapterTrace local;
    AdapterTrace& t = trace != nullptr ? *trace : local;
    t.index = frame - 1;
    const std::span<const double> h0(a.embed_table.data() + t.index * d, d);

    double mean = 0.0;
    for (double v : h0) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : h0) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    t.inv_std = 1.0 / std::sqrt(var + kLayerNormEps);

    t.normalized.resize(d);
    t.h1.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
        t.normalized[k] = (h0[k] - mean) * t.inv_std;
        t.h1[k] = a.ln_gain[k] * t.normalized[k] + a.ln_bias[k];
    }
    t.z1.resize(d);
    detail::matvec_rows(t.h1, a.mlp_w1, a.mlp_b1, t.z1);
    t.h2.resize(d);
    for (std::size_t k = 0; k < d; ++k) t.h2[k] = gelu(t.z1[k]);
    t.h3.resize(d);
    detail::matvec_rows(t.h2, a.mlp_w2, a.mlp_b2, t.h3);

    std::vector<double> out(d);
    for (std::size_t k = 0; k < d; ++k) out[k] = a.scale * t.h3[k];
    return out;
}

inline std::vector<double> adapter_forward(std::size_t frame, const AdapterParams& a) {
    return adapter_forward(frame, a, nullptr);
}

/// E' = E; timestamps are already bound upstream.
inline FrameEmbeddings adapt_timestamp_aware(const FrameEmbeddings& e) { return e; }

/// e'_i = e_i + w_p * (i / N) + b_p with 1-based i.
inline FrameEmbeddings adapt_position(const FrameEmbeddings& e, const PositionEmbedParams& p) {
    require(p.w_p.size() == e.dim() && p.b_p.size() == e.dim(), "position parameters do not match embedding dim");
    FrameEmbeddings out = e;
    const double n = static_cast<double>(e.n_frames());
    for (std::size_t i = 0; i < e.n_frames(); ++i) {
        const double x = static_cast<double>(i + 1) / n;
        auto row = out.row(i);
        for (std::size_t k = 0; k < e.dim(); ++k) row[k] += p.w_p[k] * x + p.b_p[k];
    }
    return out;
}

/// e'_i = e_i + A_temp(i), residual.
inline FrameEmbeddings adapt_learned(const FrameEmbeddings& e, const AdapterParams& a) {
    validate(a);
    require(a.dim == e.dim(), "adapter dim does not match embedding dim");
    require(e.n_frames() <= a.max_frames,
            "frame count " + std::to_string(e.n_frames()) + " exceeds adapter table size " + std::to_string(a.max_frames));
    FrameEmbeddings out = e;
    for (std::size_t i = 0; i < e.n_frames(); ++i) {
        const auto offset = adapter_forward(i + 1, a);
        auto row = out.row(i);
        for (std::size_t k = 0; k < e.dim(); ++k) row[k] += offset[k];
    }
    return out;
}

/// Xavier-uniform linear layers, N(0, 0.02) embedding table, zero biases,
/// identity LayerNorm, scale 0.1.
inline AdapterParams init_adapter(std::size_t dim = kDefaultAdapterDim, std::size_t max_frames = kDefaultMaxFrames,
                                  std::uint64_t seed = 0) {
    require(dim >= 1 && max_frames >= 1, "adapter needs dim >= 1 and max_frames >= 1");
    AdapterParams a = AdapterParams::zeros(dim, max_frames);
    a.scale = 0.1;
    Rng rng(seed);
    for (double& v : a.embed_table) v = rng.normal(0.0, 0.02);
    const double bound = std::sqrt(6.0 / static_cast<double>(dim + dim));
    for (double& v : a.mlp_w1) v = rng.uniform(-bound, bound);
    for (double& v : a.mlp_w2) v = rng.uniform(-bound, bound);
    return a;
}

}  // namespace lgttp
