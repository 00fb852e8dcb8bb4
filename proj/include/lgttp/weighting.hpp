// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "lgttp/error.hpp"
#include "lgttp/query_parser.hpp"

namespace lgttp {

inline constexpr double kDefaultLambda = 2.0;

/// Frame-wise temporal weights, one strictly positive entry per frame.
struct WeightVector {
    std::vector<double> weights;
    double lambda = kDefaultLambda;

    std::size_t n_frames() const { return weights.size(); }
    double operator[](std::size_t i) const { return weights[i]; }
};

namespace detail {

// Normalized position (i-1)/(N-1) for 0-based index i.
inline double ramp_position(std::size_t i, std::size_t n) {
    return static_cast<double>(i) / static_cast<double>(n - 1);
}

template <typename F>
WeightVector profile(std::size_t n, double lambda, F&& f) {
    require(n >= 1, "frame count must be at least 1");
    WeightVector w{std::vector<double>(n, 1.0), lambda};
    if (n == 1) return w;  // one frame admits no temporal preference
    for (std::size_t i = 0; i < n; ++i) w.weights[i] = f(ramp_position(i, n));
    return w;
}

}  // namespace detail

/// Linearly decreasing 1.5 -> 0.5; favours early frames.
inline WeightVector precedence_weights(std::size_t n) {
    return detail::profile(n, kDefaultLambda, [](double x) { return 1.5 - x; });
}

/// Linearly increasing 0.5 -> 1.5; favours late frames.
inline WeightVector subsequence_weights(std::size_t n) {
    return detail::profile(n, kDefaultLambda, [](double x) { return 0.5 + x; });
}

/// exp(-lambda * |x - 0.5|), peaked on the central frames.
inline WeightVector cooccurrence_weights(std::size_t n, double lambda = kDefaultLambda) {
    require(lambda > 0.0 && std::isfinite(lambda), "lambda must be positive and finite");
    return detail::profile(n, lambda, [lambda](double x) { return std::exp(-lambda * std::abs(x - 0.5)); });
}

inline WeightVector uniform_weights(std::size_t n) {
    require(n >= 1, "frame count must be at least 1");
    return WeightVector{std::vector<double>(n, 1.0), kDefaultLambda};
}

/// Element-wise product of all parts, rescaled to mean 1.
inline WeightVector combine_weights(std::span<const WeightVector> parts) {
    require(!parts.empty(), "combine_weights needs at least one weight vector");
    const std::size_t n = parts.front().n_frames();
    require(n >= 1, "weight vectors must be non-empty");
    std::vector<double> product(n, 1.0);
    for (const auto& part : parts) {
        require(part.n_frames() == n, "weight vectors have mismatched lengths");
        for (std::size_t i = 0; i < n; ++i) product[i] *= part.weights[i];
    }
    double total = 0.0;
    for (double p : product) total += p;
    require(total > 0.0 && std::isfinite(total), "combined weights are degenerate");
    const double factor = static_cast<double>(n) / total;
    for (double& p : product) p *= factor;
    return WeightVector{std::move(product), parts.front().lambda};
}

inline WeightVector profile_for(Category c, std::size_t n, double lambda) {
    switch (c) {
        case Category::Precedence: return precedence_weights(n);
        case Category::Subsequence: return subsequence_weights(n);
        case Category::Cooccurrence: return cooccurrence_weights(n, lambda);
    }
    fail(ErrorCode::Internal, "unhandled category");
}

/// Uniform for no cues; otherwise the combined per-cue profiles. Repeated
/// categories compound.
inline WeightVector weights_for_cues(std::span<const TemporalCue> cues, std::size_t n, double lambda = kDefaultLambda) {
    require(n >= 1, "frame count must be at least 1");
    require(lambda > 0.0 && std::isfinite(lambda), "lambda must be positive and finite");
    if (cues.empty()) {
        auto w = uniform_weights(n);
        w.lambda = lambda;
        return w;
    }
    std::vector<WeightVector> parts;
    parts.reserve(cues.size());
    for (const auto& cue : cues) parts.push_back(profile_for(cue.category, n, lambda));
    auto w = combine_weights(parts);
    w.lambda = lambda;
    return w;
}

}  // namespace lgttp
