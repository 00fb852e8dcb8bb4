// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lgttp/error.hpp"
#include "lgttp/query_parser.hpp"
#include "lgttp/weighting.hpp"

namespace lgttp {

/// N x d row-major matrix of per-frame embeddings.
class FrameEmbeddings {
public:
    FrameEmbeddings() = default;

    FrameEmbeddings(std::size_t n_frames, std::size_t dim, std::vector<double> data)
        : m_n(n_frames), m_dim(dim), m_data(std::move(data)) {
        require(n_frames >= 1 && dim >= 1, "embeddings need at least one frame and one dimension");
        require(m_data.size() == n_frames * dim, "embedding payload does not match n_frames x dim");
        for (double v : m_data) require(std::isfinite(v), "embedding contains a non-finite value");
    }

    static FrameEmbeddings zeros(std::size_t n_frames, std::size_t dim) {
        return FrameEmbeddings(n_frames, dim, std::vector<double>(n_frames * dim, 0.0));
    }

    std::size_t n_frames() const { return m_n; }
    std::size_t dim() const { return m_dim; }

    std::span<const double> row(std::size_t i) const { return {m_data.data() + i * m_dim, m_dim}; }
    std::span<double> row(std::size_t i) { return {m_data.data() + i * m_dim, m_dim}; }

    const std::vector<double>& data() const { return m_data; }
    std::vector<double>& data() { return m_data; }

    bool operator==(const FrameEmbeddings&) const = default;

private:
    std::size_t m_n = 0;
    std::size_t m_dim = 0;
    std::vector<double> m_data;
};

struct QueryEmbedding {
    std::vector<double> vector;

    std::size_t dim() const { return vector.size(); }
};

inline void validate(const QueryEmbedding& q) {
    require(!q.vector.empty(), "query embedding is empty");
    double sq = 0.0;
    for (double v : q.vector) {
        require(std::isfinite(v), "query embedding contains a non-finite value");
        sq += v * v;
    }
    require(sq > 0.0, "query embedding has zero norm");
}

/// Affine map a * cos + b applied to the cosine scores.
struct RelevanceParams {
    double a = 1.0;
    double b = 0.0;
};

struct RelevanceScores {
    std::vector<double> l_base;
    std::vector<double> l_temp;
};

inline double dot(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm(std::span<const double> x) { return std::sqrt(dot(x, x)); }

/// Cosine similarity; zero when either side has zero norm.
inline double cosine(std::span<const double> x, std::span<const double> y) {
    const double nx = norm(x);
    const double ny = norm(y);
    if (nx == 0.0 || ny == 0.0) return 0.0;
    return dot(x, y) / (nx * ny);
}

namespace detail {

// 64-bit FNV-1a with the seed folded into the offset basis.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    // final avalanche so low bits depend on every byte
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    return h;
}

inline std::vector<std::string> alnum_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        const bool alnum = (u >= '0' && u <= '9') || (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u >= 0x80;
        if (alnum) {
            current.push_back(ascii_lower(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

}  // namespace detail

/// Hashed bag-of-words text embedding (signed feature hashing, L2-normalized).
/// Stands in for the host model's text encoder.
inline QueryEmbedding embed_query(std::string_view text, std::size_t dim, std::uint64_t seed = 0) {
    require(dim >= 1, "embedding dimension must be positive");
    const auto tokens = detail::alnum_tokens(text);
    require(!tokens.empty(), "query has no tokens to embed");
    std::vector<double> v(dim, 0.0);
    for (const auto& tok : tokens) {
        const std::uint64_t h = detail::fnv1a(tok, seed);
        const std::size_t bucket = static_cast<std::size_t>(h % dim);
        const double sign = ((h >> 63) & 1U) ? -1.0 : 1.0;
        v[bucket] += sign;
    }
    const double n = norm(v);
    require(n > 0.0, "query tokens cancelled to a zero embedding");
    for (double& x : v) x /= n;
    return QueryEmbedding{std::move(v)};
}

inline std::vector<double> base_relevance(const FrameEmbeddings& e, const QueryEmbedding& q, const RelevanceParams& p = {}) {
    require(e.dim() == q.dim(), "frame and query embedding dimensions differ");
    std::vector<double> out(e.n_frames());
    for (std::size_t i = 0; i < e.n_frames(); ++i) out[i] = p.a * cosine(e.row(i), q.vector) + p.b;
    return out;
}

inline std::vector<double> apply_temporal_weighting(std::span<const double> l_base, const WeightVector& w) {
    require(l_base.size() == w.n_frames(), "relevance and weight vectors differ in length");
    std::vector<double> out(l_base.size());
    for (std::size_t i = 0; i < l_base.size(); ++i) out[i] = l_base[i] * w.weights[i];
    return out;
}

}  // namespace lgttp
