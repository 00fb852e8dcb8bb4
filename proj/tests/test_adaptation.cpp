// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "lgttp/adaptation.hpp"
#include "lgttp/rng.hpp"
#include "lgttp/trainer.hpp"

namespace lgttp {
namespace {

// Independent forward pass over Eigen column vectors: W is stored input-major,
// so the layer is W^T x + b.
Eigen::VectorXd oracle_forward(std::size_t frame, const AdapterParams& a) {
    const auto d = static_cast<Eigen::Index>(a.dim);
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::Map<const RowMat> table(a.embed_table.data(), static_cast<Eigen::Index>(a.max_frames), d);
    const Eigen::Map<const RowMat> w1(a.mlp_w1.data(), d, d);
    const Eigen::Map<const RowMat> w2(a.mlp_w2.data(), d, d);
    const Eigen::Map<const Eigen::VectorXd> b1(a.mlp_b1.data(), d), b2(a.mlp_b2.data(), d);
    const Eigen::Map<const Eigen::VectorXd> gain(a.ln_gain.data(), d), bias(a.ln_bias.data(), d);

    const Eigen::VectorXd h0 = table.row(static_cast<Eigen::Index>(frame - 1)).transpose();
    const double mean = h0.mean();
    const double var = (h0.array() - mean).square().mean();
    const Eigen::VectorXd xhat = (h0.array() - mean) / std::sqrt(var + 1e-5);
    const Eigen::VectorXd h1 = gain.cwiseProduct(xhat) + bias;
    const Eigen::VectorXd z1 = w1.transpose() * h1 + b1;
    const Eigen::VectorXd h2 = z1.unaryExpr([](double x) { return x * 0.5 * std::erfc(-x / std::sqrt(2.0)); });
    const Eigen::VectorXd h3 = w2.transpose() * h2 + b2;
    return a.scale * h3;
}

AdapterParams toy_adapter(std::size_t d, std::size_t max_frames, std::uint64_t seed) {
    AdapterParams a = init_adapter(d, max_frames, seed);
    Rng rng(seed + 100);
    for (double& v : a.embed_table) v = rng.normal();
    for (double& v : a.mlp_b1) v = rng.normal(0, 0.3);
    for (double& v : a.mlp_b2) v = rng.normal(0, 0.3);
    for (double& v : a.ln_gain) v = 1.0 + rng.normal(0, 0.2);
    for (double& v : a.ln_bias) v = rng.normal(0, 0.2);
    a.scale = 0.7;
    return a;
}

FrameEmbeddings random_frames(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> data(n * d);
    for (double& v : data) v = rng.normal();
    return FrameEmbeddings(n, d, std::move(data));
}

TEST(Gelu, ExactFormAndDerivative) {
    EXPECT_EQ(gelu(0.0), 0.0);
    EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-15);
    EXPECT_NEAR(gelu(-1.0), -0.15865525393145707, 1e-15);
    for (double x : {-3.0, -0.7, 0.0, 0.4, 2.5}) {
        const double h = 1e-6;
        EXPECT_NEAR(gelu_grad(x), (gelu(x + h) - gelu(x - h)) / (2 * h), 1e-8);
    }
}

TEST(AdaptTimestampAware, Identity) {
    const auto e = random_frames(5, 4, 1);
    const auto once = adapt_timestamp_aware(e);
    EXPECT_EQ(once, e);
    EXPECT_EQ(adapt_timestamp_aware(once), once);
    EXPECT_EQ(once.n_frames(), 5u);
}

TEST(AdaptPosition, Examples) {
    const auto e = random_frames(4, 3, 2);
    EXPECT_EQ(adapt_position(e, PositionEmbedParams::zeros(3)), e);

    const PositionEmbedParams shift{{0, 0, 0}, {0.5, -1, 2}};
    const auto shifted = adapt_position(e, shift);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(shifted.row(i)[k], e.row(i)[k] + shift.b_p[k]);
    }

    const auto two = adapt_position(FrameEmbeddings::zeros(2, 1), PositionEmbedParams{{1.0}, {0.0}});
    EXPECT_EQ(two.row(0)[0], 0.5);
    EXPECT_EQ(two.row(1)[0], 1.0);

    EXPECT_THROW(adapt_position(e, PositionEmbedParams::zeros(2)), Error);
}

TEST(AdapterForward, ZeroScaleOrZeroOutputLayer) {
    AdapterParams a = toy_adapter(4, 6, 3);
    a.scale = 0.0;
    for (std::size_t i = 1; i <= 6; ++i) {
        for (double v : adapter_forward(i, a)) EXPECT_EQ(v, 0.0);
    }
    AdapterParams b = toy_adapter(4, 6, 3);
    std::fill(b.mlp_w2.begin(), b.mlp_w2.end(), 0.0);
    std::fill(b.mlp_b2.begin(), b.mlp_b2.end(), 0.0);
    for (double v : adapter_forward(2, b)) EXPECT_EQ(v, 0.0);
}

TEST(AdapterForward, MatchesEigenOracle) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        for (std::size_t d : {2u, 5u, 16u}) {
            const AdapterParams a = toy_adapter(d, 7, seed);
            for (std::size_t i = 1; i <= 7; ++i) {
                const auto got = adapter_forward(i, a);
                const Eigen::VectorXd want = oracle_forward(i, a);
                for (std::size_t k = 0; k < d; ++k) EXPECT_NEAR(got[k], want(static_cast<Eigen::Index>(k)), 1e-12);
            }
        }
    }
}

TEST(AdapterForward, HandComputedTwoDimensional) {
    // d = 2: LayerNorm of (0.3, -0.1) is (+-1) scaled by sqrt(0.04 / (0.04 + 1e-5))
    AdapterParams a = AdapterParams::zeros(2, 1);
    a.embed_table = {0.3, -0.1};
    a.mlp_w1 = {1.0, 0.5, -0.5, 2.0};  // z1 = (x0 - 0.5 x1, 0.5 x0 + 2 x1)
    a.mlp_w2 = {1.0, 0.0, 0.0, 1.0};
    a.mlp_b2 = {0.1, -0.1};
    a.scale = 0.1;
    const double s = std::sqrt(0.04 / (0.04 + 1e-5));
    const double x0 = s, x1 = -s;
    const double z0 = x0 - 0.5 * x1, z1 = 0.5 * x0 + 2.0 * x1;
    auto g = [](double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); };
    const auto out = adapter_forward(1, a);
    EXPECT_NEAR(out[0], 0.1 * (g(z0) + 0.1), 1e-14);
    EXPECT_NEAR(out[1], 0.1 * (g(z1) - 0.1), 1e-14);
}

TEST(AdapterForward, IndexOutOfRange) {
    const AdapterParams a = toy_adapter(3, 4, 1);
    EXPECT_THROW(adapter_forward(0, a), Error);
    EXPECT_THROW(adapter_forward(5, a), Error);
}

TEST(AdaptLearned, ResidualAddition) {
    const auto e = random_frames(3, 4, 8);
    AdapterParams a = toy_adapter(4, 5, 8);
    const auto adapted = adapt_learned(e, a);
    for (std::size_t i = 0; i < 3; ++i) {
        const Eigen::VectorXd off = oracle_forward(i + 1, a);
        for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(adapted.row(i)[k], e.row(i)[k] + off(static_cast<Eigen::Index>(k)), 1e-12);
    }
    a.scale = 0.0;
    EXPECT_EQ(adapt_learned(e, a), e);

    const auto single = random_frames(1, 4, 9);
    const AdapterParams b = toy_adapter(4, 5, 9);
    const auto v = adapter_forward(1, b);
    const auto one = adapt_learned(single, b);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(one.row(0)[k], single.row(0)[k] + v[k]);
}

TEST(AdaptLearned, Errors) {
    EXPECT_THROW(adapt_learned(random_frames(6, 4, 1), toy_adapter(4, 5, 1)), Error);
    EXPECT_THROW(adapt_learned(random_frames(2, 3, 1), toy_adapter(4, 5, 1)), Error);
}

TEST(AdaptationProperties, ShapePreservedAndIndependentOfInput) {
    const AdapterParams a = toy_adapter(6, 10, 4);
    for (std::size_t n = 1; n <= 10; ++n) {
        const auto e1 = random_frames(n, 6, n);
        const auto e2 = random_frames(n, 6, n + 50);
        const auto a1 = adapt_learned(e1, a);
        const auto a2 = adapt_learned(e2, a);
        EXPECT_EQ(a1.n_frames(), n);
        EXPECT_EQ(a1.dim(), 6u);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < 6; ++k) {
                EXPECT_NEAR(a1.row(i)[k] - e1.row(i)[k], a2.row(i)[k] - e2.row(i)[k], 1e-12);
            }
        }
        PositionEmbedParams p{std::vector<double>(6, 0.3), std::vector<double>(6, -0.1)};
        EXPECT_EQ(adapt_position(e1, p).n_frames(), n);
    }
}

TEST(InitAdapter, DefaultInitialization) {
    const AdapterParams a = init_adapter(768, 128, 42);
    EXPECT_EQ(a.scale, 0.1);
    EXPECT_EQ(a.embed_table.size(), 128u * 768u);
    double sum = 0.0, sq = 0.0;
    for (double v : a.embed_table) {
        sum += v;
        sq += v * v;
    }
    const double n = static_cast<double>(a.embed_table.size());
    const double stddev = std::sqrt(sq / n - (sum / n) * (sum / n));
    EXPECT_NEAR(stddev, 0.02, 0.002);

    const double bound = std::sqrt(6.0 / (768.0 + 768.0));
    for (double v : a.mlp_w1) ASSERT_LE(std::abs(v), bound);
    for (double v : a.mlp_w2) ASSERT_LE(std::abs(v), bound);
    for (double v : a.mlp_b1) EXPECT_EQ(v, 0.0);
    for (double v : a.mlp_b2) EXPECT_EQ(v, 0.0);
    for (double v : a.ln_gain) EXPECT_EQ(v, 1.0);
    for (double v : a.ln_bias) EXPECT_EQ(v, 0.0);
}

TEST(InitAdapter, DeterministicPerSeed) {
    const auto a = init_adapter(16, 8, 5);
    const auto b = init_adapter(16, 8, 5);
    const auto c = init_adapter(16, 8, 6);
    EXPECT_EQ(a.embed_table, b.embed_table);
    EXPECT_EQ(a.mlp_w1, b.mlp_w1);
    EXPECT_NE(a.mlp_w1, c.mlp_w1);
    EXPECT_THROW(init_adapter(0, 8, 1), Error);
}

TEST(AdaptationModes, NamesRoundTrip) {
    for (auto m : {AdaptationMode::TimestampAware, AdaptationMode::PositionEmbedding, AdaptationMode::LearnedAdapter}) {
        EXPECT_EQ(parse_mode(to_string(m)), m);
    }
    EXPECT_FALSE(parse_mode("bogus").has_value());
}

}  // namespace
}  // namespace lgttp
