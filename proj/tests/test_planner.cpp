// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "lgttp/planner.hpp"
#include "lgttp/rng.hpp"

namespace lgttp {
namespace {

TEST(AllocateRates, UniformLogits) {
    const std::vector<double> l(10, 0.3);
    const auto r = allocate_rates(l, 0.65);
    for (double v : r.raw) EXPECT_NEAR(v, 0.65, 1e-15);
    EXPECT_EQ(r.raw, r.clamped);
}

TEST(AllocateRates, SingleFrameGetsAlpha) {
    const std::vector<double> l{42.0};
    EXPECT_NEAR(allocate_rates(l, 0.3).raw[0], 0.3, 1e-15);
}

TEST(AllocateRates, TwoFrames) {
    const std::vector<double> l{std::log(3.0), 0.0};
    const auto r = allocate_rates(l, 0.5);
    EXPECT_NEAR(r.raw[0], 0.75, 1e-15);
    EXPECT_NEAR(r.raw[1], 0.25, 1e-15);
}

TEST(AllocateRates, ClampsOnlyTheStoredCopy) {
    const std::vector<double> l{10.0, 0.0, 0.0, 0.0};
    const auto r = allocate_rates(l, 0.9);
    EXPECT_GT(r.raw[0], 1.0);
    EXPECT_EQ(r.clamped[0], 1.0);
    EXPECT_NEAR(std::accumulate(r.raw.begin(), r.raw.end(), 0.0), 0.9 * 4, 1e-12);
}

TEST(AllocateRates, Errors) {
    const std::vector<double> ok{1.0, 2.0};
    EXPECT_THROW(allocate_rates(std::vector<double>{}, 0.5), Error);
    EXPECT_THROW(allocate_rates(ok, 0.0), Error);
    EXPECT_THROW(allocate_rates(ok, 1.0), Error);
    EXPECT_THROW(allocate_rates(std::vector<double>{1.0, NAN}, 0.5), Error);
    EXPECT_THROW(allocate_rates(std::vector<double>{INFINITY, 0.0}, 0.5), Error);
}

TEST(AllocateRates, LargeLogitsStayFinite) {
    const std::vector<double> l{1000.0, 999.0, -1000.0};
    const auto r = allocate_rates(l, 0.5);
    for (double v : r.raw) EXPECT_TRUE(std::isfinite(v));
}

TEST(TokenBudgets, Examples) {
    const std::vector<double> r{0.35, 1.0, 0.0, 0.65};
    EXPECT_EQ(token_budgets(r, 100, 10), (std::vector<std::size_t>{65, 10, 100, 35}));
    EXPECT_EQ(token_budgets(std::vector<double>{0.999}, 100, 10)[0], 10u);
    EXPECT_EQ(token_budgets(std::vector<double>{0.004}, 100, 10)[0], 100u);
    EXPECT_EQ(token_budgets(std::vector<double>{0.5}, 7, 1)[0], 4u);
}

TEST(TokenBudgets, Errors) {
    EXPECT_THROW(token_budgets(std::vector<double>{1.2}, 100, 10), Error);
    EXPECT_THROW(token_budgets(std::vector<double>{0.5}, 100, 0), Error);
    EXPECT_THROW(token_budgets(std::vector<double>{0.5}, 100, 101), Error);
}

TEST(SelectTokens, Examples) {
    EXPECT_EQ(select_tokens(std::vector<double>{0.1, 0.9, 0.5}, 2), (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(select_tokens(std::vector<double>{3, 1, 2}, 3), (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(select_tokens(std::vector<double>{1, 1, 1, 1}, 3), (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_TRUE(select_tokens(std::vector<double>{1, 2}, 0).empty());
    EXPECT_THROW(select_tokens(std::vector<double>{1, 2}, 3), Error);
}

TEST(EstimateCost, Examples) {
    const std::vector<std::size_t> half(4, 50);
    const auto c = estimate_cost(half, 100);
    EXPECT_EQ(c.retained_tokens, 200u);
    EXPECT_EQ(c.full_tokens, 400u);
    EXPECT_DOUBLE_EQ(c.token_ratio, 0.5);
    EXPECT_DOUBLE_EQ(c.attention_ratio, 0.25);
    EXPECT_NEAR(c.relative_flops_percent, 37.5, 1e-12);

    const std::vector<std::size_t> kept(8, 35);
    EXPECT_NEAR(estimate_cost(kept, 100).relative_flops_percent, 23.625, 1e-9);
    EXPECT_NEAR(estimate_cost(kept, 100, 1.0).relative_flops_percent, 35.0, 1e-9);
    EXPECT_NEAR(estimate_cost(kept, 100, 0.0).relative_flops_percent, 12.25, 1e-9);

    const std::vector<std::size_t> full(3, 100);
    EXPECT_DOUBLE_EQ(estimate_cost(full, 100).relative_flops_percent, 100.0);
    EXPECT_THROW(estimate_cost(full, 100, 1.5), Error);
}

TEST(PlannerConfig, DefaultsAndValidation) {
    PlannerConfig c;
    EXPECT_EQ(c.t_min(), 10u);
    EXPECT_NO_THROW(validate(c));
    c.alpha = 1.5;
    EXPECT_THROW(validate(c), Error);
    c = {};
    c.t_min_fraction = 0.0;
    EXPECT_THROW(validate(c), Error);
    c = {};
    c.lambda = -2;
    EXPECT_THROW(validate(c), Error);
    c = {};
    c.t_full = 7;
    c.t_min_fraction = 0.1;
    EXPECT_EQ(c.t_min(), 1u);
}

FrameEmbeddings same_rows(std::size_t n, std::size_t d) {
    std::vector<double> data(n * d, 0.0);
    for (std::size_t i = 0; i < n; ++i) data[i * d] = 1.0;
    return FrameEmbeddings(n, d, std::move(data));
}

TEST(BuildPlan, IdenticalFramesWithoutCuesAreUniform) {
    const auto plan = build_plan({"q", "a red car"}, same_rows(16, 8), ModelParams{}, PlannerConfig{});
    EXPECT_TRUE(plan.cues.empty());
    EXPECT_NEAR(plan.mean_raw_rate(), 0.65, 1e-12);
    for (auto b : plan.budgets) EXPECT_EQ(b, 35u);
    EXPECT_NEAR(plan.cost.token_ratio, 0.35, 1e-12);
    EXPECT_NEAR(plan.cost.relative_flops_percent, 23.625, 1e-9);
    for (std::size_t i = 0; i < 16; ++i) {
        ASSERT_EQ(plan.kept_tokens[i].size(), 35u);
        EXPECT_EQ(plan.kept_tokens[i].back(), 34u);
    }
}

TEST(BuildPlan, AfterCueKeepsMoreOfTheEnd) {
    // every frame aligned with the query, so only the temporal weights differ
    const QueryEmbedding q{{1, 0, 0, 0}};
    PlanInputs in;
    in.query_embedding = &q;
    const auto plan = build_plan({"q", "what happens after the goal"}, same_rows(12, 4), ModelParams{}, PlannerConfig{}, in);
    ASSERT_EQ(plan.cues.size(), 1u);
    EXPECT_EQ(plan.cues[0].category, Category::Subsequence);
    for (std::size_t i = 1; i < 12; ++i) EXPECT_GE(plan.budgets[i], plan.budgets[i - 1]);
    EXPECT_GT(plan.budgets.back(), plan.budgets.front());
    EXPECT_NEAR(plan.mean_raw_rate(), 0.65, 1e-12);

    PlannerConfig off;
    off.use_temporal_cues = false;
    const auto flat = build_plan({"q", "what happens after the goal"}, same_rows(12, 4), ModelParams{}, off, in);
    for (double w : flat.weights.weights) EXPECT_EQ(w, 1.0);
    for (auto b : flat.budgets) EXPECT_EQ(b, 35u);
}

TEST(BuildPlan, RelevantFramesArePrunedLess) {
    std::vector<double> data(6 * 2, 0.0);
    for (std::size_t i = 0; i < 6; ++i) data[i * 2 + (i == 2 ? 0 : 1)] = 1.0;
    const QueryEmbedding q{{1, 0}};
    PlanInputs in;
    in.query_embedding = &q;
    const auto plan = build_plan({"q", "find it"}, FrameEmbeddings(6, 2, data), ModelParams{}, PlannerConfig{}, in);
    for (std::size_t i = 0; i < 6; ++i) {
        if (i != 2) {
            EXPECT_GT(plan.budgets[2], plan.budgets[i]);
        }
    }
}

TEST(BuildPlan, TokenScoresSelectTopTokens) {
    PlannerConfig cfg;
    cfg.t_full = 4;
    cfg.t_min_fraction = 0.25;
    cfg.alpha = 0.5;
    const std::vector<std::vector<double>> scores{{0.1, 0.9, 0.5, 0.2}, {4, 3, 2, 1}};
    PlanInputs in;
    in.token_scores = &scores;
    const auto plan = build_plan({"q", "a red car"}, same_rows(2, 3), ModelParams{}, cfg, in);
    EXPECT_EQ(plan.budgets, (std::vector<std::size_t>{2, 2}));
    EXPECT_EQ(plan.kept_tokens[0], (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(plan.kept_tokens[1], (std::vector<std::size_t>{0, 1}));

    const std::vector<std::vector<double>> bad{{1, 2, 3, 4}};
    in.token_scores = &bad;
    EXPECT_THROW(build_plan({"q", "a red car"}, same_rows(2, 3), ModelParams{}, cfg, in), Error);
}

TEST(BuildPlan, Errors) {
    EXPECT_THROW(build_plan({"q", ""}, same_rows(2, 3), ModelParams{}, PlannerConfig{}), Error);
    PlannerConfig cfg;
    cfg.mode = AdaptationMode::PositionEmbedding;
    EXPECT_THROW(build_plan({"q", "a car"}, same_rows(2, 3), ModelParams{}, cfg), Error);
    const QueryEmbedding q{{1, 0}};
    PlanInputs in;
    in.query_embedding = &q;
    EXPECT_THROW(build_plan({"q", "a car"}, same_rows(2, 3), ModelParams{}, PlannerConfig{}, in), Error);
}

TEST(PlannerProperties, RateMassBudgetBoundsAndShiftInvariance) {
    Rng rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(200);
        const double alpha = rng.uniform(0.05, 0.95);
        const double spread = rng.uniform(0.0, 5.0);
        std::vector<double> l(n);
        for (double& v : l) v = rng.normal(0.0, spread);
        const auto r = allocate_rates(l, alpha);
        const double mean = std::accumulate(r.raw.begin(), r.raw.end(), 0.0) / static_cast<double>(n);
        EXPECT_NEAR(mean, alpha, 1e-9);

        const double c = rng.uniform(-50, 50);
        std::vector<double> shifted(l);
        for (double& v : shifted) v += c;
        const auto rs = allocate_rates(shifted, alpha);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(rs.raw[i], r.raw[i], 1e-9);

        const std::size_t t_full = 1 + rng.below(300);
        const std::size_t t_min = 1 + rng.below(t_full);
        const auto b = token_budgets(r.clamped, t_full, t_min);
        for (auto v : b) {
            EXPECT_GE(v, t_min);
            EXPECT_LE(v, t_full);
        }
        const auto cost = estimate_cost(b, t_full);
        EXPECT_DOUBLE_EQ(cost.attention_ratio, cost.token_ratio * cost.token_ratio);
        EXPECT_GT(cost.token_ratio, 0.0);
        EXPECT_LE(cost.token_ratio, 1.0);
    }
}

TEST(PlannerProperties, HigherLogitMeansHigherRateAndLowerBudget) {
    Rng rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 2 + rng.below(50);
        std::vector<double> l(n);
        for (double& v : l) v = rng.normal();
        const auto r = allocate_rates(l, 0.5);
        const auto b = token_budgets(r.clamped, 100, 10);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (l[i] > l[j]) {
                    EXPECT_GT(r.raw[i], r.raw[j]);
                    EXPECT_LE(b[i], b[j]);
                }
            }
        }
    }
}

TEST(PlannerProperties, SelectionKeepsExactlyBudgetSortedAndMaximal) {
    Rng rng(29);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t m = 1 + rng.below(64);
        std::vector<double> s(m);
        for (double& v : s) v = static_cast<double>(rng.below(8));
        const std::size_t k = rng.below(m + 1);
        const auto kept = select_tokens(s, k);
        ASSERT_EQ(kept.size(), k);
        EXPECT_TRUE(std::is_sorted(kept.begin(), kept.end()));
        std::vector<bool> in(m, false);
        for (auto i : kept) in[i] = true;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (in[i] && !in[j]) {
                    EXPECT_TRUE(s[i] > s[j] || (s[i] == s[j] && i < j));
                }
            }
        }
    }
}

}  // namespace
}  // namespace lgttp
