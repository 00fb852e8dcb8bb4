// SPDX-License-Identifier: Apache-2.0
#pragma once

// Turns temporal relevance into per-frame pruning rates and token budgets,
// selects the kept tokens and estimates the compute cost of the plan.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lgttp/adaptation.hpp"
#include "lgttp/error.hpp"
#include "lgttp/query_parser.hpp"
#include "lgttp/relevance.hpp"
#include "lgttp/trainer.hpp"
#include "lgttp/weighting.hpp"

namespace lgttp {

struct PlannerConfig {
    double alpha = 0.65;           // target mean pruning rate
    std::size_t t_full = 100;      // tokens per frame before pruning
    double t_min_fraction = 0.10;  // T_min = ceil(t_min_fraction * t_full)
    double lambda = kDefaultLambda;
    AdaptationMode mode = AdaptationMode::TimestampAware;
    double cost_mu = 0.5;  // linear share of the cost model
    bool use_temporal_cues = true;
    std::uint64_t embed_seed = 0;

    std::size_t t_min() const {
        return static_cast<std::size_t>(std::ceil(t_min_fraction * static_cast<double>(t_full) - 1e-9));
    }
};

inline void validate(const PlannerConfig& c) {
    require(c.alpha > 0.0 && c.alpha < 1.0, "alpha must lie in (0, 1)");
    require(c.t_full >= 1, "t_full must be positive");
    require(c.t_min_fraction > 0.0 && c.t_min_fraction <= 1.0, "t_min_fraction must lie in (0, 1]");
    require(c.lambda > 0.0 && std::isfinite(c.lambda), "lambda must be positive");
    require(c.cost_mu >= 0.0 && c.cost_mu <= 1.0, "cost_mu must lie in [0, 1]");
    require(c.t_min() >= 1 && c.t_min() <= c.t_full, "T_min must lie in [1, t_full]");
}

struct RateAllocation {
    std::vector<double> raw;
    std::vector<double> clamped;
};

/// r = alpha * N * softmax(logits), max-subtracted; clamped copy in [0, 1].
inline RateAllocation allocate_rates(std::span<const double> logits, double alpha) {
    require(!logits.empty(), "rate allocation needs at least one frame");
    require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    for (double v : logits) require(std::isfinite(v), "relevance scores must be finite");
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> expv(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        expv[i] = std::exp(logits[i] - peak);
        total += expv[i];
    }
    const double mass = alpha * static_cast<double>(logits.size());
    RateAllocation out;
    out.raw.resize(logits.size());
    out.clamped.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out.raw[i] = mass * expv[i] / total;
        out.clamped[i] = std::clamp(out.raw[i], 0.0, 1.0);
    }
    return out;
}

/// T_i = max(T_min, ceil((1 - r_i) * T_full)).
inline std::vector<std::size_t> token_budgets(std::span<const double> rates, std::size_t t_full, std::size_t t_min) {
    require(t_min >= 1 && t_min <= t_full, "T_min must lie in [1, T_full]");
    std::vector<std::size_t> out(rates.size());
    const double full = static_cast<double>(t_full);
    for (std::size_t i = 0; i < rates.size(); ++i) {
        require(rates[i] >= 0.0 && rates[i] <= 1.0, "rates must lie in [0, 1]");
        // relative guard so that e.g. (1 - 0.35) * 100 = 65.00000000000001 stays 65
        const double keep = (1.0 - rates[i]) * full;
        const auto ceiled = static_cast<std::size_t>(std::ceil(keep - 1e-9 * full));
        out[i] = std::clamp(ceiled, t_min, t_full);
    }
    return out;
}

/// Indices of the `budget` highest scores (ties to the lower index), ascending.
inline std::vector<std::size_t> select_tokens(std::span<const double> token_scores, std::size_t budget) {
    require(budget <= token_scores.size(), "token budget exceeds the number of tokens");
    std::vector<std::size_t> idx(token_scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return token_scores[a] > token_scores[b]; });
    idx.resize(budget);
    std::sort(idx.begin(), idx.end());
    return idx;
}

struct CostEstimate {
    std::size_t retained_tokens = 0;
    std::size_t full_tokens = 0;
    double token_ratio = 0.0;
    double attention_ratio = 0.0;
    double relative_flops_percent = 0.0;
    double mu = 0.5;
};

/// Mixed cost model: 100 * (mu * ratio + (1 - mu) * ratio^2), the quadratic
/// term standing for attention.
inline CostEstimate estimate_cost(std::span<const std::size_t> budgets, std::size_t t_full, double mu = 0.5) {
    require(!budgets.empty() && t_full >= 1, "cost estimate needs frames and a positive t_full");
    require(mu >= 0.0 && mu <= 1.0, "cost_mu must lie in [0, 1]");
    CostEstimate c;
    c.mu = mu;
    c.retained_tokens = std::accumulate(budgets.begin(), budgets.end(), std::size_t{0});
    c.full_tokens = budgets.size() * t_full;
    c.token_ratio = static_cast<double>(c.retained_tokens) / static_cast<double>(c.full_tokens);
    c.attention_ratio = c.token_ratio * c.token_ratio;
    c.relative_flops_percent = 100.0 * (mu * c.token_ratio + (1.0 - mu) * c.attention_ratio);
    return c;
}

struct PruningPlan {
    std::string query_id;
    std::vector<TemporalCue> cues;
    WeightVector weights;
    RelevanceScores scores;
    std::vector<double> raw_rates;
    std::vector<double> rates;
    std::vector<std::size_t> budgets;
    std::vector<std::vector<std::size_t>> kept_tokens;
    CostEstimate cost;
    PlannerConfig config;

    double mean_raw_rate() const {
        return std::accumulate(raw_rates.begin(), raw_rates.end(), 0.0) / static_cast<double>(raw_rates.size());
    }
};

struct PlanInputs {
    const MarkerLexicon* lexicon = nullptr;             // default lexicon when null
    const QueryEmbedding* query_embedding = nullptr;    // bundled embedder when null
    const std::vector<std::vector<double>>* token_scores = nullptr;  // N x t_full, uniform when null
};

/// Full pipeline: cues -> weights -> adaptation -> L_base -> L_temp -> rates
/// -> budgets -> kept tokens -> cost. Rates are allocated from -L_temp so
/// that more relevant frames are pruned less.
inline PruningPlan build_plan(const Query& q, const FrameEmbeddings& e, const ModelParams& params,
                              const PlannerConfig& cfg, const PlanInputs& inputs = {}) {
    validate(cfg);
    validate(q);
    require(params.mode == cfg.mode, "parameter mode does not match planner mode");
    const std::size_t n = e.n_frames();

    PruningPlan plan;
    plan.query_id = q.id;
    plan.config = cfg;
    const MarkerLexicon& lex = inputs.lexicon != nullptr ? *inputs.lexicon : default_lexicon();
    plan.cues = extract_cues(q, lex);
    plan.weights = cfg.use_temporal_cues ? weights_for_cues(plan.cues, n, cfg.lambda) : uniform_weights(n);
    plan.weights.lambda = cfg.lambda;

    QueryEmbedding qe;
    if (inputs.query_embedding != nullptr) {
        qe = *inputs.query_embedding;
    } else {
        qe = embed_query(q.text, e.dim(), cfg.embed_seed);
    }
    validate(qe);

    const FrameEmbeddings adapted = adapt(e, params);
    plan.scores.l_base = base_relevance(adapted, qe, params.relevance);
    plan.scores.l_temp = apply_temporal_weighting(plan.scores.l_base, plan.weights);

    std::vector<double> pruning_logits(n);
    for (std::size_t i = 0; i < n; ++i) pruning_logits[i] = -plan.scores.l_temp[i];
    auto rates = allocate_rates(pruning_logits, cfg.alpha);
    plan.raw_rates = std::move(rates.raw);
    plan.rates = std::move(rates.clamped);
    plan.budgets = token_budgets(plan.rates, cfg.t_full, cfg.t_min());

    plan.kept_tokens.resize(n);
    if (inputs.token_scores != nullptr) {
        require(inputs.token_scores->size() == n, "token score matrix must have one row per frame");
    }
    const std::vector<double> uniform_scores(cfg.t_full, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& scores = inputs.token_scores != nullptr ? (*inputs.token_scores)[i] : uniform_scores;
        require(scores.size() == cfg.t_full, "token score rows must have t_full entries");
        plan.kept_tokens[i] = select_tokens(scores, plan.budgets[i]);
    }
    plan.cost = estimate_cost(plan.budgets, cfg.t_full, cfg.cost_mu);
    return plan;
}

}  // namespace lgttp
