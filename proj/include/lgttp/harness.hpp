// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic planted-window scenarios and budget-matched baseline allocators
// used to compare temporal pruning against uniform, random and hard
// keyframe-style allocation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lgttp/error.hpp"
#include "lgttp/planner.hpp"
#include "lgttp/rng.hpp"

namespace lgttp {

enum class MarkerKind { Precedence, Subsequence, Cooccurrence, None };

inline constexpr std::string_view to_string(MarkerKind k) {
    switch (k) {
        case MarkerKind::Precedence: return "precedence";
        case MarkerKind::Subsequence: return "subsequence";
        case MarkerKind::Cooccurrence: return "cooccurrence";
        case MarkerKind::None: return "none";
    }
    return "unknown";
}

inline std::optional<MarkerKind> parse_marker_kind(std::string_view name) {
    if (name == "precedence") return MarkerKind::Precedence;
    if (name == "subsequence") return MarkerKind::Subsequence;
    if (name == "cooccurrence") return MarkerKind::Cooccurrence;
    if (name == "none") return MarkerKind::None;
    return std::nullopt;
}

enum class Strategy { LGTTP, UniformRate, RandomRate, HardTopK, LGTTPNoCues };

inline constexpr std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::LGTTP: return "lgttp";
        case Strategy::UniformRate: return "uniform_rate";
        case Strategy::RandomRate: return "random_rate";
        case Strategy::HardTopK: return "hard_topk";
        case Strategy::LGTTPNoCues: return "lgttp_no_cues";
    }
    return "unknown";
}

inline std::optional<Strategy> parse_strategy(std::string_view name) {
    for (auto s : {Strategy::LGTTP, Strategy::UniformRate, Strategy::RandomRate, Strategy::HardTopK, Strategy::LGTTPNoCues}) {
        if (to_string(s) == name) return s;
    }
    return std::nullopt;
}

/// Half-open frame range [begin, end).
struct FrameWindow {
    std::size_t begin = 0;
    std::size_t end = 0;

    bool contains(std::size_t i) const { return i >= begin && i < end; }
    std::size_t size() const { return end - begin; }
};

struct Scenario {
    std::size_t n_frames = 0;
    std::size_t dim = 0;
    FrameWindow window;
    MarkerKind marker_kind = MarkerKind::None;
    std::string query_text;
    FrameEmbeddings embeddings;
    QueryEmbedding query_embedding;
    std::uint64_t seed = 0;
    double signal_strength = 0.0;
};

namespace detail {

inline std::vector<double> random_unit(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double n = 0.0;
    while (n == 0.0) {
        for (double& x : v) x = rng.normal();
        n = norm(v);
    }
    for (double& x : v) x /= n;
    return v;
}

inline std::string query_template(MarkerKind kind, Rng& rng) {
    static constexpr std::string_view kEvents[] = {
        "the goal is scored", "the speech", "talking to the coach", "the door opens",
        "the crowd cheers",   "the car stops", "the dog jumps",     "the lights turn on",
    };
    const std::string event(kEvents[rng.below(std::size(kEvents))]);
    switch (kind) {
        case MarkerKind::Precedence: return "what happens before " + event;
        case MarkerKind::Subsequence: return "what happens after " + event;
        case MarkerKind::Cooccurrence: return "what happens during " + event;
        case MarkerKind::None: return "find " + event;
    }
    return event;
}

}  // namespace detail

/// Window aligned with the marker's emphasis: first third for precedence,
/// final third for subsequence, central third for co-occurrence, a seeded
/// position for none.
inline FrameWindow matched_window(MarkerKind kind, std::size_t n, std::uint64_t seed) {
    require(n >= 3, "matched windows need at least three frames");
    const std::size_t w = n / 3;
    switch (kind) {
        case MarkerKind::Precedence: return {0, w};
        case MarkerKind::Subsequence: return {n - w, n};
        case MarkerKind::Cooccurrence: return {(n - w) / 2, (n - w) / 2 + w};
        case MarkerKind::None: {
            Rng rng(mix_seed(seed, 0x77));
            const std::size_t start = rng.below(n - w + 1);
            return {start, start + w};
        }
    }
    return {0, w};
}

/// In-window rows are normalize(s * u + (1 - s) * noise), the rest
/// normalize(noise), with u the unit query direction and noise an isotropic
/// Gaussian direction.
inline Scenario gen_scenario(std::size_t n, std::size_t dim, FrameWindow window, MarkerKind kind, double signal_strength,
                             std::uint64_t seed) {
    require(n >= 1, "scenario needs at least one frame");
    require(dim >= 2, "scenario dim must be at least 2");
    require(window.begin < window.end && window.end <= n, "window must be a non-empty range inside the frames");
    require(signal_strength >= 0.0 && signal_strength <= 1.0, "signal strength must lie in [0, 1]");

    Rng rng(seed);
    Scenario s;
    s.n_frames = n;
    s.dim = dim;
    s.window = window;
    s.marker_kind = kind;
    s.seed = seed;
    s.signal_strength = signal_strength;
    const auto u = detail::random_unit(rng, dim);
    s.query_text = detail::query_template(kind, rng);

    std::vector<double> data(n * dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto noise = detail::random_unit(rng, dim);
        double* row = data.data() + i * dim;
        if (!window.contains(i)) {
            std::copy(noise.begin(), noise.end(), row);
            continue;
        }
        if (signal_strength == 1.0) {
            std::copy(u.begin(), u.end(), row);
            continue;
        }
        for (std::size_t k = 0; k < dim; ++k) row[k] = signal_strength * u[k] + (1.0 - signal_strength) * noise[k];
        const double len = norm(std::span<const double>(row, dim));
        if (len > 0.0) {
            for (std::size_t k = 0; k < dim; ++k) row[k] /= len;
        }
    }
    s.embeddings = FrameEmbeddings(n, dim, std::move(data));
    s.query_embedding = QueryEmbedding{u};
    return s;
}

struct StrategyReport {
    Strategy strategy = Strategy::LGTTP;
    double window_retention = 0.0;
    double token_ratio = 0.0;
    double mean_rate = 0.0;  // 1 - token_ratio: effective mean pruning rate
    std::vector<std::size_t> per_frame_budgets;
};

/// Share of all retained tokens that fall inside the window.
inline double window_retention(std::span<const std::size_t> budgets, FrameWindow window, std::size_t t_full) {
    require(window.begin < window.end && window.end <= budgets.size(), "window outside budget vector");
    std::size_t inside = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < budgets.size(); ++i) {
        require(budgets[i] <= t_full, "budget exceeds t_full");
        total += budgets[i];
        if (window.contains(i)) inside += budgets[i];
    }
    require(total > 0, "window retention is undefined for all-zero budgets");
    return static_cast<double>(inside) / static_cast<double>(total);
}

/// Moves budgets one token at a time, cycling over frames, until they sum to
/// `target` or every frame sits at its bound.
inline void match_total(std::vector<std::size_t>& budgets, std::size_t target, std::size_t lo, std::size_t hi) {
    std::size_t total = std::accumulate(budgets.begin(), budgets.end(), std::size_t{0});
    while (total != target) {
        bool moved = false;
        for (auto& b : budgets) {
            if (total == target) break;
            if (total < target && b < hi) {
                ++b;
                ++total;
                moved = true;
            } else if (total > target && b > lo) {
                --b;
                --total;
                moved = true;
            }
        }
        if (!moved) break;
    }
}

namespace detail {

inline PruningPlan scenario_plan(const Scenario& s, const PlannerConfig& cfg) {
    const Query q{"scenario-" + std::to_string(s.seed), s.query_text};
    const ModelParams params = ModelParams::identity(cfg.mode, s.dim, std::max<std::size_t>(kDefaultMaxFrames, s.n_frames));
    PlanInputs inputs;
    inputs.query_embedding = &s.query_embedding;
    return build_plan(q, s.embeddings, params, cfg, inputs);
}

}  // namespace detail

/// Budgets under the named policy. Baselines are matched to the LGTTP plan's
/// total token count; HardTopK keeps ceil((1 - alpha) N) whole frames instead.
inline StrategyReport run_strategy(const Scenario& s, Strategy strategy, const PlannerConfig& cfg) {
    validate(cfg);
    const std::size_t n = s.n_frames;
    const PruningPlan plan = detail::scenario_plan(s, cfg);
    const std::size_t target = plan.cost.retained_tokens;

    std::vector<std::size_t> budgets;
    switch (strategy) {
        case Strategy::LGTTP: budgets = plan.budgets; break;
        case Strategy::LGTTPNoCues: {
            PlannerConfig ablated = cfg;
            ablated.use_temporal_cues = false;
            budgets = detail::scenario_plan(s, ablated).budgets;
            break;
        }
        case Strategy::UniformRate: {
            budgets.assign(n, std::min(cfg.t_full, target / n));
            match_total(budgets, target, 0, cfg.t_full);
            break;
        }
        case Strategy::RandomRate: {
            Rng rng(mix_seed(s.seed, 0x52));
            std::vector<double> logits(n);
            for (double& v : logits) v = rng.normal();
            const auto rates = allocate_rates(logits, cfg.alpha);
            budgets = token_budgets(rates.clamped, cfg.t_full, cfg.t_min());
            match_total(budgets, target, cfg.t_min(), cfg.t_full);
            break;
        }
        case Strategy::HardTopK: {
            const auto keep = static_cast<std::size_t>(std::ceil((1.0 - cfg.alpha) * static_cast<double>(n) - 1e-9));
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return plan.scores.l_temp[a] > plan.scores.l_temp[b];
            });
            budgets.assign(n, 0);
            for (std::size_t k = 0; k < std::min(keep, n); ++k) budgets[order[k]] = cfg.t_full;
            break;
        }
    }

    StrategyReport r;
    r.strategy = strategy;
    r.window_retention = window_retention(budgets, s.window, cfg.t_full);
    const auto retained = std::accumulate(budgets.begin(), budgets.end(), std::size_t{0});
    r.token_ratio = static_cast<double>(retained) / static_cast<double>(n * cfg.t_full);
    r.mean_rate = 1.0 - r.token_ratio;
    r.per_frame_budgets = std::move(budgets);
    return r;
}

struct CompareOptions {
    std::size_t n_scenarios = 100;
    std::size_t n_frames = 64;
    std::size_t dim = 64;
    double signal_strength = 0.8;
    std::uint64_t seed = 0;
    std::vector<MarkerKind> kinds{MarkerKind::Precedence, MarkerKind::Subsequence, MarkerKind::Cooccurrence, MarkerKind::None};
    std::vector<Strategy> strategies{Strategy::LGTTP, Strategy::UniformRate, Strategy::RandomRate, Strategy::HardTopK,
                                     Strategy::LGTTPNoCues};
    PlannerConfig planner;
};

/// Seed of scenario `index` for marker kind `kind` under a master seed.
inline std::uint64_t scenario_seed(std::uint64_t master, MarkerKind kind, std::size_t index) {
    return mix_seed(mix_seed(master, static_cast<std::uint64_t>(kind)), index);
}

inline Scenario matched_scenario(const CompareOptions& opt, MarkerKind kind, std::size_t index) {
    const auto seed = scenario_seed(opt.seed, kind, index);
    return gen_scenario(opt.n_frames, opt.dim, matched_window(kind, opt.n_frames, seed), kind, opt.signal_strength, seed);
}

/// Per-scenario reports, indexed [kind][strategy][scenario].
inline std::vector<std::vector<std::vector<StrategyReport>>> evaluate(const CompareOptions& opt) {
    require(opt.n_scenarios >= 1, "need at least one scenario");
    std::vector<std::vector<std::vector<StrategyReport>>> out(
        opt.kinds.size(), std::vector<std::vector<StrategyReport>>(opt.strategies.size()));
    for (std::size_t k = 0; k < opt.kinds.size(); ++k) {
        for (std::size_t i = 0; i < opt.n_scenarios; ++i) {
            const Scenario s = matched_scenario(opt, opt.kinds[k], i);
            for (std::size_t t = 0; t < opt.strategies.size(); ++t) {
                out[k][t].push_back(run_strategy(s, opt.strategies[t], opt.planner));
            }
        }
    }
    return out;
}

struct ReportRow {
    Strategy strategy;
    MarkerKind marker_kind;
    std::size_t n_frames;
    double alpha;
    double mean_window_retention;
    double std_window_retention;  // sample standard deviation
    double mean_token_ratio;
};

inline std::vector<ReportRow> compare(const CompareOptions& opt) {
    const auto results = evaluate(opt);
    std::vector<ReportRow> rows;
    for (std::size_t t = 0; t < opt.strategies.size(); ++t) {
        for (std::size_t k = 0; k < opt.kinds.size(); ++k) {
            const auto& reports = results[k][t];
            const double count = static_cast<double>(reports.size());
            double mean = 0.0;
            double ratio = 0.0;
            for (const auto& r : reports) {
                mean += r.window_retention;
                ratio += r.token_ratio;
            }
            mean /= count;
            ratio /= count;
            double var = 0.0;
            for (const auto& r : reports) var += (r.window_retention - mean) * (r.window_retention - mean);
            const double stddev = reports.size() > 1 ? std::sqrt(var / (count - 1.0)) : 0.0;
            rows.push_back({opt.strategies[t], opt.kinds[k], opt.n_frames, opt.planner.alpha, mean, stddev, ratio});
        }
    }
    return rows;
}

}  // namespace lgttp
