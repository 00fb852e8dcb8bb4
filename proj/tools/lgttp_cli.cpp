// SPDX-License-Identifier: Apache-2.0
//
// lgttp: command-line entry points for cue parsing, plan construction,
// simulation, adapter training and gradient checking.
//
// Exit codes: 0 success, 1 internal/assertion failure, 2 invalid input or
// flags, 3 I/O failure.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "lgttp/lgttp.hpp"

namespace {

using lgttp::ErrorCode;

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    lgttp::detail::write_text(path, text);
}

lgttp::AdaptationMode mode_or_throw(const std::string& name) {
    const auto mode = lgttp::parse_mode(name);
    lgttp::require(mode.has_value(), "--mode must be one of timestamp, position, adapter");
    return *mode;
}

struct ParseArgs {
    std::string query;
    std::string lexicon;
    std::string id = "q0";
};

int cmd_parse(const ParseArgs& a) {
    const lgttp::Query q{a.id, a.query};
    const lgttp::MarkerLexicon lex = a.lexicon.empty() ? lgttp::default_lexicon() : lgttp::load_lexicon(a.lexicon);
    nlohmann::json cues = nlohmann::json::array();
    for (const auto& c : lgttp::extract_cues(q, lex)) cues.push_back(lgttp::to_json(c));
    const nlohmann::json doc = {{"query_id", q.id}, {"query", q.text}, {"cues", cues}};
    std::cout << doc.dump(2) << '\n';
    return 0;
}

struct PlanArgs {
    std::string query;
    std::string id = "q0";
    std::string embeddings;
    std::string config;
    std::string params;
    std::string out;
    std::string lexicon;
    std::string mode = "timestamp";
    double alpha = 0.65;
    double tmin_frac = 0.10;
    double lambda = 2.0;
    double mu = 0.5;
    std::size_t t_full = 100;
    std::uint64_t seed = 0;
    bool untrained = false;
    bool embed_query = false;
    bool no_cues = false;
};

int cmd_plan(const PlanArgs& a, const CLI::App& sub) {
    lgttp::PlannerConfig cfg;
    if (!a.config.empty()) {
        std::ifstream in(a.config);
        if (!in) lgttp::fail(ErrorCode::IoError, "cannot open config '" + a.config + "'");
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            lgttp::fail(ErrorCode::InvalidInput, std::string("config is not valid JSON: ") + e.what());
        }
        cfg = lgttp::planner_config_from_json(doc);
    }
    if (sub.count("--alpha") || a.config.empty()) cfg.alpha = a.alpha;
    if (sub.count("--tmin-frac") || a.config.empty()) cfg.t_min_fraction = a.tmin_frac;
    if (sub.count("--lambda") || a.config.empty()) cfg.lambda = a.lambda;
    if (sub.count("--mu") || a.config.empty()) cfg.cost_mu = a.mu;
    if (sub.count("--t-full") || a.config.empty()) cfg.t_full = a.t_full;
    if (sub.count("--mode") || a.config.empty()) cfg.mode = mode_or_throw(a.mode);
    if (sub.count("--seed")) {
        cfg.embed_seed = a.seed;
    } else if (a.config.empty()) {
        cfg.embed_seed = lgttp::default_seed(0);
    }
    if (a.no_cues) cfg.use_temporal_cues = false;
    lgttp::validate(cfg);

    const auto file = lgttp::read_embeddings(a.embeddings);
    const auto& e = file.embeddings;

    lgttp::ModelParams params = lgttp::ModelParams::identity(cfg.mode, e.dim(), std::max(lgttp::kDefaultMaxFrames, e.n_frames()));
    if (!a.params.empty()) {
        auto ck = lgttp::read_checkpoint(a.params);
        lgttp::require(ck.params.mode == cfg.mode, "checkpoint mode '" + std::string(lgttp::to_string(ck.params.mode)) +
                                                       "' does not match --mode");
        params = std::move(ck.params);
    } else if (cfg.mode != lgttp::AdaptationMode::TimestampAware && !a.untrained) {
        lgttp::fail(ErrorCode::InvalidInput, "--mode position/adapter needs --params FILE or --untrained");
    }

    const lgttp::MarkerLexicon lex = a.lexicon.empty() ? lgttp::default_lexicon() : lgttp::load_lexicon(a.lexicon);
    lgttp::PlanInputs inputs;
    inputs.lexicon = &lex;
    if (file.query && !a.embed_query) inputs.query_embedding = &*file.query;

    const auto plan = lgttp::build_plan(lgttp::Query{a.id, a.query}, e, params, cfg, inputs);
    const std::string json = lgttp::to_json(plan).dump(2) + "\n";

    std::ostringstream summary;
    summary << std::fixed << std::setprecision(6) << "frames=" << e.n_frames() << " mean_raw_rate=" << plan.mean_raw_rate()
            << " token_ratio=" << plan.cost.token_ratio << " relative_flops_percent=" << std::setprecision(3)
            << plan.cost.relative_flops_percent << '\n';
    if (a.out.empty() || a.out == "-") {
        std::cout << json;
        std::cerr << summary.str();
    } else {
        lgttp::detail::write_text(a.out, json);
        std::cout << summary.str();
    }
    return 0;
}

struct SimulateArgs {
    std::size_t scenarios = 100;
    std::size_t frames = 64;
    std::size_t dim = 64;
    double alpha = 0.65;
    double signal = 0.8;
    std::uint64_t seed = 0;
    std::string marker;
    std::string strategy;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a, const CLI::App& sub) {
    lgttp::CompareOptions opt;
    opt.n_scenarios = a.scenarios;
    opt.n_frames = a.frames;
    opt.dim = a.dim;
    opt.signal_strength = a.signal;
    opt.seed = sub.count("--seed") ? a.seed : lgttp::default_seed(0);
    opt.planner.alpha = a.alpha;
    lgttp::require(a.scenarios >= 1, "--scenarios must be at least 1");
    lgttp::require(a.frames >= 3, "--frames must be at least 3");
    lgttp::validate(opt.planner);
    if (!a.marker.empty()) {
        const auto kind = lgttp::parse_marker_kind(a.marker);
        lgttp::require(kind.has_value(), "--marker must be precedence, subsequence, cooccurrence or none");
        opt.kinds = {*kind};
    }
    if (!a.strategy.empty()) {
        const auto s = lgttp::parse_strategy(a.strategy);
        lgttp::require(s.has_value(), "unknown --strategy '" + a.strategy + "'");
        opt.strategies = {*s};
    }
    write_output(a.out, lgttp::report_csv(lgttp::compare(opt)));
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string mode = "adapter";
    int epochs = 20;
    double lr = 1e-4;
    double wd = 0.01;
    std::uint64_t seed = 0;
    std::size_t batch_size = 1;
    std::size_t max_frames = lgttp::kDefaultMaxFrames;
    std::string out;
    std::string loss_csv;
};

int cmd_train(const TrainArgs& a, const CLI::App& sub) {
    lgttp::TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.learning_rate = a.lr;
    cfg.weight_decay = a.wd;
    cfg.seed = sub.count("--seed") ? a.seed : lgttp::default_seed(0);
    cfg.batch_size = a.batch_size;
    cfg.max_frames = a.max_frames;
    lgttp::validate(cfg);
    const auto mode = mode_or_throw(a.mode);

    const auto data = lgttp::read_dataset(a.data);
    const auto result = lgttp::train(data, mode, cfg);

    lgttp::Checkpoint ck{result.params, cfg.seed, cfg};
    lgttp::write_checkpoint(a.out, ck);
    lgttp::detail::write_text(a.loss_csv.empty() ? a.out + ".loss.csv" : a.loss_csv, lgttp::loss_csv(result));
    std::cout << std::setprecision(6) << "samples=" << data.size() << " epochs=" << cfg.epochs
              << " initial_loss=" << result.loss_history.front() << " final_loss=" << result.loss_history.back()
              << " best_loss=" << result.best_loss.back() << '\n';
    return 0;
}

struct GradcheckArgs {
    std::string mode = "adapter";
    std::size_t dim = 8;
    std::size_t frames = 3;
    std::uint64_t seed = 0;
    double epsilon = 1e-5;
    bool corrupt = false;
};

int cmd_gradcheck(const GradcheckArgs& a, const CLI::App& sub) {
    const auto mode = mode_or_throw(a.mode);
    const std::uint64_t seed = sub.count("--seed") ? a.seed : lgttp::default_seed(0);
    const auto prob = lgttp::toy_gradcheck_problem(mode, a.dim, a.frames, seed);
    lgttp::GradCheckOptions opt;
    opt.epsilon = a.epsilon;
    opt.seed = seed;
    if (a.corrupt) opt.corrupt_gradient = 1.0;
    const auto r = lgttp::grad_check(prob.params, prob.sample, opt);
    const bool ok = r.max_relative_error < 1e-4;
    std::cout << "mode=" << lgttp::to_string(mode) << " coords=" << r.coords_checked << " max_relative_error="
              << std::setprecision(6) << std::scientific << r.max_relative_error << " worst=" << r.worst_tensor << ' '
              << (ok ? "PASS" : "FAIL") << '\n';
    return ok ? 0 : 1;
}

struct ScenarioArgs {
    std::string out;
    std::size_t frames = 16;
    std::size_t dim = 32;
    std::string marker = "subsequence";
    double signal = 0.8;
    std::uint64_t seed = 0;
};

int cmd_make_scenario(const ScenarioArgs& a) {
    const auto kind = lgttp::parse_marker_kind(a.marker);
    lgttp::require(kind.has_value(), "--marker must be precedence, subsequence, cooccurrence or none");
    const auto s = lgttp::gen_scenario(a.frames, a.dim, lgttp::matched_window(*kind, a.frames, a.seed), *kind, a.signal, a.seed);
    lgttp::write_embeddings(a.out, s.embeddings, s.query_embedding);
    std::cout << "query=\"" << s.query_text << "\" window=[" << s.window.begin << "," << s.window.end << ")\n";
    return 0;
}

struct DatasetArgs {
    std::string out;
    std::size_t samples = 100;
    std::size_t frames = 32;
    std::size_t dim = 32;
    double signal = 0.8;
    std::uint64_t seed = 0;
};

int cmd_make_dataset(const DatasetArgs& a) {
    const auto data = lgttp::synthetic_dataset(a.samples, a.frames, a.dim, a.signal, a.seed);
    lgttp::write_dataset(a.out, data);
    std::cout << "wrote " << data.size() << " samples to " << a.out << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Language-guided temporal token pruning"};
    app.set_version_flag("--version", std::string(lgttp::kVersion));
    app.require_subcommand(1);

    ParseArgs parse_args;
    auto* parse = app.add_subcommand("parse", "Extract temporal cues from a query as JSON");
    parse->add_option("--query", parse_args.query, "Query text")->required();
    parse->add_option("--lexicon", parse_args.lexicon, "Lexicon JSON file");
    parse->add_option("--id", parse_args.id, "Query identifier");

    PlanArgs plan_args;
    auto* plan = app.add_subcommand("plan", "Build a token-retention plan");
    plan->add_option("--query", plan_args.query, "Query text")->required();
    plan->add_option("--id", plan_args.id, "Query identifier");
    plan->add_option("--embeddings", plan_args.embeddings, "LGTE embedding file")->required();
    plan->add_option("--config", plan_args.config, "Run configuration JSON; flags given explicitly override it");
    plan->add_option("--alpha", plan_args.alpha, "Mean pruning rate in (0,1)");
    plan->add_option("--tmin-frac", plan_args.tmin_frac, "T_min as a fraction of t_full");
    plan->add_option("--lambda", plan_args.lambda, "Co-occurrence concentration");
    plan->add_option("--mu", plan_args.mu, "Linear share of the cost model");
    plan->add_option("--t-full", plan_args.t_full, "Tokens per frame before pruning");
    plan->add_option("--mode", plan_args.mode, "timestamp | position | adapter");
    plan->add_option("--params", plan_args.params, "Checkpoint with adaptation parameters");
    plan->add_flag("--untrained", plan_args.untrained, "Use identity adaptation parameters");
    plan->add_flag("--embed-query", plan_args.embed_query, "Embed the query text even if the file carries e_q");
    plan->add_flag("--no-cues", plan_args.no_cues, "Disable temporal cue weighting (uniform weights)");
    plan->add_option("--lexicon", plan_args.lexicon, "Lexicon JSON file");
    plan->add_option("--out", plan_args.out, "Write plan JSON here instead of stdout");
    plan->add_option("--seed", plan_args.seed, "Seed for the bundled query embedder");

    SimulateArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "Compare allocation strategies on synthetic scenarios (CSV)");
    sim->add_option("--scenarios", sim_args.scenarios, "Scenarios per marker kind");
    sim->add_option("--frames", sim_args.frames, "Frames per scenario");
    sim->add_option("--dim", sim_args.dim, "Embedding dimension");
    sim->add_option("--alpha", sim_args.alpha, "Mean pruning rate in (0,1)");
    sim->add_option("--signal", sim_args.signal, "Signal strength of the planted window");
    sim->add_option("--seed", sim_args.seed, "Master seed");
    sim->add_option("--marker", sim_args.marker, "Restrict to one marker kind");
    sim->add_option("--strategy", sim_args.strategy, "Restrict to one strategy");
    sim->add_option("--out", sim_args.out, "Write CSV here instead of stdout");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train-adapter", "Train adaptation + relevance parameters");
    train->add_option("--data", train_args.data, "Training-set directory")->required();
    train->add_option("--mode", train_args.mode, "timestamp | position | adapter");
    train->add_option("--epochs", train_args.epochs, "Epochs");
    train->add_option("--lr", train_args.lr, "Learning rate");
    train->add_option("--wd", train_args.wd, "Decoupled weight decay");
    train->add_option("--seed", train_args.seed, "Seed");
    train->add_option("--batch-size", train_args.batch_size, "Samples per step");
    train->add_option("--max-frames", train_args.max_frames, "Adapter table size");
    train->add_option("--out", train_args.out, "Checkpoint output path")->required();
    train->add_option("--loss-csv", train_args.loss_csv, "Loss history CSV (default: <out>.loss.csv)");

    GradcheckArgs gc_args;
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the training gradient");
    gc->add_option("--mode", gc_args.mode, "timestamp | position | adapter");
    gc->add_option("--dim", gc_args.dim, "Embedding dimension");
    gc->add_option("--frames", gc_args.frames, "Frames in the toy sample");
    gc->add_option("--seed", gc_args.seed, "Seed");
    gc->add_option("--epsilon", gc_args.epsilon, "Finite-difference step");
    gc->add_flag("--corrupt-gradient", gc_args.corrupt, "Test hook: perturb the analytic gradient");

    ScenarioArgs sc_args;
    auto* sc = app.add_subcommand("make-scenario", "Write a planted-window scenario as an LGTE file");
    sc->add_option("--out", sc_args.out, "Output LGTE path")->required();
    sc->add_option("--frames", sc_args.frames, "Frames");
    sc->add_option("--dim", sc_args.dim, "Embedding dimension");
    sc->add_option("--marker", sc_args.marker, "Marker kind deciding the window position");
    sc->add_option("--signal", sc_args.signal, "Signal strength");
    sc->add_option("--seed", sc_args.seed, "Seed");

    DatasetArgs ds_args;
    auto* ds = app.add_subcommand("make-dataset", "Write a synthetic planted-window training set");
    ds->add_option("--out", ds_args.out, "Output directory")->required();
    ds->add_option("--samples", ds_args.samples, "Number of samples");
    ds->add_option("--frames", ds_args.frames, "Frames per sample");
    ds->add_option("--dim", ds_args.dim, "Embedding dimension");
    ds->add_option("--signal", ds_args.signal, "Signal strength");
    ds->add_option("--seed", ds_args.seed, "Seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*parse) return cmd_parse(parse_args);
        if (*plan) return cmd_plan(plan_args, *plan);
        if (*sim) return cmd_simulate(sim_args, *sim);
        if (*train) return cmd_train(train_args, *train);
        if (*gc) return cmd_gradcheck(gc_args, *gc);
        if (*sc) return cmd_make_scenario(sc_args);
        if (*ds) return cmd_make_dataset(ds_args);
    } catch (const lgttp::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return lgttp::exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
