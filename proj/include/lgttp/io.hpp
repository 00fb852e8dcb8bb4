// SPDX-License-Identifier: Apache-2.0
#pragma once

// File formats: LGTE embedding files, parameter checkpoints, training-set
// directories, plan/config JSON and the CSV report.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lgttp/error.hpp"
#include "lgttp/harness.hpp"
#include "lgttp/planner.hpp"
#include "lgttp/trainer.hpp"
#include "lgttp/version.hpp"

namespace lgttp {

using Bytes = std::vector<std::uint8_t>;

namespace detail {

inline void put_u32(Bytes& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(Bytes& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(Bytes& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(Bytes& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

inline std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

inline float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }
inline double get_f64(const std::uint8_t* p) { return std::bit_cast<double>(get_u64(p)); }

inline Bytes read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) fail(ErrorCode::IoError, "failed reading '" + path + "'");
    return data;
}

inline void write_file(const std::string& path, const void* data, std::size_t size) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) fail(ErrorCode::IoError, "failed writing '" + path + "'");
}

inline void write_text(const std::string& path, const std::string& text) { write_file(path, text.data(), text.size()); }

}  // namespace detail

// ---------------------------------------------------------------------------
// LGTE embedding files
//
//   "LGTE" | u32 version (1) | u32 n_frames | u32 dim | n_frames*dim f32
//   [ u32 query flag (0|1) | dim f32 if flag == 1 ]
//
// All integers and floats little-endian, payload row-major.

inline constexpr std::uint32_t kEmbeddingFileVersion = 1;

struct EmbeddingFile {
    FrameEmbeddings embeddings;
    std::optional<QueryEmbedding> query;
};

inline Bytes encode_embeddings(const FrameEmbeddings& e, const std::optional<QueryEmbedding>& query = std::nullopt) {
    if (query) require(query->dim() == e.dim(), "query embedding dim does not match frames");
    Bytes out;
    out.reserve(20 + 4 * (e.data().size() + e.dim()));
    out.insert(out.end(), {'L', 'G', 'T', 'E'});
    detail::put_u32(out, kEmbeddingFileVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(e.n_frames()));
    detail::put_u32(out, static_cast<std::uint32_t>(e.dim()));
    for (double v : e.data()) detail::put_f32(out, static_cast<float>(v));
    if (query) {
        detail::put_u32(out, 1);
        for (double v : query->vector) detail::put_f32(out, static_cast<float>(v));
    }
    return out;
}

inline EmbeddingFile decode_embeddings(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "LGTE", 4) != 0) fail(ErrorCode::BadMagic, "not an LGTE file");
    if (bytes.size() < 16) fail(ErrorCode::Truncated, "LGTE header is truncated");
    const std::uint32_t version = detail::get_u32(bytes.data() + 4);
    if (version != kEmbeddingFileVersion) fail(ErrorCode::BadVersion, "unsupported LGTE version " + std::to_string(version));
    const std::uint64_t n = detail::get_u32(bytes.data() + 8);
    const std::uint64_t dim = detail::get_u32(bytes.data() + 12);
    require(n >= 1 && dim >= 1, "LGTE header declares an empty matrix");
    const std::uint64_t payload = n * dim * 4;
    if (bytes.size() - 16 < payload) {
        fail(ErrorCode::Truncated, "LGTE payload has " + std::to_string((bytes.size() - 16) / 4) + " floats, header needs " +
                                       std::to_string(n * dim));
    }
    const std::uint8_t* p = bytes.data() + 16;
    std::vector<double> data(n * dim);
    for (std::size_t i = 0; i < data.size(); ++i, p += 4) {
        const float v = detail::get_f32(p);
        if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "non-finite value at payload index " + std::to_string(i));
        data[i] = static_cast<double>(v);
    }

    EmbeddingFile file;
    file.embeddings = FrameEmbeddings(n, dim, std::move(data));
    std::size_t rest = bytes.size() - 16 - payload;
    if (rest == 0) return file;
    if (rest < 4) fail(ErrorCode::Truncated, "LGTE query flag is truncated");
    const std::uint32_t flag = detail::get_u32(p);
    p += 4;
    rest -= 4;
    require(flag == 0 || flag == 1, "LGTE query flag must be 0 or 1");
    if (flag == 0) {
        require(rest == 0, "unexpected bytes after LGTE query flag");
        return file;
    }
    if (rest < dim * 4) fail(ErrorCode::Truncated, "LGTE query block is truncated");
    require(rest == dim * 4, "unexpected bytes after LGTE query block");
    QueryEmbedding q;
    q.vector.resize(dim);
    for (std::size_t k = 0; k < dim; ++k, p += 4) {
        const float v = detail::get_f32(p);
        if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "non-finite value in query block");
        q.vector[k] = static_cast<double>(v);
    }
    file.query = std::move(q);
    return file;
}

inline void write_embeddings(const std::string& path, const FrameEmbeddings& e,
                             const std::optional<QueryEmbedding>& query = std::nullopt) {
    const Bytes bytes = encode_embeddings(e, query);
    detail::write_file(path, bytes.data(), bytes.size());
}

inline EmbeddingFile read_embeddings(const std::string& path) { return decode_embeddings(detail::read_file(path)); }

/// In-process planning over a caller-owned row-major float32 buffer, the same
/// path `lgttp plan` takes after reading an LGTE file. An empty
/// `query_embedding` falls back to the bundled text embedder.
inline PruningPlan build_plan_from_buffer(const Query& q, std::span<const float> frames, std::size_t n_frames,
                                          std::size_t dim, std::span<const float> query_embedding,
                                          const ModelParams& params, const PlannerConfig& cfg,
                                          const MarkerLexicon* lexicon = nullptr) {
    require(n_frames >= 1 && dim >= 1, "frame buffer needs n_frames >= 1 and dim >= 1");
    require(frames.size() == n_frames * dim, "frame buffer size does not match n_frames * dim");
    std::vector<double> data(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (!std::isfinite(frames[i])) fail(ErrorCode::NonFinite, "non-finite value at buffer index " + std::to_string(i));
        data[i] = static_cast<double>(frames[i]);
    }
    const FrameEmbeddings e(n_frames, dim, std::move(data));
    PlanInputs inputs;
    inputs.lexicon = lexicon;
    QueryEmbedding qe;
    if (!query_embedding.empty()) {
        qe.vector.assign(query_embedding.begin(), query_embedding.end());
        inputs.query_embedding = &qe;
    }
    return build_plan(q, e, params, cfg, inputs);
}

// ---------------------------------------------------------------------------
// Parameter checkpoints
//
//   "LGTC" | u32 version (1) | u32 header_bytes | JSON header | f64 payload
//
// The header carries mode, d, max_frames, seed, the training configuration and
// a "tensors" manifest of {name, offset, count}; offsets are byte offsets from
// the start of the payload. Tensors are stored in ModelParams::tensors() order.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelParams params;
    std::uint64_t seed = 0;
    TrainConfig train;
};

namespace detail {

inline std::size_t checkpoint_dim(const ModelParams& p) {
    switch (p.mode) {
        case AdaptationMode::PositionEmbedding: return p.position.dim();
        case AdaptationMode::LearnedAdapter: return p.adapter.dim;
        case AdaptationMode::TimestampAware: return 0;
    }
    return 0;
}

}  // namespace detail

inline nlohmann::json checkpoint_header(Checkpoint ck) {
    nlohmann::json tensors = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& t : ck.params.tensors()) {
        tensors.push_back({{"name", t.name}, {"offset", offset}, {"count", t.values.size()}});
        offset += t.values.size() * 8;
    }
    return {
        {"format", "lgttp-checkpoint"},
        {"version", kCheckpointVersion},
        {"library_version", std::string(kVersion)},
        {"mode", std::string(to_string(ck.params.mode))},
        {"d", detail::checkpoint_dim(ck.params)},
        {"max_frames", ck.params.mode == AdaptationMode::LearnedAdapter ? ck.params.adapter.max_frames : 0},
        {"seed", ck.seed},
        {"train",
         {{"learning_rate", ck.train.learning_rate},
          {"weight_decay", ck.train.weight_decay},
          {"epochs", ck.train.epochs},
          {"batch_size", ck.train.batch_size},
          {"beta1", ck.train.beta1},
          {"beta2", ck.train.beta2},
          {"eps", ck.train.adam_eps}}},
        {"tensors", tensors},
    };
}

inline Bytes encode_checkpoint(Checkpoint ck) {
    const std::string header = checkpoint_header(ck).dump();
    Bytes out;
    out.insert(out.end(), {'L', 'G', 'T', 'C'});
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(header.size()));
    out.insert(out.end(), header.begin(), header.end());
    for (const auto& t : ck.params.tensors()) {
        for (double v : t.values) detail::put_f64(out, v);
    }
    return out;
}

inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "LGTC", 4) != 0) fail(ErrorCode::BadMagic, "not an LGTC checkpoint");
    if (bytes.size() < 12) fail(ErrorCode::Truncated, "checkpoint preamble is truncated");
    const std::uint32_t version = detail::get_u32(bytes.data() + 4);
    if (version != kCheckpointVersion) fail(ErrorCode::BadVersion, "unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t header_len = detail::get_u32(bytes.data() + 8);
    if (bytes.size() - 12 < header_len) fail(ErrorCode::Truncated, "checkpoint header is truncated");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidInput, std::string("checkpoint header is not valid JSON: ") + e.what());
    }

    Checkpoint ck;
    try {
        const auto mode = parse_mode(header.at("mode").get<std::string>());
        require(mode.has_value(), "checkpoint has an unknown mode");
        const auto d = header.at("d").get<std::size_t>();
        const auto max_frames = header.at("max_frames").get<std::size_t>();
        ck.seed = header.at("seed").get<std::uint64_t>();
        const auto& tr = header.at("train");
        ck.train.learning_rate = tr.at("learning_rate").get<double>();
        ck.train.weight_decay = tr.at("weight_decay").get<double>();
        ck.train.epochs = tr.at("epochs").get<int>();
        ck.train.batch_size = tr.at("batch_size").get<std::size_t>();
        ck.train.beta1 = tr.value("beta1", 0.9);
        ck.train.beta2 = tr.value("beta2", 0.999);
        ck.train.adam_eps = tr.value("eps", 1e-8);
        ck.train.seed = ck.seed;
        if (*mode == AdaptationMode::PositionEmbedding) require(d >= 1, "position checkpoint needs d >= 1");
        if (*mode == AdaptationMode::LearnedAdapter) require(d >= 1 && max_frames >= 1, "adapter checkpoint needs d, max_frames >= 1");
        std::size_t expected = 2;
        if (*mode == AdaptationMode::PositionEmbedding) expected += 2 * d;
        if (*mode == AdaptationMode::LearnedAdapter) expected += max_frames * d + 2 * d * d + 4 * d + 1;
        if (bytes.size() - 12 - header_len < expected * 8) fail(ErrorCode::Truncated, "checkpoint payload is truncated");
        ck.params = ModelParams::identity(*mode, d, std::max<std::size_t>(max_frames, 1));
        ck.train.max_frames = ck.params.adapter.max_frames > 0 ? ck.params.adapter.max_frames : kDefaultMaxFrames;

        const auto& manifest = header.at("tensors");
        auto tensors = ck.params.tensors();
        require(manifest.is_array() && manifest.size() == tensors.size(), "checkpoint manifest does not match its mode");
        const std::size_t payload_start = 12 + header_len;
        for (std::size_t t = 0; t < tensors.size(); ++t) {
            const auto& entry = manifest[t];
            require(entry.at("name").get<std::string>() == tensors[t].name,
                    "checkpoint tensor " + std::to_string(t) + " should be " + tensors[t].name);
            const auto count = entry.at("count").get<std::size_t>();
            const auto offset = entry.at("offset").get<std::size_t>();
            require(count == tensors[t].values.size(), "checkpoint tensor " + tensors[t].name + " has the wrong size");
            if (bytes.size() < payload_start || bytes.size() - payload_start < offset + count * 8) {
                fail(ErrorCode::Truncated, "checkpoint payload is truncated at " + tensors[t].name);
            }
            const std::uint8_t* p = bytes.data() + payload_start + offset;
            for (std::size_t k = 0; k < count; ++k, p += 8) {
                const double v = detail::get_f64(p);
                if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "non-finite value in " + tensors[t].name);
                tensors[t].values[k] = v;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidInput, std::string("checkpoint header is malformed: ") + e.what());
    }
    return ck;
}

/// Text manifest: one "name absolute_offset count" line per tensor.
inline std::string checkpoint_manifest(const Checkpoint& ck) {
    const nlohmann::json header = checkpoint_header(ck);
    const std::size_t payload_start = 12 + header.dump().size();
    std::ostringstream out;
    out << "# tensor file_offset count (little-endian float64)\n";
    for (const auto& t : header.at("tensors")) {
        out << t.at("name").get<std::string>() << ' ' << payload_start + t.at("offset").get<std::size_t>() << ' '
            << t.at("count").get<std::size_t>() << '\n';
    }
    return out.str();
}

inline void write_checkpoint(const std::string& path, const Checkpoint& ck) {
    const Bytes bytes = encode_checkpoint(ck);
    detail::write_file(path, bytes.data(), bytes.size());
    detail::write_text(path + ".manifest", checkpoint_manifest(ck));
}

inline Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(detail::read_file(path)); }

// ---------------------------------------------------------------------------
// Training-set directories: sample_NNNN.lgte (with query block) and
// sample_NNNN.labels (whitespace-separated 0/1, one per frame).

inline void write_dataset(const std::string& dir, std::span<const TrainingSample> samples) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create directory '" + dir + "'");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::ostringstream name;
        name << "sample_" << std::setw(4) << std::setfill('0') << i;
        const std::string base = (std::filesystem::path(dir) / name.str()).string();
        write_embeddings(base + ".lgte", samples[i].embeddings, samples[i].query);
        std::ostringstream labels;
        for (std::size_t k = 0; k < samples[i].labels.size(); ++k) {
            labels << (k ? " " : "") << (samples[i].labels[k] > 0.5 ? 1 : 0);
        }
        labels << '\n';
        detail::write_text(base + ".labels", labels.str());
    }
}

inline std::vector<TrainingSample> read_dataset(const std::string& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) fail(ErrorCode::IoError, "'" + dir + "' is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".lgte") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<TrainingSample> samples;
    for (const auto& f : files) {
        auto file = read_embeddings(f.string());
        require(file.query.has_value(), "training sample '" + f.string() + "' lacks a query block");
        auto label_path = f;
        label_path.replace_extension(".labels");
        std::ifstream in(label_path);
        if (!in) fail(ErrorCode::IoError, "cannot open labels '" + label_path.string() + "'");
        std::vector<double> labels;
        int v = 0;
        while (in >> v) {
            require(v == 0 || v == 1, "labels must be 0 or 1");
            labels.push_back(v);
        }
        require(labels.size() == file.embeddings.n_frames(), "label count does not match frames in " + label_path.string());
        samples.push_back({std::move(file.embeddings), std::move(*file.query), std::move(labels)});
    }
    require(!samples.empty(), "training directory '" + dir + "' has no .lgte samples");
    return samples;
}

/// Planted-window training set: every sample shares one query direction and a
/// window over the final third; labels mark the window.
inline std::vector<TrainingSample> synthetic_dataset(std::size_t n_samples, std::size_t n_frames, std::size_t dim,
                                                     double signal_strength, std::uint64_t seed,
                                                     MarkerKind kind = MarkerKind::Subsequence) {
    require(n_samples >= 1, "dataset needs at least one sample");
    const FrameWindow window = matched_window(kind, n_frames, seed);
    const Scenario anchor = gen_scenario(n_frames, dim, window, kind, signal_strength, seed);
    std::vector<TrainingSample> out;
    out.reserve(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
        // fresh noise per sample; the query direction comes from the anchor
        Rng rng(mix_seed(seed, s + 1));
        std::vector<double> data(n_frames * dim);
        for (std::size_t i = 0; i < n_frames; ++i) {
            const auto noise = detail::random_unit(rng, dim);
            double* row = data.data() + i * dim;
            for (std::size_t k = 0; k < dim; ++k) {
                row[k] = window.contains(i)
                             ? signal_strength * anchor.query_embedding.vector[k] + (1.0 - signal_strength) * noise[k]
                             : noise[k];
            }
            const double len = norm(std::span<const double>(row, dim));
            for (std::size_t k = 0; k < dim; ++k) row[k] /= len;
        }
        std::vector<double> labels(n_frames, 0.0);
        for (std::size_t i = window.begin; i < window.end; ++i) labels[i] = 1.0;
        out.push_back({FrameEmbeddings(n_frames, dim, std::move(data)), anchor.query_embedding, std::move(labels)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const PlannerConfig& c) {
    return {
        {"alpha", c.alpha},
        {"t_full", c.t_full},
        {"t_min_fraction", c.t_min_fraction},
        {"t_min", c.t_min()},
        {"lambda", c.lambda},
        {"mode", std::string(to_string(c.mode))},
        {"cost_mu", c.cost_mu},
        {"use_temporal_cues", c.use_temporal_cues},
        {"seed", c.embed_seed},
    };
}

/// Run configuration document; unknown keys are rejected.
inline PlannerConfig planner_config_from_json(const nlohmann::json& j, PlannerConfig base = {}) {
    require(j.is_object(), "config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "alpha") base.alpha = value.get<double>();
            else if (key == "t_full") base.t_full = value.get<std::size_t>();
            else if (key == "t_min_fraction") base.t_min_fraction = value.get<double>();
            else if (key == "lambda") base.lambda = value.get<double>();
            else if (key == "cost_mu") base.cost_mu = value.get<double>();
            else if (key == "seed") base.embed_seed = value.get<std::uint64_t>();
            else if (key == "use_temporal_cues") base.use_temporal_cues = value.get<bool>();
            else if (key == "t_min") continue;  // derived, echoed by to_json
            else if (key == "mode") {
                const auto mode = parse_mode(value.get<std::string>());
                require(mode.has_value(), "unknown mode '" + value.get<std::string>() + "'");
                base.mode = *mode;
            } else {
                fail(ErrorCode::InvalidInput, "unknown config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidInput, std::string("config has a value of the wrong type: ") + e.what());
    }
    validate(base);
    return base;
}

inline nlohmann::json to_json(const CostEstimate& c) {
    return {
        {"retained_tokens", c.retained_tokens},
        {"full_tokens", c.full_tokens},
        {"token_ratio", c.token_ratio},
        {"attention_ratio", c.attention_ratio},
        {"relative_flops_percent", c.relative_flops_percent},
        {"mu", c.mu},
    };
}

inline nlohmann::json to_json(const PruningPlan& plan) {
    nlohmann::json cues = nlohmann::json::array();
    for (const auto& c : plan.cues) cues.push_back(to_json(c));
    return {
        {"query_id", plan.query_id},
        {"cues", cues},
        {"weights", plan.weights.weights},
        {"l_base", plan.scores.l_base},
        {"l_temp", plan.scores.l_temp},
        {"raw_rates", plan.raw_rates},
        {"rates", plan.rates},
        {"budgets", plan.budgets},
        {"kept_tokens", plan.kept_tokens},
        {"cost", to_json(plan.cost)},
        {"config", to_json(plan.config)},
        {"version", std::string(kVersion)},
    };
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kReportHeader =
    "strategy,marker_kind,n_frames,alpha,mean_window_retention,std_window_retention,mean_token_ratio";

inline std::string report_csv(std::span<const ReportRow> rows) {
    std::ostringstream out;
    out << kReportHeader << '\n';
    out << std::fixed << std::setprecision(6);
    for (const auto& r : rows) {
        out << to_string(r.strategy) << ',' << to_string(r.marker_kind) << ',' << r.n_frames << ',' << r.alpha << ','
            << r.mean_window_retention << ',' << r.std_window_retention << ',' << r.mean_token_ratio << '\n';
    }
    return out.str();
}

inline std::string loss_csv(const TrainResult& r) {
    std::ostringstream out;
    out << "epoch,loss,best_loss\n" << std::setprecision(17);
    for (std::size_t e = 0; e < r.loss_history.size(); ++e) {
        out << e << ',' << r.loss_history[e] << ',' << r.best_loss[e] << '\n';
    }
    return out.str();
}

}  // namespace lgttp
