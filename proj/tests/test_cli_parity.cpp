// SPDX-License-Identifier: Apache-2.0
//
// The CLI and the in-process buffer interface must produce the same plan for
// the same inputs.

#include <gtest/gtest.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "lgttp/io.hpp"

namespace lgttp {
namespace {

namespace fs = std::filesystem;

struct RawFile {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<float> frames;
    std::vector<float> query;
};

// Decodes the fixture by hand rather than through the library reader.
RawFile load_raw(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    RawFile raw;
    std::uint32_t hdr[3];
    std::memcpy(hdr, bytes.data() + 4, 12);
    raw.n = hdr[1];
    raw.d = hdr[2];
    raw.frames.resize(raw.n * raw.d);
    std::memcpy(raw.frames.data(), bytes.data() + 16, raw.frames.size() * 4);
    const std::size_t tail = 16 + raw.frames.size() * 4;
    if (bytes.size() > tail + 4) {
        raw.query.resize(raw.d);
        std::memcpy(raw.query.data(), bytes.data() + tail + 4, raw.d * 4);
    }
    return raw;
}

nlohmann::json run_cli(const std::string& args, const fs::path& out) {
    const std::string cmd = std::string("\"") + LGTTP_CLI_PATH + "\" plan " + args + " --out \"" + out.string() + "\" > /dev/null";
    EXPECT_EQ(std::system(cmd.c_str()), 0) << cmd;
    std::ifstream in(out);
    return nlohmann::json::parse(in);
}

class CliParity : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / "lgttp_cli_parity";
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    fs::path dir;
    std::string fixture = std::string(LGTTP_FIXTURE_DIR) + "/planted_after.lgte";
};

TEST_F(CliParity, PlanWithStoredQueryEmbedding) {
    const std::string text = "what happens after the goal is scored";
    const auto cli = run_cli("--query \"" + text + "\" --embeddings \"" + fixture + "\"", dir / "a.json");
    const auto raw = load_raw(fixture);
    ASSERT_FALSE(raw.query.empty());
    PlannerConfig cfg;
    const auto plan = build_plan_from_buffer({"q0", text}, raw.frames, raw.n, raw.d, raw.query, ModelParams{}, cfg);
    EXPECT_EQ(cli, to_json(plan));
}

TEST_F(CliParity, PlanWithEmbeddedQueryTextAndOverrides) {
    const std::string text = "what happens before the speech";
    const auto cli = run_cli("--query \"" + text + "\" --id x --embed-query --seed 3 --alpha 0.5 --t-full 40 --lambda 3 --embeddings \"" +
                                 fixture + "\"",
                             dir / "b.json");
    const auto raw = load_raw(fixture);
    PlannerConfig cfg;
    cfg.alpha = 0.5;
    cfg.t_full = 40;
    cfg.lambda = 3.0;
    cfg.embed_seed = 3;
    const auto plan = build_plan_from_buffer({"x", text}, raw.frames, raw.n, raw.d, {}, ModelParams{}, cfg);
    EXPECT_EQ(cli, to_json(plan));
}

TEST_F(CliParity, PlanWithUntrainedAdapter) {
    const std::string text = "during the crowd cheers";
    const auto cli = run_cli("--query \"" + text + "\" --mode adapter --untrained --embeddings \"" + fixture + "\"", dir / "c.json");
    const auto raw = load_raw(fixture);
    PlannerConfig cfg;
    cfg.mode = AdaptationMode::LearnedAdapter;
    const auto params = ModelParams::identity(cfg.mode, raw.d, std::max(kDefaultMaxFrames, raw.n));
    const auto plan = build_plan_from_buffer({"q0", text}, raw.frames, raw.n, raw.d, raw.query, params, cfg);
    EXPECT_EQ(cli, to_json(plan));
}

}  // namespace
}  // namespace lgttp
