#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "eltrack/checkpoint.hpp"
#include "eltrack/cli.hpp"
#include "eltrack/config.hpp"
#include "eltrack/runtime.hpp"
#include "eltrack/synthetic.hpp"
#include "support/fixture.hpp"

using namespace eltrack;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = ELTRACK_FIXTURES;

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args) {
    args.insert(args.begin(), "eltrack");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::map<std::string, std::string> key_values(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos && line.find(' ') == std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Config, ParsesKnownKeysAndKeepsDefaults) {
    const Config c = parse_config("N = 7  # trackers\nlambda_r=2.5\ncurriculum=0:2,3:4\ntemporal_transfer=false\n");
    EXPECT_EQ(c.model.num_trackers, 7);
    EXPECT_EQ(c.loss.ref, 2.5);
    EXPECT_EQ(c.loss.l1, LossWeights{}.l1);
    EXPECT_FALSE(c.runtime.temporal_transfer);
    ASSERT_EQ(c.train.curriculum.size(), 2u);
    EXPECT_EQ(c.train.sample_length(5), 4);
}

TEST(Config, RejectsBadInput) {
    EXPECT_THROW(parse_config("bogus=1"), ValidationError);
    EXPECT_THROW(parse_config("N=ten"), ValidationError);
    EXPECT_THROW(parse_config("N"), ValidationError);
    EXPECT_THROW(parse_config("c=30\nheads=4"), ValidationError);
    EXPECT_THROW(parse_config("theta=1.5"), ValidationError);
    EXPECT_THROW(parse_config("curriculum=0:2,0:3"), ValidationError);
    EXPECT_THROW(parse_curriculum("0-2"), ValidationError);
}

TEST(Config, TextRoundTrip) {
    Config c = parse_config("learning_rate=0.00123\nworld_seed=99\nalpha_select=0.3");
    const Config back = parse_config(to_text(c));
    EXPECT_EQ(to_text(back), to_text(c));
    EXPECT_EQ(back.train.learning_rate, 0.00123);
    EXPECT_EQ(back.world.seed, 99u);
}

TEST(Config, DeskConfigLoads) {
    const Config c = load_config(fs::path(ELTRACK_FIXTURES) / ".." / ".." / "configs" / "desk.cfg");
    EXPECT_EQ(c.model.num_trackers, 10);
    EXPECT_EQ(c.model.memory_length, 5);
    EXPECT_EQ(c.train.num_sequences, 64);
    EXPECT_EQ(c.train.sample_length(0), 2);
    EXPECT_EQ(c.train.sample_length(100), 6);
}

TEST(Cli, EvalOnThreeFrameFixture) {
    const fixture::Values f = fixture::load((kFixtures / "eval" / "eval3" / "expected.txt").string());
    const fs::path root = kFixtures / "eval" / "eval3";
    const CliRun r = run({"eval", "--dataset", (root / "dataset").string(), "--results", (root / "results").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto kv = key_values(r.out);
    EXPECT_EQ(kv.at("auc"), fixed6(fixture::scalar(f, "auc")));
    EXPECT_EQ(kv.at("precision20"), fixed6(fixture::scalar(f, "precision20")));
    EXPECT_EQ(kv.at("normalized_precision"), fixed6(fixture::scalar(f, "normalized_precision")));
}

TEST(Cli, EvalPresenceModesOnSixFrameFixture) {
    const fixture::Values f = fixture::load((kFixtures / "eval" / "eval6" / "expected.txt").string());
    const fs::path root = kFixtures / "eval" / "eval6";
    const std::vector<std::string> base{"--dataset", (root / "dataset").string(), "--results",
                                        (root / "results").string(), "--mode"};
    auto args = base;
    args.insert(args.begin(), "eval");
    args.push_back("oxuva");
    CliRun r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(key_values(r.out).at("maxgm"), fixed6(fixture::scalar(f, "maxgm")));
    args.back() = "votlt";
    r = run(args);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(key_values(r.out).at("fscore"), fixed6(fixture::scalar(f, "fscore")));
    args.back() = "nonsense";
    EXPECT_NE(run(args).code, 0);
}

TEST(Cli, UnknownFlagsAndPathsFail) {
    EXPECT_NE(run({"eval", "--bogus"}).code, 0);
    EXPECT_NE(run({"frobnicate"}).code, 0);
    const CliRun r = run({"eval", "--dataset", "/nonexistent", "--results", "/nonexistent"});
    EXPECT_NE(r.code, 0);
    EXPECT_FALSE(r.err.empty());
    EXPECT_NE(run({}).code, 0);
}

TEST(Cli, SynthTrackEvalRoundTrip) {
    const fs::path dir = fs::temp_directory_path() / "eltrack_cli_rt";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "tiny.cfg");
        cfg << "N=3\nc=16\nC=16\nbackbone_width=4\nheads=2\npoints=2\nencoder_layers=1\ndecoder_layers=1\n"
               "template_size=32\nsearch_width=128\nsearch_height=96\nworld_width=128\nworld_height=96\n"
               "world_length=8\ntarget_min_size=16\ntarget_max_size=24\ntheta=0.05\n";
    }
    const Config cfg = load_config(dir / "tiny.cfg");
    const TrackerModel<float> model(cfg.model);
    save_checkpoint(dir / "m.ckpt", model, cfg);

    const std::string ds = (dir / "ds").string();
    CliRun r = run({"synth", "--config", (dir / "tiny.cfg").string(), "--seed", "4", "--dataset", ds, "--count", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(list_sequences(ds).size(), 2u);
    for (const char* out : {"res1", "res2"}) {
        r = run({"track", "--checkpoint", (dir / "m.ckpt").string(), "--dataset", ds, "--results",
                 (dir / out).string()});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    EXPECT_EQ(slurp(dir / "res1" / "seq000.txt"), slurp(dir / "res2" / "seq000.txt"));

    // The file path and the in-memory path agree.
    const auto mem = track_sequence_dir(model, fs::path(ds) / "seq000", cfg.runtime);
    const auto file = read_results(dir / "res1" / "seq000.txt", 128, 96);
    ASSERT_EQ(mem.size(), file.size());
    for (std::size_t i = 0; i < mem.size(); ++i) {
        EXPECT_EQ(mem[i].pixels, file[i].pixels);
        EXPECT_EQ(mem[i].confidence, file[i].confidence);
        EXPECT_EQ(mem[i].present, file[i].present);
    }
    r = run({"eval", "--dataset", ds, "--results", (dir / "res1").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(key_values(r.out).at("sequences"), "2");

    r = run({"overlay", "--dataset", ds, "--results", (dir / "res1").string(), "--sequence", "seq001", "--out",
             (dir / "ov").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "ov"));
    fs::remove_all(dir);
}
