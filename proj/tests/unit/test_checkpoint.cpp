#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "eltrack/checkpoint.hpp"

using namespace eltrack;
namespace fs = std::filesystem;

namespace {

Config small_config() {
    Config cfg;
    cfg.model.num_trackers = 3;
    cfg.model.embed_dim = 16;
    cfg.model.backbone_dim = 16;
    cfg.model.backbone_width = 4;
    cfg.model.heads = 2;
    cfg.model.points = 2;
    cfg.model.encoder_layers = 1;
    cfg.model.decoder_layers = 1;
    cfg.model.template_size = 32;
    cfg.model.search_width = 64;
    cfg.model.search_height = 48;
    cfg.model.seed = 5;
    cfg.runtime.theta = 0.4;
    return cfg;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void dump(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

class CheckpointFixture : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / "eltrack_ckpt_test";
        fs::create_directories(dir);
        path = dir / "model.ckpt";
        model.norm_stats.mean = {100.5, 110.25, 90.0};
        model.norm_stats.std = {40.0, 41.5, 39.0};
        // Move parameters off their initial values.
        for (const auto& [name, t] : model.params().items()) {
            Tensor<float> p = t;
            p.mutable_value().array() += 0.125f;
        }
        save_checkpoint(path, model, cfg);
    }
    void TearDown() override { fs::remove_all(dir); }

    Config cfg = small_config();
    TrackerModel<float> model{cfg.model};
    fs::path dir, path;
};

}  // namespace

TEST_F(CheckpointFixture, RoundTripRestoresEverything) {
    const LoadedCheckpoint ck = load_checkpoint(path);
    EXPECT_EQ(to_text(ck.config), to_text(cfg));
    EXPECT_EQ(ck.model->norm_stats.mean, model.norm_stats.mean);
    EXPECT_EQ(ck.model->norm_stats.std, model.norm_stats.std);
    const auto& a = model.params().items();
    const auto& b = ck.model->params().items();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].first, b[i].first);
        EXPECT_TRUE(a[i].second.value() == b[i].second.value()) << a[i].first;
    }
    // Saving the loaded model reproduces the file byte for byte.
    save_checkpoint(dir / "again.ckpt", *ck.model, ck.config);
    EXPECT_EQ(slurp(path), slurp(dir / "again.ckpt"));
}

TEST_F(CheckpointFixture, VersionMismatchIsReported) {
    std::string bytes = slurp(path);
    const auto pos = bytes.find(kCheckpointVersion);
    ASSERT_NE(pos, std::string::npos);
    bytes[pos + std::string(kCheckpointVersion).size() - 1] = '9';
    dump(path, bytes);
    try {
        load_checkpoint(path);
        FAIL() << "expected a version error";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("version mismatch"), std::string::npos) << e.what();
    }
}

TEST_F(CheckpointFixture, CorruptionIsDetected) {
    std::string bytes = slurp(path);
    bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x5a);
    dump(path, bytes);
    EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST_F(CheckpointFixture, TruncationIsDetected) {
    const std::string bytes = slurp(path);
    dump(path, bytes.substr(0, bytes.size() - 100));
    EXPECT_THROW(load_checkpoint(path), IoError);
    dump(path, bytes.substr(0, 3));
    EXPECT_THROW(load_checkpoint(path), IoError);
}

TEST(Checkpoint, MissingFileThrows) {
    EXPECT_THROW(load_checkpoint("/nonexistent/model.ckpt"), IoError);
}
