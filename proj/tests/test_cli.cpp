#include <gtest/gtest.h>

#include <filesystem>

#include "semattn/cli.hpp"
#include "semattn/errors.hpp"
#include "semattn/run_config.hpp"
#include "semattn/util/fs.hpp"

using namespace semattn;

TEST(RunConfig, DefaultsAndOverrides) {
    RunConfig cfg;
    EXPECT_EQ(cfg.get("fusion.mechanism"), "g_rgb_h");
    cfg.apply_override("train.batch_size=8");
    EXPECT_EQ(cfg.get_int("train.batch_size"), 8);
    cfg.load_text("# comment\n\ntrain.seed = 5  # trailing\n");
    EXPECT_EQ(cfg.get_u64("train.seed"), 5U);
}

TEST(RunConfig, UnknownKeyNamesTheKey) {
    RunConfig cfg;
    try {
        cfg.set("train.lerning_rate", "0.1");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("train.lerning_rate"), std::string::npos);
    }
    EXPECT_THROW(cfg.load_text("nonsense line"), ConfigError);
    EXPECT_THROW(cfg.apply_override("no_equals"), ConfigError);
}

TEST(RunConfig, TypedAccessorsValidate) {
    RunConfig cfg;
    cfg.set("train.batch_size", "many");
    EXPECT_THROW(cfg.get_int("train.batch_size"), ConfigError);
    cfg.set("train.augment", "maybe");
    EXPECT_THROW(cfg.get_bool("train.augment"), ConfigError);
}

TEST(RunConfig, BuildsModelAndTrainConfigs) {
    RunConfig cfg;
    cfg.set("model.semantic.channel_plan", "16,32,64,512");
    cfg.set("train.fusion_epochs", "3");
    const ModelConfig m = cfg.model_config(4, 12);
    EXPECT_EQ(m.semantic.channel_plan, (std::vector<int>{16, 32, 64, 512}));
    EXPECT_EQ(m.num_scene_classes(), 4);
    EXPECT_EQ(cfg.train_config(train::Stage::Fusion).max_epochs, 3);
    EXPECT_EQ(cfg.train_config(train::Stage::BranchRgb).max_epochs, cfg.get_int("train.max_epochs"));
    EXPECT_EQ(cfg.train_config(train::Stage::Fusion).learning_rate, cfg.get_double("train.learning_rate"));
    cfg.set("train.fusion_learning_rate", "0.005");
    EXPECT_EQ(cfg.train_config(train::Stage::Fusion).learning_rate, 0.005);
    EXPECT_EQ(cfg.train_config(train::Stage::BranchSemantic).learning_rate, cfg.get_double("train.learning_rate"));
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(cli::run({}), cli::kExitUsage);
    EXPECT_EQ(cli::run({"frobnicate"}), cli::kExitUsage);
    EXPECT_EQ(cli::run({"train"}), cli::kExitUsage);
    EXPECT_EQ(cli::run({"eval"}), cli::kExitUsage);
}

TEST(Cli, ConfigAndRuntimeErrorsExitOne) {
    EXPECT_EQ(cli::run({"defaults", "--set", "bogus.key=1"}), cli::kExitFailure);
    EXPECT_EQ(cli::run({"eval", "--checkpoint", "/nonexistent/x.ckpt", "--set", "data.root=/nonexistent"}),
              cli::kExitFailure);
    EXPECT_EQ(cli::run({"train", "--stage", "joint", "--set", "data.root=/nonexistent"}), cli::kExitFailure);
}

TEST(Cli, FusionWithoutBranchCheckpointsFails) {
    const auto dir = std::filesystem::temp_directory_path() / "semattn_cli_test";
    std::filesystem::remove_all(dir);
    ASSERT_EQ(cli::run({"generate", "--out", (dir / "data").string(), "--set", "toy.train_per_class=1", "--set",
                        "toy.val_per_class=1", "--set", "toy.image_size=32"}),
              cli::kExitOk);
    EXPECT_TRUE(std::filesystem::exists(dir / "data" / "manifest.json"));
    EXPECT_EQ(cli::run({"train", "--stage", "fusion", "--set", "data.root=" + (dir / "data").string(), "--set",
                        "output.dir=" + (dir / "out").string()}),
              cli::kExitFailure);
    std::filesystem::remove_all(dir);
}

TEST(Cli, DefaultsSucceeds) {
    testing::internal::CaptureStdout();
    EXPECT_EQ(cli::run({"defaults"}), cli::kExitOk);
    const std::string out = testing::internal::GetCapturedStdout();
    EXPECT_NE(out.find("fusion.mechanism = g_rgb_h"), std::string::npos);
}
