#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "semattn/data/dataset.hpp"
#include "semattn/data/io.hpp"
#include "semattn/errors.hpp"
#include "semattn/toy_dataset.hpp"
#include "semattn/util/fs.hpp"

using namespace semattn;
using namespace semattn::toy;

namespace {

ToySpec small_spec() {
    ToySpec s;
    s.train_per_class = 6;
    s.val_per_class = 3;
    s.image_size = 48;
    return s;
}

std::vector<data::Sample> samples(const ToySpec& spec, int per_class) {
    std::vector<data::Sample> out;
    for (int k = 0; k < spec.num_scene_classes; ++k) {
        for (int i = 0; i < per_class; ++i) out.push_back(generate_sample(spec, data::Split::Train, k, i));
    }
    return out;
}

}  // namespace

TEST(Toy, LabelLayoutIsDisjoint) {
    const LabelLayout layout = label_layout(ToySpec{});
    std::set<int> seen;
    for (const auto& sig : layout.signature) {
        EXPECT_EQ(sig.size(), 2U);
        for (int l : sig) EXPECT_TRUE(seen.insert(l).second);
    }
    for (int l : layout.shared) EXPECT_TRUE(seen.insert(l).second);
    EXPECT_EQ(seen.size(), 11U);
    EXPECT_EQ(seen.count(0), 0U);
}

TEST(Toy, SpecValidation) {
    ToySpec s;
    s.num_semantic_classes = 4;
    EXPECT_THROW(s.validate(), ConfigError);
    s = {};
    s.ambiguity = 1.5;
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Toy, ZeroAmbiguityUsesOnlyOwnSignatures) {
    ToySpec spec = small_spec();
    spec.ambiguity = 0;
    const LabelLayout layout = label_layout(spec);
    for (const auto& s : samples(spec, 5)) {
        const auto& own = layout.signature[s.scene_label];
        for (int y = 0; y < s.semantics.height; ++y) {
            for (int x = 0; x < s.semantics.width; ++x) {
                const int l = s.semantics.top_label(y, x);
                EXPECT_TRUE(l == 0 || std::find(own.begin(), own.end(), l) != own.end()) << s.id;
            }
        }
    }
}

TEST(Toy, GenerationIsDeterministic) {
    const auto a = generate_sample(small_spec(), data::Split::Val, 2, 1);
    const auto b = generate_sample(small_spec(), data::Split::Val, 2, 1);
    EXPECT_EQ(a.image.pixels, b.image.pixels);
    EXPECT_EQ(a.semantics.labels, b.semantics.labels);
    ToySpec other = small_spec();
    other.seed = 1;
    EXPECT_NE(generate_sample(other, data::Split::Val, 2, 1).image.pixels, a.image.pixels);
}

TEST(Toy, SemanticsAreValidOneHot) {
    for (const auto& s : samples(small_spec(), 2)) {
        EXPECT_NO_THROW(s.semantics.validate());
        EXPECT_EQ(s.semantics.num_classes, 12);
        EXPECT_FLOAT_EQ(s.semantics.scores[0], 1.0F);
    }
}

TEST(Toy, OracleAccuracyFallsWithAmbiguity) {
    double prev = 101;
    for (double amb : {0.0, 0.5, 1.0}) {
        ToySpec spec = small_spec();
        spec.ambiguity = amb;
        const double acc = semantic_bag_oracle_accuracy(spec, samples(spec, 25));
        EXPECT_LE(acc, prev);
        prev = acc;
        if (amb == 0.0) EXPECT_EQ(acc, 100.0);
    }
    EXPECT_LT(prev, 50.0);
}

TEST(Toy, WrittenDatasetIsByteIdentical) {
    const auto base = std::filesystem::temp_directory_path() / "semattn_toy_test";
    std::filesystem::remove_all(base);
    generate(small_spec(), base / "a");
    generate(small_spec(), base / "b");
    const auto manifest = data::load_manifest(base / "a", data::Split::Train);
    EXPECT_EQ(manifest.samples.size(), 24U);
    EXPECT_EQ(manifest.num_semantic_classes, 12);
    for (const auto& ref : manifest.samples) {
        EXPECT_EQ(util::read_file(base / "a" / ref.rgb_path), util::read_file(base / "b" / ref.rgb_path));
        EXPECT_EQ(util::read_file(base / "a" / ref.sem_path), util::read_file(base / "b" / ref.sem_path));
    }
    EXPECT_EQ(util::read_file(base / "a" / "manifest.json"), util::read_file(base / "b" / "manifest.json"));
    const auto loaded = data::load_sample(manifest, 0);
    EXPECT_EQ(loaded.image.height, 48);
    std::filesystem::remove_all(base);
}
