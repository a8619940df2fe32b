#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "amdmil/error.hpp"
#include "amdmil/harness.hpp"
#include "amdmil/synthdata.hpp"

using namespace amdmil;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("amdmil_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<unsigned char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

DatasetConfig small_dataset(std::uint64_t seed = 3) {
    DatasetConfig cfg;
    cfg.seed = seed;
    cfg.num_bags = 24;
    cfg.dim = 6;
    cfg.min_instances = 5;
    cfg.max_instances = 12;
    cfg.witness_rate = 0.2;
    return cfg;
}

}  // namespace

TEST(DatasetConfigTest, InvalidRangesRejected) {
    auto bad = [](auto mutate) {
        DatasetConfig cfg;
        mutate(cfg);
        EXPECT_THROW(cfg.validate(), ConfigError);
    };
    bad([](DatasetConfig& c) { c.min_instances = 0; });
    bad([](DatasetConfig& c) { c.max_instances = c.min_instances - 1; });
    bad([](DatasetConfig& c) { c.witness_rate = 0.0; });
    bad([](DatasetConfig& c) { c.witness_rate = 1.5; });
    bad([](DatasetConfig& c) { c.noise_std = 0.0; });
    bad([](DatasetConfig& c) { c.separation = -1.0; });
    bad([](DatasetConfig& c) { c.classes = 1; });
    bad([](DatasetConfig& c) { c.num_bags = 0; });
    bad([](DatasetConfig& c) { c.dim = 0; });
}

TEST(DatasetConfigTest, WitnessCountIsCeilingAndAtLeastOne) {
    DatasetConfig cfg;
    EXPECT_EQ(cfg.witness_count(50), 3u);
    EXPECT_EQ(cfg.witness_count(200), 10u);
    EXPECT_EQ(cfg.witness_count(1), 1u);
    cfg.witness_rate = 1.0;
    EXPECT_EQ(cfg.witness_count(37), 37u);
}

TEST(GenerateDataset, StructureFollowsConfig) {
    auto cfg = small_dataset();
    auto bags = generate_dataset(cfg);
    ASSERT_EQ(bags.size(), cfg.num_bags);
    std::size_t positives = 0;
    std::set<std::string> ids;
    for (const auto& bag : bags) {
        ids.insert(bag.id);
        EXPECT_GE(bag.size(), cfg.min_instances);
        EXPECT_LE(bag.size(), cfg.max_instances);
        EXPECT_EQ(bag.dim(), cfg.dim);
        ASSERT_TRUE(bag.instance_labels.has_value());
        EXPECT_EQ(bag_label_rule(*bag.instance_labels), bag.label);
        std::size_t witnesses = 0;
        for (auto y : *bag.instance_labels) witnesses += y;
        EXPECT_EQ(witnesses, bag.label == 1 ? cfg.witness_count(bag.size()) : 0u);
        positives += bag.label;
    }
    EXPECT_EQ(ids.size(), bags.size());
    EXPECT_EQ(positives, cfg.num_bags / 2);
}

TEST(GenerateDataset, WitnessesShiftedAlongFirstAxis) {
    auto cfg = small_dataset();
    cfg.num_bags = 200;
    cfg.separation = 4.0;
    auto bags = generate_dataset(cfg);
    double wit = 0.0, bg = 0.0, wit_other = 0.0;
    std::size_t nw = 0, nb = 0;
    for (const auto& bag : bags)
        for (std::size_t i = 0; i < bag.size(); ++i) {
            if ((*bag.instance_labels)[i]) wit += bag.features(i, 0), wit_other += bag.features(i, 1), ++nw;
            else bg += bag.features(i, 0), ++nb;
        }
    EXPECT_NEAR(wit / nw, 4.0, 0.3);
    EXPECT_NEAR(wit_other / nw, 0.0, 0.3);
    EXPECT_NEAR(bg / nb, 0.0, 0.1);
}

TEST(GenerateDataset, SameSeedSameBytes) {
    auto a = generate_dataset(small_dataset(9));
    auto b = generate_dataset(small_dataset(9));
    EXPECT_EQ(a, b);
    auto c = generate_dataset(small_dataset(10));
    EXPECT_NE(a, c);
}

TEST(GenerateDataset, ValuesAreFloat32Exact) {
    for (const auto& bag : generate_dataset(small_dataset()))
        for (double x : bag.features.data()) EXPECT_EQ(x, static_cast<double>(static_cast<float>(x)));
}

TEST(BagFiles, SaveLoadRoundTrip) {
    auto dir = fresh_dir("roundtrip");
    auto cfg = small_dataset();
    auto bags = generate_dataset(cfg);
    bags[0].instance_labels.reset();
    save_bags(bags, dir, &cfg);
    auto loaded = load_bags(dir);
    EXPECT_EQ(loaded, bags);
    EXPECT_EQ(load_bags(dir / "manifest.json"), bags);
    auto echo = load_manifest_config(dir);
    ASSERT_TRUE(echo.has_value());
    EXPECT_EQ(echo->seed, cfg.seed);
    EXPECT_EQ(echo->num_bags, cfg.num_bags);
    EXPECT_DOUBLE_EQ(echo->witness_rate, cfg.witness_rate);
    fs::remove_all(dir);
}

TEST(BagFiles, IdenticalConfigsWriteIdenticalBytes) {
    auto d1 = fresh_dir("bytes1");
    auto d2 = fresh_dir("bytes2");
    auto cfg = small_dataset();
    save_bags(generate_dataset(cfg), d1, &cfg);
    save_bags(generate_dataset(cfg), d2, &cfg);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(d1)) {
        EXPECT_EQ(slurp(entry.path()), slurp(d2 / entry.path().filename())) << entry.path();
        ++files;
    }
    EXPECT_EQ(files, cfg.num_bags + 1);
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST(BagFiles, TruncatedRecordIsFormatError) {
    auto bags = generate_dataset(small_dataset());
    auto bytes = encode_bag(bags[1]);
    for (std::size_t cut : {0ul, 3ul, 4ul, 10ul, 23ul, 24ul, bytes.size() - 1}) {
        std::vector<unsigned char> partial(bytes.begin(), bytes.begin() + static_cast<long>(cut));
        EXPECT_THROW(decode_bag(partial, "x"), FormatError) << "cut " << cut;
    }
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_bag(bad_magic, "x"), FormatError);
    auto bad_version = bytes;
    bad_version[4] = 2;
    EXPECT_THROW(decode_bag(bad_version, "x"), FormatError);
}

TEST(BagFiles, MissingManifestRecordIsReported) {
    auto dir = fresh_dir("missing");
    auto cfg = small_dataset();
    auto bags = generate_dataset(cfg);
    save_bags(bags, dir, &cfg);
    fs::remove(dir / (bags[3].id + ".milf"));
    EXPECT_THROW(load_bags(dir), Error);
    fs::remove_all(dir);
}

// tests/data/fixture.milf is written by tests/fixtures/make_milf_fixture.py,
// which packs the bytes with Python's struct module.
TEST(BagFiles, LoadsFileFromIndependentWriter) {
    Bag bag = load_bag(fs::path(AMDMIL_TEST_DATA_DIR) / "fixture.milf");
    EXPECT_EQ(bag.id, "fixture");
    EXPECT_EQ(bag.label, 1u);
    ASSERT_TRUE(bag.instance_labels.has_value());
    EXPECT_EQ(*bag.instance_labels, (std::vector<std::uint8_t>{0, 1, 0}));
    EXPECT_EQ(bag.features, (Matrix{{0.5, -1.25}, {2.0, 3.5}, {-0.125, 1024.0}}));
    EXPECT_EQ(encode_bag(bag), slurp(fs::path(AMDMIL_TEST_DATA_DIR) / "fixture.milf"));
}

TEST(SplitFolds, LeaveOneOutWhenKEqualsBagCount) {
    auto bags = generate_dataset(small_dataset());
    auto plan = split_folds(bags, bags.size(), 1);
    std::set<std::size_t> folds(plan.fold_of.begin(), plan.fold_of.end());
    EXPECT_EQ(folds.size(), bags.size());
    for (std::size_t f = 0; f < plan.k; ++f) EXPECT_EQ(plan.test_indices(f).size(), 1u);
}

TEST(SplitFolds, ExactDivisionOnBalancedData) {
    auto cfg = small_dataset();
    cfg.num_bags = 60;
    auto bags = generate_dataset(cfg);
    auto plan = split_folds(bags, 6, 5);
    for (std::size_t f = 0; f < 6; ++f) {
        auto test = plan.test_indices(f);
        EXPECT_EQ(test.size(), 10u);
        std::size_t pos = 0;
        for (auto i : test) pos += bags[i].label;
        EXPECT_EQ(pos, 5u);
    }
}

TEST(SplitFolds, CountingOracleOnOddSizes) {
    DatasetConfig cfg;
    cfg.num_bags = 1034;
    cfg.dim = 2;
    cfg.min_instances = 1;
    cfg.max_instances = 2;
    cfg.witness_rate = 0.5;
    auto bags = generate_dataset(cfg);
    std::size_t total_pos = 0;
    for (const auto& b : bags) total_pos += b.label;
    for (bool stratified : {true, false}) {
        auto plan = split_folds(bags, 4, 77, stratified);
        std::vector<std::size_t> size(4, 0), pos(4, 0);
        for (std::size_t i = 0; i < bags.size(); ++i) {
            ++size[plan.fold_of[i]];
            pos[plan.fold_of[i]] += bags[i].label;
        }
        auto [lo, hi] = std::minmax_element(size.begin(), size.end());
        EXPECT_LE(*hi - *lo, 1u);
        if (!stratified) continue;
        for (std::size_t f = 0; f < 4; ++f) {
            double expected = static_cast<double>(total_pos) * static_cast<double>(size[f]) / 1034.0;
            EXPECT_LE(std::abs(static_cast<double>(pos[f]) - expected), 1.0) << "fold " << f;
        }
    }
}

TEST(SplitFolds, PartitionAndDisjointness) {
    auto bags = generate_dataset(small_dataset());
    auto plan = split_folds(bags, 5, 2);
    std::size_t covered = 0;
    for (std::size_t f = 0; f < 5; ++f) {
        auto test = plan.test_indices(f);
        auto train = plan.train_indices(f);
        covered += test.size();
        EXPECT_EQ(test.size() + train.size(), bags.size());
        std::set<std::size_t> t(test.begin(), test.end());
        for (auto i : train) EXPECT_FALSE(t.count(i));
    }
    EXPECT_EQ(covered, bags.size());
    EXPECT_EQ(plan.fold_of_id(bags[4].id), plan.fold_of[4]);
}

TEST(SplitFolds, DeterministicInSeed) {
    auto bags = generate_dataset(small_dataset());
    EXPECT_EQ(split_folds(bags, 4, 9).fold_of, split_folds(bags, 4, 9).fold_of);
    EXPECT_THROW(split_folds(bags, 0, 9), ConfigError);
    EXPECT_THROW(split_folds(bags, bags.size() + 1, 9), ConfigError);
}
