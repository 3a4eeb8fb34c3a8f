#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dtkd/data.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

using namespace dtkd::data;

namespace {

std::string slurp(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("gen_synthetic determinism and balance") {
    auto [train_a, test_a] = gen_synthetic(5, 8, 103, 41, 3.0, 0.8, 99);
    auto [train_b, test_b] = gen_synthetic(5, 8, 103, 41, 3.0, 0.8, 99);
    REQUIRE(train_a.features.size() == train_b.features.size());
    for (std::size_t i = 0; i < train_a.features.size(); ++i)
        CHECK(train_a.features.data()[i] == train_b.features.data()[i]);
    CHECK(train_a.labels == train_b.labels);
    CHECK(test_a.labels == test_b.labels);

    // class priors balanced within one sample
    std::vector<int> counts(5, 0);
    for (int label : train_a.labels)
        ++counts[static_cast<std::size_t>(label)];
    int lo = counts[0], hi = counts[0];
    for (int c : counts) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    CHECK(hi - lo <= 1);

    auto [train_c, test_c] = gen_synthetic(5, 8, 103, 41, 3.0, 0.8, 100);
    bool identical = true;
    for (std::size_t i = 0; i < train_a.features.size(); ++i)
        identical &= train_a.features.data()[i] == train_c.features.data()[i];
    CHECK(!identical);

    CHECK_THROWS_AS(gen_synthetic(1, 8, 100, 10, 3.0, 0.5, 1), std::domain_error);
    CHECK_THROWS_AS(gen_synthetic(5, 1, 100, 10, 3.0, 0.5, 1), std::domain_error);
}

TEST_CASE("zero overlap collapses every sample onto its class center") {
    auto [train, test] = gen_synthetic(4, 6, 40, 20, 2.5, 0.0, 7);
    // nearest-center classification is exact: each sample IS its center, so
    // every test row must match a train row of the same class bit for bit
    for (std::size_t t = 0; t < test.features.rows(); ++t) {
        bool found = false;
        for (std::size_t s = 0; s < train.features.rows() && !found; ++s) {
            if (train.labels[s] != test.labels[t])
                continue;
            bool equal = true;
            for (std::size_t d = 0; d < test.features.cols(); ++d)
                equal &= train.features(s, d) == test.features(t, d);
            found = equal;
        }
        CHECK(found);
    }
}

TEST_CASE("dataset store/load round trip") {
    auto [train, test] = gen_synthetic(3, 4, 31, 9, 2.0, 0.5, 11);
    auto path = std::filesystem::temp_directory_path() / "dtkd_test_data.dtks";
    store_dataset(train, path);
    DatasetSplit loaded = load_dataset(path);
    CHECK(loaded.n_classes == train.n_classes);
    CHECK(loaded.labels == train.labels);
    REQUIRE(loaded.features.size() == train.features.size());
    for (std::size_t i = 0; i < train.features.size(); ++i)
        CHECK(loaded.features.data()[i] == train.features.data()[i]);
    std::filesystem::remove(path);
}

TEST_CASE("dataset parse errors name the byte offset") {
    auto [train, test] = gen_synthetic(3, 4, 12, 6, 2.0, 0.5, 12);
    auto path = std::filesystem::temp_directory_path() / "dtkd_test_corrupt.dtks";

    // corrupted magic: error at offset 0
    store_dataset(train, path);
    {
        std::string bytes = slurp(path);
        bytes[0] = 'X';
        std::ofstream(path, std::ios::binary).write(bytes.data(),
                                                    static_cast<std::streamsize>(bytes.size()));
    }
    try {
        load_dataset(path);
        FAIL("expected ParseError");
    } catch (const ParseError &e) {
        CHECK(e.offset() == 0);
    }

    // label out of range: error names the record index
    store_dataset(train, path);
    {
        std::string bytes = slurp(path);
        std::size_t label_base = 18 + train.features.size() * 4;
        bytes[label_base + 2 * 3] = 7; // record 3
        bytes[label_base + 2 * 3 + 1] = 0;
        std::ofstream(path, std::ios::binary).write(bytes.data(),
                                                    static_cast<std::streamsize>(bytes.size()));
    }
    try {
        load_dataset(path);
        FAIL("expected ParseError");
    } catch (const ParseError &e) {
        CHECK(std::string(e.what()).find("record 3") != std::string::npos);
    }

    // truncated file
    store_dataset(train, path);
    {
        std::string bytes = slurp(path);
        bytes.resize(bytes.size() / 2);
        std::ofstream(path, std::ios::binary | std::ios::trunc)
            .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_dataset(path), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("batches partition the split") {
    auto [train, test] = gen_synthetic(4, 5, 53, 11, 2.0, 0.5, 13);

    // oversized batch: a single permutation of the whole split
    auto single = batches(train, 100, 5, 0);
    REQUIRE(single.size() == 1);
    CHECK(single[0].features.rows() == 53);

    auto parts = batches(train, 8, 5, 0);
    CHECK(parts.size() == 7);
    CHECK(parts.back().features.rows() == 5); // short tail kept
    std::set<std::size_t> seen;
    for (const auto &b : parts) {
        REQUIRE(b.indices.size() == b.labels.size());
        for (std::size_t i = 0; i < b.indices.size(); ++i) {
            CHECK(!seen.contains(b.indices[i]));
            seen.insert(b.indices[i]);
            CHECK(b.labels[i] == train.labels[b.indices[i]]);
            for (std::size_t d = 0; d < b.features.cols(); ++d)
                CHECK(b.features(i, d) == train.features(b.indices[i], d));
        }
    }
    CHECK(seen.size() == 53);

    // determinism per (seed, epoch)
    auto again = batches(train, 8, 5, 0);
    for (std::size_t k = 0; k < parts.size(); ++k)
        CHECK(parts[k].indices == again[k].indices);

    CHECK_THROWS_AS(batches(train, 0, 5, 0), std::domain_error);
}

TEST_CASE("permutations differ across epochs") {
    auto [train, test] = gen_synthetic(4, 5, 32, 8, 2.0, 0.5, 14);
    std::set<std::vector<std::size_t>> perms;
    for (std::size_t epoch = 0; epoch < 100; ++epoch) {
        auto parts = batches(train, 64, 21, epoch);
        REQUIRE(parts.size() == 1);
        perms.insert(parts[0].indices);
    }
    CHECK(perms.size() == 100);
}
