#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "helpers.hpp"
#include "tft/dataset.hpp"

using namespace tft;
namespace fs = std::filesystem;

namespace {

DatasetParams desk_params(int classes, long per_class, int channels = 1) {
    FleetParams fleet;
    auto roster = class_roster(fleet);
    DatasetParams p;
    p.specs.assign(roster.begin(), roster.begin() + classes);
    p.per_class = per_class;
    p.channels = channels;
    p.plan.sample_rate = fleet.sample_rate;
    p.plan.fmin = 10.0;
    p.plan.fmax = fleet.sample_rate / 2.0;
    p.plan.voices = 8;
    p.plan.ssq_bins = 48;
    p.out_h = 32;
    p.out_w = 32;
    p.master_seed = 42;
    return p;
}

}  // namespace

TEST_CASE("tfr round trip is bitwise stable") {
    auto dir = testutil::scratch_dir("tfr_io");
    Rng rng(5);
    Tensor t = uniform_tensor({5, 4, 2}, -3.0, 3.0, rng);
    write_tfr(dir / "a.tfr", t);
    Tensor back = read_tfr(dir / "a.tfr");
    CHECK(back.shape() == t.shape());
    write_tfr(dir / "b.tfr", back);
    CHECK(testutil::slurp(dir / "a.tfr") == testutil::slurp(dir / "b.tfr"));
    Tensor back2 = read_tfr(dir / "b.tfr");
    CHECK(back.data() == back2.data());

    CHECK_THROWS_AS(read_tfr(dir / "missing.tfr"), IoError);
}

TEST_CASE("manifest round trip") {
    auto dir = testutil::scratch_dir("manifest_io");
    std::vector<ManifestRow> rows{
        {"samples/s000000.tfr", 0, "normal", 1050.0, std::numeric_limits<double>::infinity(), 7},
        {"samples/s000001.tfr", 1, "IRF", 1050.0, 5.0, 8},
    };
    write_manifest(dir / "m.tsv", rows);
    auto back = read_manifest(dir / "m.tsv");
    REQUIRE(back.size() == 2);
    CHECK(back[0].path == rows[0].path);
    CHECK(back[0].label == 0);
    CHECK(std::isinf(back[0].snr_db));
    CHECK(back[1].snr_db == 5.0);
    CHECK(back[1].seed == 8);
    write_manifest(dir / "m2.tsv", back);
    CHECK(testutil::slurp(dir / "m.tsv") == testutil::slurp(dir / "m2.tsv"));
}

TEST_CASE("build_dataset: counts, shapes, determinism") {
    auto dir = testutil::scratch_dir("build_small");
    auto params = desk_params(4, 8);
    auto rows = build_dataset(params, dir);
    CHECK(rows.size() == 32);
    int files = 0;
    for ([[maybe_unused]] auto& e : fs::directory_iterator(dir / "samples")) ++files;
    CHECK(files == 32);

    auto samples = load_samples(dir, rows);
    for (const auto& s : samples) {
        CHECK(s.tfr.shape() == std::vector<int>{32, 32, 1});
        for (double v : s.tfr.data()) CHECK(v >= 0.0);
    }

    SUBCASE("byte-identical rerun") {
        auto dir2 = testutil::scratch_dir("build_small_rerun");
        build_dataset(params, dir2);
        CHECK(testutil::slurp(dir / "manifest.tsv") == testutil::slurp(dir2 / "manifest.tsv"));
        for (const auto& r : rows)
            CHECK(testutil::slurp(dir / r.path) == testutil::slurp(dir2 / r.path));
    }
    SUBCASE("per-class labels are balanced") {
        std::map<int, int> counts;
        for (const auto& r : rows) ++counts[r.label];
        for (auto& [label, count] : counts) CHECK(count == 8);
    }
}

TEST_CASE("build_dataset rejects fewer than two classes") {
    auto dir = testutil::scratch_dir("build_one_class");
    auto params = desk_params(4, 2);
    params.specs.resize(1);
    CHECK_THROWS_AS(build_dataset(params, dir), ConfigError);
}

TEST_CASE("build_dataset: three channels stack phase-shifted planes") {
    auto dir = testutil::scratch_dir("build_c3");
    auto params = desk_params(2, 2, 3);
    auto rows = build_dataset(params, dir);
    auto samples = load_samples(dir, rows);
    REQUIRE(samples.size() == 4);
    for (const auto& s : samples) CHECK(s.tfr.shape() == std::vector<int>{32, 32, 3});
    // channels are distinct realizations
    const auto& t = samples[1].tfr;
    double diff = 0.0;
    for (int i = 0; i < 32; ++i)
        for (int j = 0; j < 32; ++j)
            diff += std::abs(t.data()[(i * 32 + j) * 3] - t.data()[(i * 32 + j) * 3 + 1]);
    CHECK(diff > 0.0);
}

TEST_CASE("split_dataset") {
    std::vector<ManifestRow> rows;
    for (int label = 0; label < 4; ++label)
        for (int i = 0; i < 25; ++i)
            rows.push_back({"p" + std::to_string(label) + "_" + std::to_string(i), label,
                            "c" + std::to_string(label), 1050.0, 0.0, 0});

    SUBCASE("60/20/20 on 100 samples") {
        auto split = split_dataset(rows, 0.6, 0.2, 0.2, Rng(3));
        CHECK(split.train.size() == 60);
        CHECK(split.val.size() == 20);
        CHECK(split.test.size() == 20);
        // stratification: per-class counts preserved proportionally +/- 1
        for (auto part : {&split.train, &split.val, &split.test}) {
            std::map<int, int> counts;
            for (const auto& r : *part) ++counts[r.label];
            CHECK(counts.size() == 4);
            const double expect = static_cast<double>(part->size()) / 4.0;
            for (auto& [label, count] : counts) CHECK(std::abs(count - expect) <= 1.0);
        }
        // no duplicates, full coverage
        std::set<std::string> seen;
        for (auto part : {&split.train, &split.val, &split.test})
            for (const auto& r : *part) seen.insert(r.path);
        CHECK(seen.size() == 100);
    }
    SUBCASE("degenerate all-train split") {
        auto split = split_dataset(rows, 1.0, 0.0, 0.0, Rng(3));
        CHECK(split.train.size() == 100);
        CHECK(split.val.empty());
        CHECK(split.test.empty());
    }
    SUBCASE("fractions must sum to one") {
        CHECK_THROWS_AS(split_dataset(rows, 0.5, 0.2, 0.2, Rng(3)), ConfigError);
    }
    SUBCASE("class with too few samples fails stratification") {
        std::vector<ManifestRow> tiny = rows;
        tiny.push_back({"lonely", 9, "c9", 1050.0, 0.0, 0});
        CHECK_THROWS_AS(split_dataset(tiny, 0.6, 0.2, 0.2, Rng(3)), ConfigError);
    }
    SUBCASE("seeded split is deterministic") {
        auto a = split_dataset(rows, 0.6, 0.2, 0.2, Rng(11));
        auto b = split_dataset(rows, 0.6, 0.2, 0.2, Rng(11));
        REQUIRE(a.train.size() == b.train.size());
        for (std::size_t i = 0; i < a.train.size(); ++i)
            CHECK(a.train[i].path == b.train[i].path);
    }
}
