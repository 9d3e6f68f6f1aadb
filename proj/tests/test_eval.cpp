#include "doctest.h"
#include "helpers.hpp"

#include <algorithm>
#include <map>

#include "binsight/errors.hpp"
#include "binsight/eval.hpp"

using namespace binsight;

namespace {

DatasetManifest balanced_manifest(std::size_t per_stratum)
{
    DatasetManifest m;
    for (int mal = 0; mal < 2; ++mal)
        for (int mod = 0; mod < 2; ++mod)
            for (std::size_t i = 0; i < per_stratum; ++i)
                m.entries.push_back({"f" + std::to_string(mal) + std::to_string(mod) +
                                         "_" + std::to_string(i),
                                     mal, mod, Split::Train});
    return m;
}

} // namespace

TEST_CASE("split_dataset hits 80/10/10 exactly on divisible strata")
{
    DatasetManifest m;
    for (int i = 0; i < 100; ++i)
        m.entries.push_back({"f" + std::to_string(i), 0, 0, Split::Train});
    split_dataset(m, 1);
    std::map<Split, int> counts;
    for (const auto& e : m.entries)
        ++counts[e.split];
    CHECK(counts[Split::Train] == 80);
    CHECK(counts[Split::Test] == 10);
    CHECK(counts[Split::Validation] == 10);

    DatasetManifest b = balanced_manifest(20);  // each stratum divides evenly
    split_dataset(b, 1);
    counts.clear();
    for (const auto& e : b.entries)
        ++counts[e.split];
    CHECK(counts[Split::Train] == 64);
    CHECK(counts[Split::Test] == 8);
    CHECK(counts[Split::Validation] == 8);
}

TEST_CASE("split_dataset forces 8/1/1 on ten entries")
{
    DatasetManifest m;
    for (int i = 0; i < 10; ++i)
        m.entries.push_back({"f" + std::to_string(i), 0, 0, Split::Train});
    split_dataset(m, 3);
    std::map<Split, int> counts;
    for (const auto& e : m.entries)
        ++counts[e.split];
    CHECK(counts[Split::Train] == 8);
    CHECK(counts[Split::Test] == 1);
    CHECK(counts[Split::Validation] == 1);
}

TEST_CASE("split_dataset keeps per-stratum proportions within one sample")
{
    DatasetManifest m = balanced_manifest(13);  // 52 entries, non-divisible strata
    split_dataset(m, 5);
    for (int mal = 0; mal < 2; ++mal)
        for (int mod = 0; mod < 2; ++mod) {
            int train = 0, test = 0, val = 0, n = 0;
            for (const auto& e : m.entries) {
                if (e.label_malicious != mal || e.label_modified != mod)
                    continue;
                ++n;
                if (e.split == Split::Train) ++train;
                else if (e.split == Split::Test) ++test;
                else ++val;
            }
            CHECK(std::abs(train - 0.8 * n) <= 1.0);
            CHECK(std::abs(test - 0.1 * n) <= 1.0);
            CHECK(std::abs(val - 0.1 * n) <= 1.0);
            CHECK(train + test + val == n);  // partition
        }
}

TEST_CASE("split_dataset is deterministic per seed")
{
    DatasetManifest a = balanced_manifest(13);
    DatasetManifest b = balanced_manifest(13);
    split_dataset(a, 42);
    split_dataset(b, 42);
    for (std::size_t i = 0; i < a.entries.size(); ++i)
        CHECK(a.entries[i].split == b.entries[i].split);
}

TEST_CASE("split_dataset rejects tiny datasets")
{
    DatasetManifest m;
    for (int i = 0; i < 9; ++i)
        m.entries.push_back({"f" + std::to_string(i), 0, 0, Split::Train});
    CHECK_THROWS_AS(split_dataset(m, 0), TooFewSamplesError);
}

TEST_CASE("compute_metrics on the worked example")
{
    const ConfusionMatrix cm{5, 1, 2, 2};  // tp fp tn fn
    const Metrics m = compute_metrics(cm);
    CHECK(m.accuracy == doctest::Approx(0.7).epsilon(1e-4));
    CHECK(m.precision == doctest::Approx(0.8333).epsilon(1e-4));
    CHECK(m.recall == doctest::Approx(0.7143).epsilon(1e-4));
    CHECK(m.f1 == doctest::Approx(0.7692).epsilon(1e-4));
}

TEST_CASE("compute_metrics zero-denominator conventions")
{
    const Metrics m = compute_metrics(ConfusionMatrix{0, 0, 5, 3});
    CHECK(m.precision == 0.0);
    CHECK(m.recall == 0.0);
    CHECK(m.f1 == 0.0);

    const Metrics perfect = compute_metrics(ConfusionMatrix{4, 0, 6, 0});
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);
}

TEST_CASE("f1 lies between precision and recall")
{
    for (std::uint64_t tp = 0; tp < 4; ++tp)
        for (std::uint64_t fp = 0; fp < 4; ++fp)
            for (std::uint64_t fn = 0; fn < 4; ++fn) {
                const ConfusionMatrix cm{tp, fp, 2, fn};
                const Metrics m = compute_metrics(cm);
                if (m.precision > 0.0 && m.recall > 0.0) {
                    CHECK(m.f1 >= std::min(m.precision, m.recall) - 1e-12);
                    CHECK(m.f1 <= std::max(m.precision, m.recall) + 1e-12);
                }
            }
}

TEST_CASE("evaluate applies the >= threshold rule")
{
    const std::vector<double> constant(6, 0.5);
    const std::vector<int> labels{1, 1, 0, 0, 0, 1};
    const Evaluation e = evaluate(constant, labels, 0.5);
    CHECK(e.cm.tp == 3);
    CHECK(e.cm.fp == 3);  // every negative predicted positive
    CHECK(e.cm.fn == 0);
    CHECK(e.cm.tn == 0);
}

TEST_CASE("an oracle predictor scores perfectly")
{
    const std::vector<int> labels{1, 0, 1, 1, 0};
    std::vector<double> scores(labels.begin(), labels.end());
    const Evaluation e = evaluate(scores, labels);
    CHECK(e.metrics.accuracy == 1.0);
    CHECK(e.metrics.f1 == 1.0);
}

TEST_CASE("raising the threshold never increases false positives")
{
    const std::vector<double> scores{0.1, 0.3, 0.45, 0.5, 0.62, 0.8, 0.9};
    const std::vector<int> labels{0, 1, 0, 0, 1, 0, 1};
    std::uint64_t prev_fp = scores.size();
    for (double t : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
        const Evaluation e = evaluate(scores, labels, t);
        CHECK(e.cm.fp <= prev_fp);
        prev_fp = e.cm.fp;
    }
}

TEST_CASE("manifest CSV round-trips")
{
    test_helpers::TempDir dir("manifest");
    DatasetManifest m = balanced_manifest(3);
    split_dataset(m, 2);
    const auto path = dir.path() / "manifest.csv";
    write_manifest(m, path);
    const DatasetManifest back = read_manifest(path);
    REQUIRE(back.entries.size() == m.entries.size());
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        CHECK(back.entries[i].path == m.entries[i].path);
        CHECK(back.entries[i].label_malicious == m.entries[i].label_malicious);
        CHECK(back.entries[i].label_modified == m.entries[i].label_modified);
        CHECK(back.entries[i].split == m.entries[i].split);
    }
}

TEST_CASE("read_manifest names the offending line")
{
    test_helpers::TempDir dir("manifest_err");
    const auto path = dir.path() / "bad.csv";
    {
        std::ofstream out(path);
        out << "path,label_malicious,label_modified,split\n";
        out << "a.bin,0,0,train\n";
        out << "b.bin,2,0,train\n";
    }
    try {
        read_manifest(path);
        FAIL("expected ManifestError");
    } catch (const ManifestError& e) {
        CHECK(e.line() == 3);
    }

    {
        std::ofstream out(path);
        out << "path,label_malicious,label_modified,split\n";
        out << "a.bin,0,0,train\n";
        out << "a.bin,1,0,test\n";  // duplicate path
    }
    CHECK_THROWS_AS(read_manifest(path), ManifestError);
}
