#include "doctest.h"
#include "helpers.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "binsight/corpus.hpp"
#include "binsight/errors.hpp"
#include "binsight/stats.hpp"

using namespace binsight;

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

CorpusResult small_corpus(const std::filesystem::path& dir, std::uint64_t seed,
                          double padding_fraction = 0.0)
{
    CorpusConfig cfg;
    cfg.seed = seed;
    cfg.per_stratum = 10;
    cfg.out_dir = dir;
    cfg.padding_fraction = padding_fraction;
    return generate_synthetic_corpus(cfg);
}

} // namespace

TEST_CASE("corpus strata have the intended entropy signatures")
{
    test_helpers::TempDir dir("corpus_entropy");
    const CorpusResult result = small_corpus(dir.path(), 11);
    REQUIRE(result.manifest.entries.size() == 40);

    for (const auto& e : result.manifest.entries) {
        const auto bytes = slurp(e.path);
        REQUIRE(bytes.size() > kCorpusHeaderLen);
        const std::vector<std::uint8_t> payload(bytes.begin() + kCorpusHeaderLen,
                                                bytes.end());
        const double u = uniformity_score(byte_histogram(payload));
        if (e.label_modified)
            CHECK(u > 0.9);
        else
            CHECK(u < 0.7);
    }
}

TEST_CASE("malicious files carry the motif at the recorded offset")
{
    test_helpers::TempDir dir("corpus_motif");
    const CorpusResult result = small_corpus(dir.path(), 12);
    const auto& motif = planted_motif();

    std::size_t malicious = 0;
    for (std::size_t i = 0; i < result.manifest.entries.size(); ++i) {
        const auto& e = result.manifest.entries[i];
        const std::size_t off = result.motif_offsets[i];
        if (!e.label_malicious) {
            CHECK(off == CorpusResult::kNoMotif);
            continue;
        }
        ++malicious;
        REQUIRE(off != CorpusResult::kNoMotif);
        CHECK(off % 512 == 0);
        CHECK(off >= kCorpusHeaderLen);
        const auto bytes = slurp(e.path);
        REQUIRE(off + kMotifLen <= bytes.size());
        CHECK(std::equal(motif.begin(), motif.end(), bytes.begin() + off));
    }
    CHECK(malicious == 20);
}

TEST_CASE("the motif stays in the high-byte range")
{
    for (std::uint8_t b : planted_motif())
        CHECK(b >= 0xC0);
}

TEST_CASE("generated files parse as PE with two sections")
{
    test_helpers::TempDir dir("corpus_pe");
    const CorpusResult result = small_corpus(dir.path(), 13);
    for (const auto& e : result.manifest.entries) {
        const RawBinary bin = load_binary(e.path);
        const auto layout = parse_pe(bin);
        REQUIRE(layout.has_value());
        REQUIRE(layout->sections.size() == 2);
        CHECK(layout->sections[0].name == ".text");
        CHECK(layout->sections[1].name == ".data");
        CHECK_FALSE(layout->sections[0].truncated);
        CHECK_FALSE(layout->sections[1].truncated);
    }
}

TEST_CASE("corpus generation is byte-identical per seed")
{
    test_helpers::TempDir a("corpus_det_a");
    test_helpers::TempDir b("corpus_det_b");
    const CorpusResult ra = small_corpus(a.path(), 21);
    const CorpusResult rb = small_corpus(b.path(), 21);

    REQUIRE(ra.manifest.entries.size() == rb.manifest.entries.size());
    CHECK(ra.motif_offsets == rb.motif_offsets);
    for (std::size_t i = 0; i < ra.manifest.entries.size(); ++i) {
        const auto& ea = ra.manifest.entries[i];
        const auto& eb = rb.manifest.entries[i];
        CHECK(ea.label_malicious == eb.label_malicious);
        CHECK(ea.label_modified == eb.label_modified);
        CHECK(ea.split == eb.split);
        CHECK(std::filesystem::path(ea.path).filename() ==
              std::filesystem::path(eb.path).filename());
        CHECK(slurp(ea.path) == slurp(eb.path));
    }

    test_helpers::TempDir c("corpus_det_c");
    const CorpusResult rc = small_corpus(c.path(), 22);
    bool any_diff = false;
    for (std::size_t i = 0; i < ra.manifest.entries.size() && !any_diff; ++i)
        any_diff = slurp(ra.manifest.entries[i].path) !=
                   slurp(rc.manifest.entries[i].path);
    CHECK(any_diff);
}

TEST_CASE("padding_fraction 1.0 gives every file a detectable trailing run")
{
    test_helpers::TempDir dir("corpus_pad");
    const CorpusResult result = small_corpus(dir.path(), 14, 1.0);
    for (const auto& e : result.manifest.entries) {
        const auto bytes = slurp(e.path);
        const auto pad = detect_padding(RawBinary{bytes, e.path}, kPaddingMinRun);
        REQUIRE(pad.has_value());
        CHECK(pad->fill_byte == 0x00);
        CHECK(pad->length >= 8192);
        CHECK(pad->start_offset + pad->length == bytes.size());
    }
}

TEST_CASE("splits cover all four strata")
{
    test_helpers::TempDir dir("corpus_split");
    const CorpusResult result = small_corpus(dir.path(), 15);
    std::map<std::pair<int, int>, std::map<Split, int>> counts;
    for (const auto& e : result.manifest.entries)
        ++counts[{e.label_malicious, e.label_modified}][e.split];
    REQUIRE(counts.size() == 4);
    for (auto& [stratum, per_split] : counts) {
        CHECK(per_split[Split::Train] == 8);
        CHECK(per_split[Split::Test] == 1);
        CHECK(per_split[Split::Validation] == 1);
    }
}

TEST_CASE("generate_synthetic_corpus rejects tiny strata")
{
    test_helpers::TempDir dir("corpus_tiny");
    CorpusConfig cfg;
    cfg.per_stratum = 9;
    cfg.out_dir = dir.path();
    CHECK_THROWS_AS(generate_synthetic_corpus(cfg), TooFewSamplesError);
}

TEST_CASE("wrap_minimal_pe reproduces the payload after its header")
{
    std::vector<std::uint8_t> payload(3000);
    for (std::size_t i = 0; i < payload.size(); ++i)
        payload[i] = static_cast<std::uint8_t>(i);
    const auto file = wrap_minimal_pe(payload);
    REQUIRE(file.size() == kCorpusHeaderLen + payload.size());
    CHECK(std::equal(payload.begin(), payload.end(),
                     file.begin() + kCorpusHeaderLen));
    const auto layout = parse_pe(RawBinary{file, "<wrap>"});
    REQUIRE(layout.has_value());
    CHECK(layout->sections.size() == 2);
}
