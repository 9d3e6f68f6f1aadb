#include "binsight/corpus.hpp"
#include "binsight/errors.hpp"
#include "binsight/rng.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace binsight {

const std::array<std::uint8_t, kMotifLen>& planted_motif()
{
    static const std::array<std::uint8_t, kMotifLen> motif = [] {
        std::array<std::uint8_t, kMotifLen> m{};
        Rng rng(0xB105F00Dull);
        for (auto& b : m)
            b = static_cast<std::uint8_t>(0xC0 | (rng.next() & 0x3F));  // bright band
        return m;
    }();
    return motif;
}

namespace {

void put16(std::vector<std::uint8_t>& b, std::size_t off, std::uint16_t v)
{
    b[off] = v & 0xff;
    b[off + 1] = (v >> 8) & 0xff;
}

void put32(std::vector<std::uint8_t>& b, std::size_t off, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        b[off + i] = (v >> (8 * i)) & 0xff;
}

void put_section(std::vector<std::uint8_t>& b, std::size_t off, const char* name,
                 std::uint32_t raw_offset, std::uint32_t raw_size,
                 std::uint32_t vaddr, std::uint32_t chars)
{
    std::memcpy(&b[off], name, std::strlen(name));
    put32(b, off + 8, raw_size);    // VirtualSize
    put32(b, off + 12, vaddr);
    put32(b, off + 16, raw_size);   // SizeOfRawData
    put32(b, off + 20, raw_offset);
    put32(b, off + 36, chars);
}

// Low-entropy structured filler: skewed draws from a small token list.
void fill_structured(std::vector<std::uint8_t>& out, std::size_t n, Rng& rng)
{
    static const char* kTokens[] = {
        "push ", "mov eax,", "call ", "ret\n", "xor ecx,ecx ", "lea esi,",
        "data segment ", "::load ", "0040", "kernel.base ", "str_table ", "\n\t",
    };
    constexpr std::size_t kTokenCount = sizeof(kTokens) / sizeof(kTokens[0]);

    out.reserve(out.size() + n);
    std::size_t written = 0;
    while (written < n) {
        // triangular skew keeps the byte distribution peaked
        const std::size_t t = std::min(rng.below(kTokenCount), rng.below(kTokenCount));
        for (const char* p = kTokens[t]; *p && written < n; ++p, ++written)
            out.push_back(static_cast<std::uint8_t>(*p));
    }
}

void fill_uniform(std::vector<std::uint8_t>& out, std::size_t n, Rng& rng)
{
    out.reserve(out.size() + n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(rng.byte());
}

} // namespace

std::vector<std::uint8_t> wrap_minimal_pe(const std::vector<std::uint8_t>& payload)
{
    std::vector<std::uint8_t> b(kCorpusHeaderLen, 0);
    b[0] = 'M';
    b[1] = 'Z';
    put32(b, 0x3c, 0x80);
    b[0x80] = 'P';
    b[0x81] = 'E';
    put16(b, 0x84, 0x014c);  // i386
    put16(b, 0x86, 2);       // two sections
    put16(b, 0x94, 0);       // no optional header
    put16(b, 0x96, 0x0102);

    std::size_t text = (payload.size() / 2) & ~std::size_t{511};
    if (text == 0) text = payload.size();
    const std::size_t data = payload.size() - text;
    put_section(b, 0x98, ".text", kCorpusHeaderLen, static_cast<std::uint32_t>(text),
                0x1000, 0x60000020);
    put_section(b, 0xc0, ".data", static_cast<std::uint32_t>(kCorpusHeaderLen + text),
                static_cast<std::uint32_t>(data), 0x10000, 0xC0000040);

    b.insert(b.end(), payload.begin(), payload.end());
    return b;
}

CorpusResult generate_synthetic_corpus(const CorpusConfig& config)
{
    if (config.per_stratum < 10)
        throw TooFewSamplesError("generate_synthetic_corpus: need >= 10 per stratum");
    if (config.min_size < 2 * kCorpusHeaderLen || config.max_size < config.min_size)
        throw Error("generate_synthetic_corpus: bad size range");

    std::filesystem::create_directories(config.out_dir);

    CorpusResult result;
    Rng master(config.seed);

    constexpr int strata[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    for (const auto& [malicious, modified] : strata) {
        for (std::size_t i = 0; i < config.per_stratum; ++i) {
            Rng rng(master.next());

            const double lo = std::log(static_cast<double>(config.min_size));
            const double hi = std::log(static_cast<double>(config.max_size));
            const std::size_t file_len = static_cast<std::size_t>(
                std::lround(std::exp(rng.uniform(lo, hi))));
            const std::size_t payload_len = file_len - kCorpusHeaderLen;

            std::vector<std::uint8_t> payload;
            if (modified)
                fill_uniform(payload, payload_len, rng);
            else
                fill_structured(payload, payload_len, rng);

            std::vector<std::uint8_t> file = wrap_minimal_pe(payload);

            std::size_t motif_offset = CorpusResult::kNoMotif;
            if (malicious) {
                // row-aligned (multiple of 512) so the motif occupies whole
                // image rows at every width in the schedule
                const std::size_t k_max = (file.size() - kMotifLen) / 512;
                motif_offset = 512 * (1 + rng.below(k_max));
                std::memcpy(&file[motif_offset], planted_motif().data(), kMotifLen);
            }

            if (config.padding_fraction > 0.0 && rng.uniform() < config.padding_fraction)
                file.insert(file.end(), config.padding_len, 0x00);

            char name[64];
            std::snprintf(name, sizeof name, "%s_%s_%04zu.bin",
                          malicious ? "malicious" : "benign",
                          modified ? "modified" : "clean", i);
            const auto path = config.out_dir / name;
            {
                std::ofstream out(path, std::ios::binary);
                if (!out)
                    throw IoError("cannot write corpus file: " + path.string());
                out.write(reinterpret_cast<const char*>(file.data()),
                          static_cast<std::streamsize>(file.size()));
            }

            ManifestEntry e;
            e.path = path.string();
            e.label_malicious = malicious;
            e.label_modified = modified;
            result.manifest.entries.push_back(std::move(e));
            result.motif_offsets.push_back(motif_offset);
        }
    }

    split_dataset(result.manifest, config.seed);
    return result;
}

} // namespace binsight
