#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "binsight/eval.hpp"

namespace binsight {

/// Synthetic four-quadrant corpus standing in for a real labeled collection:
/// benign/malicious x clean/modified. Clean files are low-entropy structured
/// byte streams, modified files are near-uniform random payloads, and every
/// malicious file carries a fixed 256-byte planted motif. All files are
/// wrapped in a minimal two-section PE image.
struct CorpusConfig {
    std::uint64_t seed = 7;
    std::size_t per_stratum = 250;       // files per quadrant, >= 10
    std::filesystem::path out_dir;
    double padding_fraction = 0.0;       // share of files given a trailing filler run
    std::size_t padding_len = 8192;
    std::size_t min_size = 4 * 1024;     // drawn log-uniform in [min_size, max_size]
    std::size_t max_size = 64 * 1024;
};

struct CorpusResult {
    DatasetManifest manifest;            // split already assigned
    // Per entry: motif file offset, or npos for benign files.
    std::vector<std::size_t> motif_offsets;
    static constexpr std::size_t kNoMotif = static_cast<std::size_t>(-1);
};

constexpr std::size_t kMotifLen = 256;

/// The fixed high-byte motif planted in every malicious file.
const std::array<std::uint8_t, kMotifLen>& planted_motif();

/// Size of the PE header region in generated files (payload starts there).
constexpr std::size_t kCorpusHeaderLen = 512;

/// Builds a minimal parseable PE wrapping `payload` (.text/.data sections).
std::vector<std::uint8_t> wrap_minimal_pe(const std::vector<std::uint8_t>& payload);

/// Writes the corpus files and returns the manifest. Deterministic: the same
/// seed yields byte-identical files. Throws TooFewSamplesError if
/// per_stratum < 10.
CorpusResult generate_synthetic_corpus(const CorpusConfig& config);

} // namespace binsight
