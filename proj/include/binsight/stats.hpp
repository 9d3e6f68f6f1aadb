#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "binsight/binary.hpp"

namespace binsight {

inline constexpr std::size_t kEntropyWindow = 64;
inline constexpr std::size_t kEntropyStride = 64;
inline constexpr std::uint64_t kPaddingMinRun = 4096;

struct Histogram256 {
    std::array<std::uint64_t, 256> counts{};
    std::uint64_t total = 0;
};

/// Per-window Shannon entropies in bits, values in [0, 8].
struct EntropyProfile {
    std::size_t window_size = 0;
    std::size_t stride = 0;
    std::vector<double> values;
};

/// Trailing run of one repeated byte reaching the end of the file.
struct PaddingRegion {
    std::uint64_t start_offset = 0;
    std::uint64_t length = 0;
    std::uint8_t fill_byte = 0;
};

Histogram256 byte_histogram(std::span<const std::uint8_t> bytes);
inline Histogram256 byte_histogram(const RawBinary& bin) { return byte_histogram(std::span(bin.bytes)); }

/// -sum p log2 p, zero-count buckets dropped (0 * log 0 := 0).
double shannon_entropy(const Histogram256& h);

/// Entropy of each window slice. A window larger than the file degrades to
/// a single whole-file window.
EntropyProfile sliding_entropy(const RawBinary& bin, std::size_t window, std::size_t stride);

/// Normalized entropy, entropy/8. Packedness proxy: packed and encrypted
/// payloads push this toward 1.
double uniformity_score(const Histogram256& h);

std::optional<PaddingRegion> detect_padding(const RawBinary& bin, std::uint64_t min_run);

} // namespace binsight
