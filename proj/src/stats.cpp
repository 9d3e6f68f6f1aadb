#include "binsight/stats.hpp"
#include "binsight/errors.hpp"

#include <cmath>

namespace binsight {

Histogram256 byte_histogram(std::span<const std::uint8_t> bytes)
{
    Histogram256 h;
    for (std::uint8_t b : bytes)
        ++h.counts[b];
    h.total = bytes.size();
    return h;
}

double shannon_entropy(const Histogram256& h)
{
    if (h.total == 0)
        return 0.0;
    const double n = static_cast<double>(h.total);
    double acc = 0.0;
    for (std::uint64_t c : h.counts) {
        if (c == 0)
            continue;
        const double p = static_cast<double>(c) / n;
        acc -= p * std::log2(p);
    }
    // guard against -0.0 and tiny negative rounding
    return acc < 0.0 ? 0.0 : acc;
}

EntropyProfile sliding_entropy(const RawBinary& bin, std::size_t window, std::size_t stride)
{
    if (window == 0 || stride == 0)
        throw Error("sliding_entropy: window and stride must be >= 1");

    EntropyProfile p;
    p.window_size = window;
    p.stride = stride;

    const std::size_t n = bin.bytes.size();
    if (n < window) {
        p.values.push_back(shannon_entropy(byte_histogram(bin)));
        return p;
    }
    const std::size_t count = (n - window) / stride + 1;
    p.values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto slice = std::span(bin.bytes).subspan(i * stride, window);
        p.values.push_back(shannon_entropy(byte_histogram(slice)));
    }
    return p;
}

double uniformity_score(const Histogram256& h)
{
    return shannon_entropy(h) / 8.0;
}

std::optional<PaddingRegion> detect_padding(const RawBinary& bin, std::uint64_t min_run)
{
    if (min_run == 0)
        throw Error("detect_padding: min_run must be >= 1");
    const auto& b = bin.bytes;
    if (b.empty())
        return std::nullopt;

    const std::uint8_t fill = b.back();
    std::size_t start = b.size();
    while (start > 0 && b[start - 1] == fill)
        --start;
    const std::uint64_t len = b.size() - start;
    if (len < min_run)
        return std::nullopt;
    return PaddingRegion{start, len, fill};
}

} // namespace binsight
