#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "binsight/binary.hpp"

namespace binsight {

/// Row-major 8-bit grayscale image; width * height = file_len + pad_len,
/// 0 <= pad_len < width.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;
    std::size_t pad_len = 0;
};

/// Row-major interleaved RGB, same geometry rule as GrayImage.
struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // 3 * width * height, r g b
    std::size_t pad_len = 0;
};

/// Fixed-size network input: channel-major 64x64 planes, values in [0,1].
struct ModelInput {
    static constexpr std::size_t kSide = 64;  // 64*64 = 4096 input features
    std::size_t channels = 1;
    std::vector<double> values;  // channels * kSide * kSide
};

/// Width schedule keyed on file size (thresholds in bytes, lower-inclusive).
std::size_t image_width_for(std::size_t file_len);

/// Byte b at offset i becomes pixel (i/width, i%width); trailing pixels
/// zero-padded.
GrayImage to_grayscale(const RawBinary& bin);

/// HIT-style RGB: green carries the raw byte (syntactic plane, identical to
/// the grayscale image), red and blue carry round(255 * H/8) where H is the
/// entropy of the 64-byte window centered on the byte, clamped at file edges.
RgbImage to_hit_rgb(const RawBinary& bin);

/// Box-filter area average down to 64x64, then scaled to [0,1]. Each output
/// pixel is the exact mean of its fractional source rectangle, so the global
/// mean is preserved.
ModelInput resample(const GrayImage& img);
ModelInput resample(const RgbImage& img);

/// Binary PGM (P5) / PPM (P6), maxval 255. Throws IoError.
void write_pgm(const GrayImage& img, const std::filesystem::path& path);
void write_ppm(const RgbImage& img, const std::filesystem::path& path);

} // namespace binsight
