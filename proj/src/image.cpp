#include "binsight/image.hpp"
#include "binsight/errors.hpp"
#include "binsight/stats.hpp"

#include <array>
#include <cmath>
#include <fstream>

namespace binsight {

std::size_t image_width_for(std::size_t file_len)
{
    if (file_len < 10 * 1024) return 32;
    if (file_len < 30 * 1024) return 64;
    if (file_len < 60 * 1024) return 128;
    if (file_len < 100 * 1024) return 256;
    if (file_len < 200 * 1024) return 384;
    if (file_len < 500 * 1024) return 512;
    if (file_len < 1024 * 1024) return 768;
    return 1024;
}

GrayImage to_grayscale(const RawBinary& bin)
{
    const std::size_t n = bin.bytes.size();
    if (n == 0)
        throw EmptyFileError("to_grayscale: empty input");

    GrayImage img;
    img.width = image_width_for(n);
    img.height = (n + img.width - 1) / img.width;
    img.pad_len = img.width * img.height - n;
    img.pixels.assign(img.width * img.height, 0);
    std::copy(bin.bytes.begin(), bin.bytes.end(), img.pixels.begin());
    return img;
}

namespace {

// Per-byte entropy of the 64-byte window centered on the offset, via an
// incremental histogram. S tracks sum(c * log2 c); H = log2(N) - S/N.
std::vector<std::uint8_t> entropy_plane(const std::vector<std::uint8_t>& b)
{
    const std::size_t n = b.size();
    constexpr std::size_t half = kEntropyWindow / 2;

    std::array<double, kEntropyWindow + 1> clog{};
    for (std::size_t c = 1; c <= kEntropyWindow; ++c)
        clog[c] = static_cast<double>(c) * std::log2(static_cast<double>(c));

    std::array<std::uint32_t, 256> counts{};
    double s = 0.0;
    std::size_t lo = 0, hi = 0;
    auto add = [&](std::uint8_t v) {
        s -= clog[counts[v]];
        s += clog[++counts[v]];
    };
    auto remove = [&](std::uint8_t v) {
        s -= clog[counts[v]];
        s += clog[--counts[v]];
    };

    std::vector<std::uint8_t> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t want_lo = i >= half ? i - half : 0;
        const std::size_t want_hi = std::min(n, i + half);
        while (hi < want_hi) add(b[hi++]);
        while (lo < want_lo) remove(b[lo++]);
        const double len = static_cast<double>(hi - lo);
        double h = std::log2(len) - s / len;
        if (h < 0.0) h = 0.0;
        if (h > 8.0) h = 8.0;
        out[i] = static_cast<std::uint8_t>(std::lround(255.0 * h / 8.0));
    }
    return out;
}

} // namespace

RgbImage to_hit_rgb(const RawBinary& bin)
{
    const GrayImage gray = to_grayscale(bin);
    const std::vector<std::uint8_t> ent = entropy_plane(bin.bytes);

    RgbImage img;
    img.width = gray.width;
    img.height = gray.height;
    img.pad_len = gray.pad_len;
    img.pixels.assign(3 * img.width * img.height, 0);
    for (std::size_t i = 0; i < bin.bytes.size(); ++i) {
        img.pixels[3 * i + 0] = ent[i];
        img.pixels[3 * i + 1] = bin.bytes[i];
        img.pixels[3 * i + 2] = ent[i];
    }
    return img;
}

namespace {

// Exact fractional-area box filter: output (oy,ox) averages the source
// rectangle [oy*sh/64, (oy+1)*sh/64) x [ox*sw/64, (ox+1)*sw/64).
void box_resample_plane(const std::uint8_t* src, std::size_t sw, std::size_t sh,
                        std::size_t stride, double* dst)
{
    constexpr std::size_t side = ModelInput::kSide;
    const double sy = static_cast<double>(sh) / side;
    const double sx = static_cast<double>(sw) / side;

    for (std::size_t oy = 0; oy < side; ++oy) {
        const double y0 = oy * sy, y1 = (oy + 1) * sy;
        const std::size_t iy0 = static_cast<std::size_t>(y0);
        const std::size_t iy1 = std::min<std::size_t>(sh, static_cast<std::size_t>(std::ceil(y1)));
        for (std::size_t ox = 0; ox < side; ++ox) {
            const double x0 = ox * sx, x1 = (ox + 1) * sx;
            const std::size_t ix0 = static_cast<std::size_t>(x0);
            const std::size_t ix1 = std::min<std::size_t>(sw, static_cast<std::size_t>(std::ceil(x1)));

            double acc = 0.0;
            for (std::size_t y = iy0; y < iy1; ++y) {
                const double wy = std::min(y1, static_cast<double>(y + 1)) -
                                  std::max(y0, static_cast<double>(y));
                const std::uint8_t* row = src + y * sw * stride;
                for (std::size_t x = ix0; x < ix1; ++x) {
                    const double wx = std::min(x1, static_cast<double>(x + 1)) -
                                      std::max(x0, static_cast<double>(x));
                    acc += wy * wx * row[x * stride];
                }
            }
            dst[oy * side + ox] = acc / (sy * sx) / 255.0;
        }
    }
}

} // namespace

ModelInput resample(const GrayImage& img)
{
    if (img.width == 0 || img.height == 0)
        throw Error("resample: empty image");
    ModelInput in;
    in.channels = 1;
    in.values.assign(ModelInput::kSide * ModelInput::kSide, 0.0);
    box_resample_plane(img.pixels.data(), img.width, img.height, 1, in.values.data());
    return in;
}

ModelInput resample(const RgbImage& img)
{
    if (img.width == 0 || img.height == 0)
        throw Error("resample: empty image");
    ModelInput in;
    in.channels = 3;
    const std::size_t plane = ModelInput::kSide * ModelInput::kSide;
    in.values.assign(3 * plane, 0.0);
    for (std::size_t c = 0; c < 3; ++c)
        box_resample_plane(img.pixels.data() + c, img.width, img.height, 3,
                           in.values.data() + c * plane);
    return in;
}

namespace {

void write_pnm(const std::filesystem::path& path, const char* magic,
               std::size_t w, std::size_t h,
               const std::uint8_t* data, std::size_t len)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write: " + path.string());
    out << magic << "\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!out)
        throw IoError("write failed: " + path.string());
}

} // namespace

void write_pgm(const GrayImage& img, const std::filesystem::path& path)
{
    write_pnm(path, "P5", img.width, img.height, img.pixels.data(), img.pixels.size());
}

void write_ppm(const RgbImage& img, const std::filesystem::path& path)
{
    write_pnm(path, "P6", img.width, img.height, img.pixels.data(), img.pixels.size());
}

} // namespace binsight
