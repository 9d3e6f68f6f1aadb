#include "binsight/binary.hpp"
#include "binsight/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace binsight {

RawBinary load_binary(const std::filesystem::path& path)
{
    std::error_code ec;
    if (!std::filesystem::exists(path, ec) || ec)
        throw NotFoundError("no such file: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open: " + path.string());

    RawBinary bin;
    bin.source_path = path.string();
    in.seekg(0, std::ios::end);
    const auto len = in.tellg();
    if (len < 0)
        throw IoError("cannot stat: " + path.string());
    if (len == 0)
        throw EmptyFileError("empty file: " + path.string());
    bin.bytes.resize(static_cast<std::size_t>(len));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(bin.bytes.data()),
            static_cast<std::streamsize>(bin.bytes.size()));
    if (!in)
        throw IoError("short read: " + path.string());
    return bin;
}

namespace {

std::uint16_t rd16(const std::vector<std::uint8_t>& b, std::size_t off)
{
    return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

std::uint32_t rd32(const std::vector<std::uint8_t>& b, std::size_t off)
{
    return static_cast<std::uint32_t>(b[off]) |
           (static_cast<std::uint32_t>(b[off + 1]) << 8) |
           (static_cast<std::uint32_t>(b[off + 2]) << 16) |
           (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

std::string escape_name(const std::uint8_t* p, std::size_t n)
{
    // trim trailing NULs, escape anything non-printable
    while (n > 0 && p[n - 1] == 0) --n;
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (p[i] >= 0x20 && p[i] < 0x7f) {
            out.push_back(static_cast<char>(p[i]));
        } else {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\x%02X", p[i]);
            out += buf;
        }
    }
    return out;
}

} // namespace

std::optional<PeLayout> parse_pe(const RawBinary& bin)
{
    const auto& b = bin.bytes;
    const std::size_t n = b.size();

    if (n < 0x40 || b[0] != 'M' || b[1] != 'Z')
        return std::nullopt;
    const std::uint32_t e_lfanew = rd32(b, 0x3c);
    // need "PE\0\0" + 20-byte COFF header in bounds
    if (static_cast<std::uint64_t>(e_lfanew) + 24 > n)
        return std::nullopt;
    if (b[e_lfanew] != 'P' || b[e_lfanew + 1] != 'E' ||
        b[e_lfanew + 2] != 0 || b[e_lfanew + 3] != 0)
        return std::nullopt;

    const std::size_t coff = e_lfanew + 4;
    PeLayout layout;
    layout.machine = rd16(b, coff);
    const std::uint16_t n_sections = rd16(b, coff + 2);
    const std::uint16_t opt_size = rd16(b, coff + 16);

    const std::uint64_t table = static_cast<std::uint64_t>(coff) + 20 + opt_size;
    for (std::uint16_t i = 0; i < n_sections; ++i) {
        const std::uint64_t hdr = table + 40ull * i;
        if (hdr + 40 > n)
            break;  // declared sections past EOF: keep what we could read
        SectionInfo s;
        s.name = escape_name(&b[hdr], 8);
        s.raw_size = rd32(b, static_cast<std::size_t>(hdr) + 16);
        s.raw_offset = rd32(b, static_cast<std::size_t>(hdr) + 20);
        s.characteristics = rd32(b, static_cast<std::size_t>(hdr) + 36);
        s.truncated = s.raw_offset + s.raw_size > n;  // 32-bit fields, no overflow in u64
        layout.sections.push_back(std::move(s));
    }
    layout.headers_size = std::min<std::uint64_t>(table + 40ull * n_sections, n);
    return layout;
}

std::vector<SectionRows> section_pixel_ranges(const PeLayout& layout,
                                              std::size_t width,
                                              std::size_t height,
                                              std::size_t file_len)
{
    if (width == 0 || width * height < file_len)
        throw GeometryMismatchError("image geometry cannot hold file");

    std::vector<SectionRows> rows;
    rows.reserve(layout.sections.size());
    for (const auto& s : layout.sections) {
        SectionRows r;
        r.name = s.name;
        const std::uint64_t end = s.raw_offset + s.raw_size;
        r.start_row = static_cast<std::size_t>(
            std::min<std::uint64_t>(s.raw_offset / width, height));
        r.end_row = static_cast<std::size_t>(
            std::min<std::uint64_t>((end + width - 1) / width, height));
        rows.push_back(std::move(r));
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const SectionRows& a, const SectionRows& b) {
                         return a.start_row < b.start_row;
                     });
    return rows;
}

} // namespace binsight
