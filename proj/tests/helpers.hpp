#pragma once

#include <cstdint>
#include <cstring>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "binsight/binary.hpp"

namespace test_helpers {

inline void put16(std::vector<std::uint8_t>& b, std::size_t off, std::uint16_t v)
{
    b[off] = v & 0xff;
    b[off + 1] = (v >> 8) & 0xff;
}

inline void put32(std::vector<std::uint8_t>& b, std::size_t off, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        b[off + i] = (v >> (8 * i)) & 0xff;
}

// Minimal PE with .text (offset 512, size 512) and .data (offset 1024,
// size 256); section ranges validated against an external PE dumper when
// the fixture was designed. File length 1280.
inline binsight::RawBinary fixture_pe()
{
    std::vector<std::uint8_t> b(1280, 0);
    b[0] = 'M';
    b[1] = 'Z';
    put32(b, 0x3c, 0x80);
    b[0x80] = 'P';
    b[0x81] = 'E';
    put16(b, 0x84, 0x014c);
    put16(b, 0x86, 2);      // NumberOfSections
    put16(b, 0x94, 0);      // SizeOfOptionalHeader
    put16(b, 0x96, 0x0102);

    auto section = [&](std::size_t off, const char* name, std::uint32_t raw_off,
                       std::uint32_t raw_size, std::uint32_t chars) {
        std::memcpy(&b[off], name, std::strlen(name));
        put32(b, off + 8, raw_size);
        put32(b, off + 12, 0x1000);
        put32(b, off + 16, raw_size);
        put32(b, off + 20, raw_off);
        put32(b, off + 36, chars);
    };
    section(0x98, ".text", 512, 512, 0x60000020);
    section(0xc0, ".data", 1024, 256, 0xC0000040);

    for (std::size_t i = 512; i < b.size(); ++i)
        b[i] = static_cast<std::uint8_t>(i * 7 + 3);

    return binsight::RawBinary{std::move(b), "<fixture>"};
}

class TempDir {
public:
    explicit TempDir(const std::string& tag)
        : path_(std::filesystem::temp_directory_path() /
                ("binsight_test_" + tag + "_" + std::to_string(::getpid())))
    {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::filesystem::path write_file(const std::filesystem::path& dir,
                                        const std::string& name,
                                        const std::vector<std::uint8_t>& bytes)
{
    const auto p = dir / name;
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    return p;
}

} // namespace test_helpers
