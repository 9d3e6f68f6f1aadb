#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace binsight {

/// Exact bytes of one input file. Contents are never mutated after load.
struct RawBinary {
    std::vector<std::uint8_t> bytes;
    std::string source_path;

    std::size_t size() const { return bytes.size(); }
};

/// One entry of the PE section table, as declared on disk.
/// Malware headers lie; we keep the declared values and flag the ones
/// whose raw range does not fit in the file.
struct SectionInfo {
    std::string name;              // stored name, non-printable bytes escaped as \xNN
    std::uint64_t raw_offset = 0;  // PointerToRawData
    std::uint64_t raw_size = 0;    // SizeOfRawData
    std::uint32_t characteristics = 0;
    bool truncated = false;        // raw range exceeds file length
};

struct PeLayout {
    std::uint16_t machine = 0;
    std::uint64_t headers_size = 0;  // end of the section table in the file
    std::vector<SectionInfo> sections;
};

/// Rows of the grayscale image covered by one section.
struct SectionRows {
    std::string name;
    std::size_t start_row = 0;  // inclusive
    std::size_t end_row = 0;    // exclusive
};

/// Reads the whole file. Throws NotFoundError, EmptyFileError or IoError.
RawBinary load_binary(const std::filesystem::path& path);

/// Parses DOS header, COFF header and section table. Returns nullopt when
/// the MZ/PE signatures are missing or unreachable; never throws on
/// malformed input and never reads out of bounds.
std::optional<PeLayout> parse_pe(const RawBinary& bin);

/// Maps each section's file range onto image rows:
/// floor(offset/width) .. ceil((offset+size)/width), clamped to height,
/// ordered by start row. Throws GeometryMismatchError if the image cannot
/// hold the file.
std::vector<SectionRows> section_pixel_ranges(const PeLayout& layout,
                                              std::size_t width,
                                              std::size_t height,
                                              std::size_t file_len);

} // namespace binsight
