#pragma once

#include <filesystem>
#include <variant>

#include "binsight/cnn.hpp"
#include "binsight/forest.hpp"

namespace binsight {

inline constexpr int kModelFormatVersion = 1;

/// Gate + two malware specialists of the routed design.
struct StackedModel {
    CnnModel gate;
    CnnModel specialist_modified;
    CnnModel specialist_clean;
};

/// Frozen CNN embedding extractor + random-forest head.
struct HybridModel {
    CnnModel cnn;
    Forest forest;
};

using AnyModel = std::variant<CnnModel, StackedModel, HybridModel>;

/// All containers share one JSON scheme: {format_version, kind, ...} with
/// weight tensors as base64 of little-endian IEEE-754 doubles (lossless).
void save_model(const AnyModel& model, const std::filesystem::path& path);

/// Throws FormatError on unknown kind or format_version (fail closed).
AnyModel load_model(const std::filesystem::path& path);

void save_cnn(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_cnn(const std::filesystem::path& path);

} // namespace binsight
