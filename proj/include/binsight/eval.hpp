#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace binsight {

enum class Split { Train, Test, Validation };

const char* split_name(Split s);

struct ManifestEntry {
    std::string path;
    int label_malicious = 0;
    int label_modified = 0;
    Split split = Split::Train;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
};

/// Assigns 80/10/10 splits stratified by the (malicious, modified) pair with
/// largest-remainder rounding; deterministic per seed.
/// Throws TooFewSamplesError below 10 entries.
void split_dataset(DatasetManifest& manifest, std::uint64_t seed);

struct ConfusionMatrix {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::uint64_t total() const { return tp + fp + tn + fn; }
};

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Standard formulas; empty denominators yield 0.
Metrics compute_metrics(const ConfusionMatrix& cm);

struct Evaluation {
    ConfusionMatrix cm;
    Metrics metrics;
};

/// score >= threshold counts as a positive prediction.
Evaluation evaluate(const std::vector<double>& scores, const std::vector<int>& labels,
                    double threshold = 0.5);

/// CSV with header `path,label_malicious,label_modified,split`, UTF-8, LF.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Throws ManifestError naming the offending 1-based line.
DatasetManifest read_manifest(const std::filesystem::path& path);

} // namespace binsight
