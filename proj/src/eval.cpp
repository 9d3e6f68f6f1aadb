#include "binsight/eval.hpp"
#include "binsight/errors.hpp"
#include "binsight/rng.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

namespace binsight {

const char* split_name(Split s)
{
    switch (s) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Validation: return "validation";
    }
    return "?";
}

void split_dataset(DatasetManifest& manifest, std::uint64_t seed)
{
    if (manifest.entries.size() < 10)
        throw TooFewSamplesError("split_dataset: need at least 10 entries");

    std::array<std::vector<std::size_t>, 4> strata;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        strata[2 * (e.label_malicious != 0) + (e.label_modified != 0)].push_back(i);
    }

    Rng rng(seed);
    constexpr double quota[3] = {0.8, 0.1, 0.1};
    constexpr Split kinds[3] = {Split::Train, Split::Test, Split::Validation};

    for (auto& stratum : strata) {
        if (stratum.empty())
            continue;
        rng.shuffle(stratum);

        const std::size_t n = stratum.size();
        std::size_t counts[3];
        double frac[3];
        std::size_t assigned = 0;
        for (int k = 0; k < 3; ++k) {
            const double exact = quota[k] * static_cast<double>(n);
            counts[k] = static_cast<std::size_t>(exact);
            frac[k] = exact - static_cast<double>(counts[k]);
            assigned += counts[k];
        }
        // largest remainder; ties resolved train > test > validation
        while (assigned < n) {
            int best = 0;
            for (int k = 1; k < 3; ++k)
                if (frac[k] > frac[best])
                    best = k;
            ++counts[best];
            frac[best] = -1.0;
            ++assigned;
        }

        std::size_t pos = 0;
        for (int k = 0; k < 3; ++k)
            for (std::size_t j = 0; j < counts[k]; ++j)
                manifest.entries[stratum[pos++]].split = kinds[k];
    }
}

Metrics compute_metrics(const ConfusionMatrix& cm)
{
    // empty denominators (including an all-zero matrix) yield 0, not errors
    auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };

    Metrics m;
    m.accuracy = ratio(static_cast<double>(cm.tp + cm.tn), static_cast<double>(cm.total()));
    m.precision = ratio(static_cast<double>(cm.tp), static_cast<double>(cm.tp + cm.fp));
    m.recall = ratio(static_cast<double>(cm.tp), static_cast<double>(cm.tp + cm.fn));
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    return m;
}

Evaluation evaluate(const std::vector<double>& scores, const std::vector<int>& labels,
                    double threshold)
{
    if (scores.size() != labels.size() || scores.empty())
        throw Error("evaluate: scores and labels must be non-empty and equal length");

    Evaluation e;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        const bool actual = labels[i] != 0;
        if (predicted && actual) ++e.cm.tp;
        else if (predicted && !actual) ++e.cm.fp;
        else if (!predicted && actual) ++e.cm.fn;
        else ++e.cm.tn;
    }
    e.metrics = compute_metrics(e.cm);
    return e;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);  // binary: LF on every platform
    if (!out)
        throw IoError("cannot write manifest: " + path.string());
    out << "path,label_malicious,label_modified,split\n";
    for (const auto& e : manifest.entries)
        out << e.path << "," << e.label_malicious << "," << e.label_modified << ","
            << split_name(e.split) << "\n";
    if (!out)
        throw IoError("manifest write failed: " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw NotFoundError("cannot open manifest: " + path.string());

    DatasetManifest manifest;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line_no == 1) {
            if (line != "path,label_malicious,label_modified,split")
                throw ManifestError("manifest line 1: bad header", 1);
            continue;
        }
        if (line.empty())
            continue;

        std::array<std::string, 4> field;
        std::size_t start = 0, idx = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                if (idx >= 4)
                    throw ManifestError("manifest line " + std::to_string(line_no) +
                                        ": too many fields", line_no);
                field[idx++] = line.substr(start, i - start);
                start = i + 1;
            }
        }
        if (idx != 4 || field[0].empty())
            throw ManifestError("manifest line " + std::to_string(line_no) +
                                ": expected 4 fields", line_no);

        ManifestEntry e;
        e.path = field[0];
        auto parse_label = [&](const std::string& s) {
            if (s != "0" && s != "1")
                throw ManifestError("manifest line " + std::to_string(line_no) +
                                    ": label must be 0 or 1", line_no);
            return s == "1" ? 1 : 0;
        };
        e.label_malicious = parse_label(field[1]);
        e.label_modified = parse_label(field[2]);
        if (field[3] == "train") e.split = Split::Train;
        else if (field[3] == "test") e.split = Split::Test;
        else if (field[3] == "validation") e.split = Split::Validation;
        else
            throw ManifestError("manifest line " + std::to_string(line_no) +
                                ": unknown split '" + field[3] + "'", line_no);

        for (const auto& prev : manifest.entries)
            if (prev.path == e.path)
                throw ManifestError("manifest line " + std::to_string(line_no) +
                                    ": duplicate path", line_no);
        manifest.entries.push_back(std::move(e));
    }
    return manifest;
}

} // namespace binsight
