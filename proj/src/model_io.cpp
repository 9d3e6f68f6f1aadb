#include "binsight/model_io.hpp"
#include "binsight/errors.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

using nlohmann::json;

namespace binsight {

namespace {

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const std::vector<std::uint8_t>& data)
{
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= data.size(); i += 3) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(kB64[(v >> 6) & 63]);
        out.push_back(kB64[v & 63]);
    }
    const std::size_t rem = data.size() - i;
    if (rem == 1) {
        const std::uint32_t v = data[i] << 16;
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out += "==";
    } else if (rem == 2) {
        const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out.push_back(kB64[(v >> 18) & 63]);
        out.push_back(kB64[(v >> 12) & 63]);
        out.push_back(kB64[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

std::vector<std::uint8_t> b64_decode(const std::string& s)
{
    std::array<int, 256> rev;
    rev.fill(-1);
    for (int i = 0; i < 64; ++i)
        rev[static_cast<unsigned char>(kB64[i])] = i;

    std::vector<std::uint8_t> out;
    out.reserve(s.size() / 4 * 3);
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : s) {
        if (c == '=' || c == '\n' || c == '\r')
            continue;
        const int v = rev[static_cast<unsigned char>(c)];
        if (v < 0)
            throw FormatError("invalid base64 in model file");
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
        }
    }
    return out;
}

std::string tensor_to_b64(const Tensor& t)
{
    std::vector<std::uint8_t> bytes(t.v.size() * 8);
    for (std::size_t i = 0; i < t.v.size(); ++i) {
        std::uint64_t u;
        std::memcpy(&u, &t.v[i], 8);
        for (int b = 0; b < 8; ++b)
            bytes[i * 8 + b] = (u >> (8 * b)) & 0xff;
    }
    return b64_encode(bytes);
}

std::vector<double> b64_to_doubles(const std::string& s)
{
    const std::vector<std::uint8_t> bytes = b64_decode(s);
    if (bytes.size() % 8 != 0)
        throw FormatError("weight blob length not a multiple of 8");
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint64_t u = 0;
        for (int b = 0; b < 8; ++b)
            u |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
        std::memcpy(&out[i], &u, 8);
    }
    return out;
}

constexpr const char* kWeightNames[kWeightCount] = {
    "conv1_w", "conv1_b", "conv2_w", "conv2_b", "conv3_w", "conv3_b",
    "dense_w", "dense_b", "head_w", "head_b",
};

json cnn_to_json(const CnnModel& m)
{
    json j;
    j["config"] = {
        {"input_channels", m.config.input_channels},
        {"filters", m.config.filters},
        {"embedding_dim", m.config.embedding_dim},
        {"heads", m.config.heads},
        {"seed", m.config.seed},
    };
    j["trained_epochs"] = m.trained_epochs;
    json w = json::object();
    for (std::size_t i = 0; i < kWeightCount; ++i)
        w[kWeightNames[i]] = tensor_to_b64(m.weights[i]);
    j["weights"] = std::move(w);
    return j;
}

CnnModel cnn_from_json(const json& j)
{
    CnnConfig cfg;
    const json& c = j.at("config");
    cfg.input_channels = c.at("input_channels").get<std::size_t>();
    cfg.filters = c.at("filters").get<std::array<std::size_t, 3>>();
    cfg.embedding_dim = c.at("embedding_dim").get<std::size_t>();
    cfg.heads = c.at("heads").get<std::size_t>();
    cfg.seed = c.at("seed").get<std::uint64_t>();

    CnnModel m = init_model(cfg);  // establishes shapes
    m.trained_epochs = j.at("trained_epochs").get<std::size_t>();
    for (std::size_t i = 0; i < kWeightCount; ++i) {
        std::vector<double> v = b64_to_doubles(j.at("weights").at(kWeightNames[i]));
        if (v.size() != m.weights[i].size())
            throw FormatError(std::string("weight tensor size mismatch for ") +
                              kWeightNames[i]);
        m.weights[i].v = std::move(v);
    }
    return m;
}

json tree_to_json(const Tree& t)
{
    json nodes = json::array();
    for (const auto& n : t.nodes) {
        if (n.is_leaf)
            nodes.push_back({{"p", n.positive_fraction}});
        else
            nodes.push_back({{"f", n.feature}, {"t", n.threshold},
                             {"l", n.left}, {"r", n.right}});
    }
    return nodes;
}

Tree tree_from_json(const json& j)
{
    Tree t;
    for (const auto& jn : j) {
        TreeNode n;
        if (jn.contains("p")) {
            n.is_leaf = true;
            n.positive_fraction = jn.at("p").get<double>();
        } else {
            n.is_leaf = false;
            n.feature = jn.at("f").get<std::size_t>();
            n.threshold = jn.at("t").get<double>();
            n.left = jn.at("l").get<std::int32_t>();
            n.right = jn.at("r").get<std::int32_t>();
        }
        t.nodes.push_back(n);
    }
    return t;
}

json forest_to_json(const Forest& f)
{
    json j;
    j["config"] = {
        {"n_trees", f.config.n_trees},       {"max_depth", f.config.max_depth},
        {"min_leaf", f.config.min_leaf},     {"features_per_split", f.config.features_per_split},
        {"seed", f.config.seed},             {"bootstrap", f.config.bootstrap},
    };
    j["dim"] = f.dim;
    json trees = json::array();
    for (const auto& t : f.trees)
        trees.push_back(tree_to_json(t));
    j["trees"] = std::move(trees);
    return j;
}

Forest forest_from_json(const json& j)
{
    Forest f;
    const json& c = j.at("config");
    f.config.n_trees = c.at("n_trees").get<std::size_t>();
    f.config.max_depth = c.at("max_depth").get<std::size_t>();
    f.config.min_leaf = c.at("min_leaf").get<std::size_t>();
    f.config.features_per_split = c.at("features_per_split").get<std::size_t>();
    f.config.seed = c.at("seed").get<std::uint64_t>();
    f.config.bootstrap = c.at("bootstrap").get<bool>();
    f.dim = j.at("dim").get<std::size_t>();
    for (const auto& jt : j.at("trees"))
        f.trees.push_back(tree_from_json(jt));
    if (f.trees.size() != f.config.n_trees)
        throw FormatError("forest tree count does not match config");
    return f;
}

} // namespace

void save_model(const AnyModel& model, const std::filesystem::path& path)
{
    json j;
    j["format_version"] = kModelFormatVersion;
    if (const auto* cnn = std::get_if<CnnModel>(&model)) {
        j["kind"] = "cnn";
        j["model"] = cnn_to_json(*cnn);
    } else if (const auto* stacked = std::get_if<StackedModel>(&model)) {
        j["kind"] = "stacked";
        j["gate"] = cnn_to_json(stacked->gate);
        j["specialist_modified"] = cnn_to_json(stacked->specialist_modified);
        j["specialist_clean"] = cnn_to_json(stacked->specialist_clean);
    } else {
        const auto& hybrid = std::get<HybridModel>(model);
        j["kind"] = "hybrid_rf";
        j["cnn"] = cnn_to_json(hybrid.cnn);
        j["forest"] = forest_to_json(hybrid.forest);
    }

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write model: " + path.string());
    out << j.dump();
    if (!out)
        throw IoError("model write failed: " + path.string());
}

AnyModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw NotFoundError("cannot open model: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(std::string("model file is not valid JSON: ") + e.what());
    }

    try {
        if (j.at("format_version").get<int>() != kModelFormatVersion)
            throw FormatError("unsupported model format_version");
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "cnn")
            return cnn_from_json(j.at("model"));
        if (kind == "stacked")
            return StackedModel{cnn_from_json(j.at("gate")),
                                cnn_from_json(j.at("specialist_modified")),
                                cnn_from_json(j.at("specialist_clean"))};
        if (kind == "hybrid_rf")
            return HybridModel{cnn_from_json(j.at("cnn")),
                               forest_from_json(j.at("forest"))};
        throw FormatError("unknown model kind: " + kind);
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed model file: ") + e.what());
    }
}

void save_cnn(const CnnModel& model, const std::filesystem::path& path)
{
    save_model(AnyModel{model}, path);
}

CnnModel load_cnn(const std::filesystem::path& path)
{
    AnyModel m = load_model(path);
    if (auto* cnn = std::get_if<CnnModel>(&m))
        return std::move(*cnn);
    throw FormatError("expected a plain CNN model: " + path.string());
}

} // namespace binsight
