// binsight: static triage toolkit for suspicious binaries.
//
// Subcommands: transform, stats, gen-corpus, train, predict, explain.
// Exit codes: 0 success, 2 no usable input, 3 training failure,
// 4 manifest error, 5 model/input mismatch.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "binsight/binary.hpp"
#include "binsight/cnn.hpp"
#include "binsight/corpus.hpp"
#include "binsight/errors.hpp"
#include "binsight/eval.hpp"
#include "binsight/forest.hpp"
#include "binsight/gradcam.hpp"
#include "binsight/image.hpp"
#include "binsight/model_io.hpp"
#include "binsight/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace binsight;

namespace {

constexpr int kExitNoInput = 2;
constexpr int kExitTrainFailure = 3;
constexpr int kExitManifest = 4;
constexpr int kExitMismatch = 5;

struct GlobalOpts {
    std::uint64_t seed = 0;
    std::size_t threads = 0;
};

std::size_t threads_from_env()
{
    const char* env = std::getenv("BINSIGHT_THREADS");
    if (!env)
        return 0;
    return static_cast<std::size_t>(std::strtoull(env, nullptr, 10));
}

// Files stay files; directories expand to their regular files, sorted so
// batch output order is reproducible.
std::vector<fs::path> gather_inputs(const std::vector<std::string>& inputs)
{
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> dir_files;
            for (const auto& e : fs::directory_iterator(p))
                if (e.is_regular_file())
                    dir_files.push_back(e.path());
            std::sort(dir_files.begin(), dir_files.end());
            files.insert(files.end(), dir_files.begin(), dir_files.end());
        } else {
            files.push_back(p);
        }
    }
    return files;
}

ModelInput make_input(const RawBinary& bin, std::size_t channels)
{
    if (channels == 3)
        return resample(to_hit_rgb(bin));
    return resample(to_grayscale(bin));
}

json pe_to_json(const std::optional<PeLayout>& layout)
{
    if (!layout)
        return nullptr;
    json sections = json::array();
    for (const auto& s : layout->sections)
        sections.push_back({{"name", s.name},
                            {"raw_offset", s.raw_offset},
                            {"raw_size", s.raw_size},
                            {"characteristics", s.characteristics},
                            {"truncated", s.truncated}});
    return {{"machine", layout->machine},
            {"headers_size", layout->headers_size},
            {"sections", sections}};
}

json padding_to_json(const std::optional<PaddingRegion>& pad)
{
    if (!pad)
        return nullptr;
    return {{"start_offset", pad->start_offset},
            {"length", pad->length},
            {"fill_byte", pad->fill_byte}};
}

json metrics_to_json(const Evaluation& e)
{
    return {{"accuracy", e.metrics.accuracy},
            {"precision", e.metrics.precision},
            {"recall", e.metrics.recall},
            {"f1", e.metrics.f1},
            {"confusion", {{"tp", e.cm.tp}, {"fp", e.cm.fp},
                           {"tn", e.cm.tn}, {"fn", e.cm.fn}}}};
}

int cmd_transform(const std::vector<std::string>& inputs, const std::string& format,
                  const fs::path& out_dir)
{
    fs::create_directories(out_dir);
    std::size_t ok = 0;
    for (const auto& file : gather_inputs(inputs)) {
        try {
            const RawBinary bin = load_binary(file);
            const fs::path stem = file.filename().stem();
            if (format == "hit")
                write_ppm(to_hit_rgb(bin), out_dir / (stem.string() + ".ppm"));
            else
                write_pgm(to_grayscale(bin), out_dir / (stem.string() + ".pgm"));
            ++ok;
        } catch (const Error& e) {
            std::cerr << "warning: skipping " << file.string() << ": " << e.what()
                      << "\n";
        }
    }
    return ok > 0 ? 0 : kExitNoInput;
}

int cmd_stats(const std::vector<std::string>& inputs)
{
    std::size_t ok = 0;
    for (const auto& file : gather_inputs(inputs)) {
        try {
            const RawBinary bin = load_binary(file);
            const Histogram256 hist = byte_histogram(bin);
            const EntropyProfile profile =
                sliding_entropy(bin, kEntropyWindow, kEntropyStride);
            json doc = {
                {"format_version", kModelFormatVersion},
                {"path", file.string()},
                {"size", bin.size()},
                {"histogram", hist.counts},
                {"entropy", shannon_entropy(hist)},
                {"uniformity", uniformity_score(hist)},
                {"entropy_profile", {{"window", profile.window_size},
                                     {"stride", profile.stride},
                                     {"values", profile.values}}},
                {"padding", padding_to_json(detect_padding(bin, kPaddingMinRun))},
                {"pe", pe_to_json(parse_pe(bin))},
            };
            std::cout << doc.dump() << "\n";
            ++ok;
        } catch (const Error& e) {
            std::cerr << "warning: skipping " << file.string() << ": " << e.what()
                      << "\n";
        }
    }
    return ok > 0 ? 0 : kExitNoInput;
}

int cmd_gen_corpus(const CorpusConfig& cfg)
{
    const CorpusResult result = generate_synthetic_corpus(cfg);
    const fs::path manifest_path = cfg.out_dir / "manifest.csv";
    write_manifest(result.manifest, manifest_path);
    std::cerr << "wrote " << result.manifest.entries.size() << " files\n";
    std::cout << manifest_path.string() << "\n";
    return 0;
}

struct TrainSettings {
    TrainConfig tc;
    std::size_t channels = 1;
};

TrainSettings parse_train_config(const std::string& config_arg,
                                 const GlobalOpts& global)
{
    TrainSettings s;
    s.tc.epochs = 30;
    s.tc.seed = global.seed;
    s.tc.threads = global.threads;
    if (config_arg.empty())
        return s;

    json doc;
    if (fs::exists(config_arg)) {
        std::ifstream in(config_arg);
        in >> doc;
    } else {
        doc = json::parse(config_arg);
    }
    if (doc.contains("epochs")) s.tc.epochs = doc["epochs"].get<std::size_t>();
    if (doc.contains("learning_rate")) s.tc.learning_rate = doc["learning_rate"].get<double>();
    if (doc.contains("momentum")) s.tc.momentum = doc["momentum"].get<double>();
    if (doc.contains("batch_size")) s.tc.batch_size = doc["batch_size"].get<std::size_t>();
    if (doc.contains("stop_below_loss")) s.tc.stop_below_loss = doc["stop_below_loss"].get<double>();
    if (doc.contains("format"))
        s.channels = doc["format"].get<std::string>() == "hit" ? 3 : 1;
    return s;
}

struct LoadedSample {
    ModelInput input;
    int label_malicious = 0;
    int label_modified = 0;
    Split split = Split::Train;
};

std::vector<LoadedSample> load_dataset(const DatasetManifest& manifest,
                                       std::size_t channels)
{
    std::vector<LoadedSample> out;
    out.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries)
        out.push_back({make_input(load_binary(e.path), channels),
                       e.label_malicious, e.label_modified, e.split});
    return out;
}

void log_curve(const std::vector<double>& curve)
{
    for (std::size_t i = 0; i < curve.size(); ++i)
        std::cerr << "epoch " << i + 1 << " loss " << curve[i] << "\n";
}

CnnModel train_single_target(const std::vector<LoadedSample>& data,
                             const TrainSettings& ts, std::uint64_t seed,
                             bool target_modified,
                             std::optional<int> only_modified = std::nullopt)
{
    std::vector<LabeledInput> train;
    for (const auto& s : data) {
        if (s.split != Split::Train)
            continue;
        if (only_modified && s.label_modified != *only_modified)
            continue;
        const double y = target_modified ? s.label_modified : s.label_malicious;
        train.push_back({s.input, HeadTargets{y}});
    }
    CnnConfig cfg;
    cfg.input_channels = ts.channels;
    cfg.seed = seed;
    CnnModel model = init_model(cfg);
    log_curve(fit(model, train, ts.tc));
    return model;
}

std::vector<const LoadedSample*> split_of(const std::vector<LoadedSample>& data,
                                          Split split)
{
    std::vector<const LoadedSample*> out;
    for (const auto& s : data)
        if (s.split == split)
            out.push_back(&s);
    return out;
}

int cmd_train(const std::string& manifest_path, const std::string& arch,
              const std::string& config_arg, const fs::path& out_path,
              const GlobalOpts& global)
{
    DatasetManifest manifest;
    try {
        manifest = read_manifest(manifest_path);
    } catch (const ManifestError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitManifest;
    }

    const TrainSettings ts = parse_train_config(config_arg, global);
    const std::vector<LoadedSample> data = load_dataset(manifest, ts.channels);
    const auto validation = split_of(data, Split::Validation);

    json result = {{"format_version", kModelFormatVersion}, {"arch", arch}};

    try {
        if (arch == "single" || arch == "gate") {
            const bool gate = arch == "gate";
            const CnnModel model = train_single_target(data, ts, global.seed, gate);
            save_model(model, out_path);

            std::vector<double> scores;
            std::vector<int> labels;
            for (const auto* s : validation) {
                scores.push_back(forward(model, s->input).scores[0]);
                labels.push_back(gate ? s->label_modified : s->label_malicious);
            }
            result["validation"] = metrics_to_json(evaluate(scores, labels));
        } else if (arch == "dual") {
            std::vector<LabeledInput> train;
            for (const auto& s : data)
                if (s.split == Split::Train)
                    train.push_back({s.input,
                                     HeadTargets{double(s.label_malicious),
                                                 double(s.label_modified)}});
            CnnConfig cfg;
            cfg.input_channels = ts.channels;
            cfg.heads = 2;
            cfg.seed = global.seed;
            CnnModel model = init_model(cfg);
            log_curve(fit(model, train, ts.tc));
            save_model(model, out_path);

            std::vector<double> mal, mod;
            std::vector<int> mal_y, mod_y;
            for (const auto* s : validation) {
                const DualScores d = predict_dual(model, s->input);
                mal.push_back(d.malicious);
                mod.push_back(d.modified);
                mal_y.push_back(s->label_malicious);
                mod_y.push_back(s->label_modified);
            }
            result["validation"] = {{"malicious", metrics_to_json(evaluate(mal, mal_y))},
                                    {"modified", metrics_to_json(evaluate(mod, mod_y))}};
        } else if (arch == "stacked") {
            StackedModel model;
            std::cerr << "training gate\n";
            model.gate = train_single_target(data, ts, global.seed, true);
            std::cerr << "training modified-binaries specialist\n";
            model.specialist_modified =
                train_single_target(data, ts, global.seed + 1, false, 1);
            std::cerr << "training clean-binaries specialist\n";
            model.specialist_clean =
                train_single_target(data, ts, global.seed + 2, false, 0);
            save_model(model, out_path);

            std::vector<double> mal, mod;
            std::vector<int> mal_y, mod_y;
            for (const auto* s : validation) {
                const StackedVerdict v =
                    predict_stacked(model.gate, model.specialist_modified,
                                    model.specialist_clean, s->input);
                mal.push_back(v.malicious_score);
                mod.push_back(v.modified_score);
                mal_y.push_back(s->label_malicious);
                mod_y.push_back(s->label_modified);
            }
            result["validation"] = {{"malicious", metrics_to_json(evaluate(mal, mal_y))},
                                    {"gate", metrics_to_json(evaluate(mod, mod_y))}};
        } else {  // hybrid-rf
            HybridModel model;
            model.cnn = train_single_target(data, ts, global.seed, false);

            std::vector<std::vector<double>> features;
            std::vector<int> labels;
            for (const auto& s : data)
                if (s.split == Split::Train) {
                    features.push_back(embed(model.cnn, s.input));
                    labels.push_back(s.label_malicious);
                }
            ForestConfig fc;
            fc.seed = global.seed;
            model.forest = fit_forest(features, labels, fc);
            save_model(model, out_path);

            std::vector<double> scores;
            std::vector<int> y;
            for (const auto* s : validation) {
                scores.push_back(predict_forest(model.forest, embed(model.cnn, s->input)));
                y.push_back(s->label_malicious);
            }
            result["validation"] = metrics_to_json(evaluate(scores, y));
        }
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitTrainFailure;
    }

    std::cout << result.dump(2) << "\n";
    return 0;
}

std::size_t model_channels(const AnyModel& model)
{
    if (const auto* cnn = std::get_if<CnnModel>(&model))
        return cnn->config.input_channels;
    if (const auto* stacked = std::get_if<StackedModel>(&model))
        return stacked->gate.config.input_channels;
    return std::get<HybridModel>(model).cnn.config.input_channels;
}

const char* model_kind(const AnyModel& model)
{
    if (std::holds_alternative<CnnModel>(model))
        return "cnn";
    if (std::holds_alternative<StackedModel>(model))
        return "stacked";
    return "hybrid_rf";
}

json score_file(const AnyModel& model, const ModelInput& input)
{
    json scores;
    if (const auto* cnn = std::get_if<CnnModel>(&model)) {
        if (cnn->config.heads == 2) {
            const DualScores d = predict_dual(*cnn, input);
            scores["malicious"] = d.malicious;
            scores["modified"] = d.modified;
        } else {
            scores["malicious"] = forward(*cnn, input).scores[0];
        }
    } else if (const auto* stacked = std::get_if<StackedModel>(&model)) {
        const StackedVerdict v =
            predict_stacked(stacked->gate, stacked->specialist_modified,
                            stacked->specialist_clean, input);
        scores["malicious"] = v.malicious_score;
        scores["modified"] = v.modified_score;
        scores["route"] = v.route == Route::ModifiedSpecialist ? "modified" : "clean";
    } else {
        const auto& hybrid = std::get<HybridModel>(model);
        scores["malicious"] = predict_forest(hybrid.forest, embed(hybrid.cnn, input));
    }
    return scores;
}

int cmd_predict(const std::string& model_path, const std::vector<std::string>& inputs,
                const std::string& format)
{
    AnyModel model = load_model(model_path);
    const std::size_t channels = model_channels(model);
    if (!format.empty()) {
        const std::size_t requested = format == "hit" ? 3 : 1;
        if (requested != channels) {
            std::cerr << "error: model expects " << channels
                      << "-channel input, --format " << format << " provides "
                      << requested << "\n";
            return kExitMismatch;
        }
    }

    std::size_t ok = 0;
    for (const auto& file : gather_inputs(inputs)) {
        try {
            const RawBinary bin = load_binary(file);
            const Histogram256 hist = byte_histogram(bin);
            json doc = {
                {"format_version", kModelFormatVersion},
                {"path", file.string()},
                {"pe", pe_to_json(parse_pe(bin))},
                {"stats", {{"entropy", shannon_entropy(hist)},
                           {"uniformity", uniformity_score(hist)},
                           {"padding", padding_to_json(detect_padding(bin, kPaddingMinRun))}}},
                {"scores", score_file(model, make_input(bin, channels))},
                {"model_id", model_kind(model)},
            };
            std::cout << doc.dump() << "\n";
            ++ok;
        } catch (const Error& e) {
            std::cerr << "warning: skipping " << file.string() << ": " << e.what()
                      << "\n";
        }
    }
    return ok > 0 ? 0 : kExitNoInput;
}

int cmd_explain(const std::string& model_path, const std::string& input,
                const fs::path& out_dir, const std::string& head_name)
{
    AnyModel any = load_model(model_path);
    const auto* cnn = std::get_if<CnnModel>(&any);
    if (!cnn) {
        std::cerr << "error: explain needs a plain cnn model\n";
        return kExitMismatch;
    }
    const std::size_t head = head_name == "modified" ? 1 : 0;
    if (head >= cnn->config.heads) {
        std::cerr << "error: model has no '" << head_name << "' head\n";
        return kExitMismatch;
    }

    const RawBinary bin = load_binary(input);
    const ModelInput in = make_input(bin, cnn->config.input_channels);
    const ForwardResult fr = forward(*cnn, in);

    const GrayImage gray = to_grayscale(bin);
    const Heatmap map =
        upsample_bilinear(gradcam_pp(*cnn, in, head), gray.width, gray.height);

    std::map<std::string, double> scores{{"malicious", fr.scores[0]}};
    if (cnn->config.heads == 2)
        scores["modified"] = fr.scores[1];
    const AnnotatedReport report =
        annotate(map, parse_pe(bin), bin.size(),
                 detect_padding(bin, kPaddingMinRun), scores);

    fs::create_directories(out_dir);
    const std::string stem = fs::path(input).filename().stem().string();
    write_ppm(render_heatmap(map, &gray), out_dir / (stem + "_heatmap.ppm"));

    // row ranking helps an analyst jump straight to the hottest file region
    std::vector<std::pair<double, std::size_t>> rows;
    for (std::size_t r = 0; r < map.height; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < map.width; ++c)
            acc += map.intensities[r * map.width + c];
        rows.push_back({acc / double(map.width), r});
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });

    json sections = json::array();
    for (const auto& s : report.sections)
        sections.push_back({{"name", s.name},
                            {"start_row", s.start_row},
                            {"end_row", s.end_row},
                            {"mean_intensity", s.mean_intensity}});
    json top_rows = json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(10, rows.size()); ++i)
        top_rows.push_back({{"row", rows[i].second}, {"mean_intensity", rows[i].first}});
    json padding = nullptr;
    if (report.padding)
        padding = {{"start_offset", report.padding->region.start_offset},
                   {"length", report.padding->region.length},
                   {"fill_byte", report.padding->region.fill_byte},
                   {"mean_intensity", report.padding->mean_intensity}};

    json doc = {
        {"format_version", kModelFormatVersion},
        {"path", input},
        {"head", head_name},
        {"width", map.width},
        {"height", map.height},
        {"scores", report.scores},
        {"sections", sections},
        {"padding", padding},
        {"top_rows", top_rows},
    };
    std::ofstream out(out_dir / (stem + "_report.json"));
    out << doc.dump(2) << "\n";
    std::cout << (out_dir / (stem + "_report.json")).string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"static malware triage toolkit"};
    app.require_subcommand(1);

    GlobalOpts global;
    global.threads = threads_from_env();
    app.add_option("--seed", global.seed, "global RNG seed");
    app.add_option("--threads", global.threads, "worker threads (0 = hardware)");

    auto* transform = app.add_subcommand("transform", "binaries to images");
    std::vector<std::string> transform_inputs;
    std::string transform_format = "gray";
    std::string transform_out = "images";
    transform->add_option("inputs", transform_inputs, "files or directories");
    transform->add_option("--format", transform_format, "gray|hit")
        ->check(CLI::IsMember({"gray", "hit"}));
    transform->add_option("--out-dir", transform_out, "output directory");

    auto* stats = app.add_subcommand("stats", "per-file statistics as NDJSON");
    std::vector<std::string> stats_inputs;
    stats->add_option("inputs", stats_inputs, "files or directories");

    auto* gen = app.add_subcommand("gen-corpus", "synthetic labeled corpus");
    CorpusConfig corpus_cfg;
    std::string gen_out = "corpus";
    gen->add_option("--out-dir", gen_out, "output directory");
    gen->add_option("--seed", corpus_cfg.seed, "corpus seed");
    gen->add_option("--per-stratum", corpus_cfg.per_stratum, "files per quadrant");
    gen->add_option("--padding-fraction", corpus_cfg.padding_fraction,
                    "share of files given trailing padding");
    gen->add_option("--padding-len", corpus_cfg.padding_len, "padding run length");

    auto* train = app.add_subcommand("train", "train a model from a manifest");
    std::string train_manifest, train_arch = "single", train_config;
    std::string train_out = "model.json";
    train->add_option("--manifest", train_manifest, "dataset manifest CSV")->required();
    train->add_option("--arch", train_arch, "single|dual|gate|stacked|hybrid-rf")
        ->check(CLI::IsMember({"single", "dual", "gate", "stacked", "hybrid-rf"}));
    train->add_option("--config", train_config, "training config JSON (file or inline)");
    train->add_option("--out", train_out, "model output path");

    auto* predict = app.add_subcommand("predict", "score files with a model");
    std::string predict_model, predict_format;
    std::vector<std::string> predict_inputs;
    predict->add_option("model", predict_model, "model JSON")->required();
    predict->add_option("inputs", predict_inputs, "files or directories");
    predict->add_option("--format", predict_format, "gray|hit")
        ->check(CLI::IsMember({"gray", "hit"}));

    auto* explain = app.add_subcommand("explain", "attention heatmap for one file");
    std::string explain_model, explain_input, explain_head = "malicious";
    std::string explain_out = "explain";
    explain->add_option("model", explain_model, "model JSON")->required();
    explain->add_option("input", explain_input, "binary to explain")->required();
    explain->add_option("--out", explain_out, "report directory");
    explain->add_option("--head", explain_head, "malicious|modified")
        ->check(CLI::IsMember({"malicious", "modified"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (transform->parsed())
            return cmd_transform(transform_inputs, transform_format, transform_out);
        if (stats->parsed())
            return cmd_stats(stats_inputs);
        if (gen->parsed()) {
            corpus_cfg.out_dir = gen_out;
            return cmd_gen_corpus(corpus_cfg);
        }
        if (train->parsed())
            return cmd_train(train_manifest, train_arch, train_config, train_out,
                             global);
        if (predict->parsed())
            return cmd_predict(predict_model, predict_inputs, predict_format);
        if (explain->parsed())
            return cmd_explain(explain_model, explain_input, explain_out,
                               explain_head);
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMismatch;
    } catch (const ShapeMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMismatch;
    } catch (const HeadCountMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMismatch;
    } catch (const ManifestError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitManifest;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
