#include "doctest.h"
#include "helpers.hpp"

#include <algorithm>
#include <cmath>

#include "binsight/errors.hpp"
#include "binsight/gradcam.hpp"
#include "binsight/rng.hpp"

using namespace binsight;

namespace {

ModelInput random_input(std::uint64_t seed)
{
    Rng rng(seed);
    ModelInput in;
    in.channels = 1;
    in.values.resize(64 * 64);
    for (auto& v : in.values)
        v = rng.uniform();
    return in;
}

} // namespace

TEST_CASE("zero-weight model yields an all-zero heatmap without NaN")
{
    CnnModel m = init_model(CnnConfig{});
    for (auto& t : m.weights)
        for (auto& v : t.v)
            v = 0.0;
    const Heatmap h = gradcam_pp(m, random_input(1), 0);
    CHECK(h.width == 64);
    CHECK(h.height == 64);
    for (double v : h.intensities) {
        CHECK(std::isfinite(v));
        CHECK(v == 0.0);
    }
}

TEST_CASE("heatmap intensities are normalized into [0,1]")
{
    Rng rng(2);
    for (int iter = 0; iter < 10; ++iter) {
        CnnConfig cfg;
        cfg.seed = rng.next();
        cfg.heads = 1 + rng.below(2);
        const CnnModel m = init_model(cfg);
        const Heatmap h = gradcam_pp(m, random_input(rng.next()), rng.below(cfg.heads));
        double mx = 0.0;
        for (double v : h.intensities) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            mx = std::max(mx, v);
        }
        // normalization runs on the 8x8 grid; after bilinear upsampling the
        // sample nearest the peak still carries >= (1 - 1/16)^2 of it
        CHECK((mx == 0.0 || mx >= 0.9375 * 0.9375));
    }
}

TEST_CASE("gradcam_pp rejects a bad head index")
{
    const CnnModel m = init_model(CnnConfig{});
    CHECK_THROWS_AS(gradcam_pp(m, random_input(3), 1), HeadCountMismatchError);
}

TEST_CASE("logit gradient matches finite differences of the dense chain")
{
    CnnConfig cfg;
    cfg.seed = 13;
    cfg.heads = 2;
    const CnnModel m = init_model(cfg);
    const ModelInput in = random_input(4);
    const ForwardResult fr = forward(m, in);
    const Tensor g = logit_gradient_last_conv(m, fr.cache, 1);

    // independent oracle: recompute the logit from a perturbed copy of the
    // pooled activations through dense + head weights directly
    auto logit_from = [&](const std::vector<double>& flat) {
        const std::size_t emb_dim = m.config.embedding_dim;
        const std::size_t flat_len = flat.size();
        double acc_logit = m.weights[kHeadB][1];
        for (std::size_t j = 0; j < emb_dim; ++j) {
            double pre = m.weights[kDenseB][j];
            for (std::size_t i = 0; i < flat_len; ++i)
                pre += m.weights[kDenseW].v[j * flat_len + i] * flat[i];
            acc_logit += m.weights[kHeadW].v[emb_dim + j] * std::max(pre, 0.0);
        }
        return acc_logit;
    };

    Rng rng(5);
    const double eps = 1e-5;
    double max_rel = 0.0;
    for (int s = 0; s < 100; ++s) {
        const std::size_t i = rng.below(g.size());
        std::vector<double> flat = fr.cache.pool_out[2].v;
        flat[i] += eps;
        const double lp = logit_from(flat);
        flat[i] -= 2.0 * eps;
        const double lm = logit_from(flat);
        const double fd = (lp - lm) / (2.0 * eps);
        const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-8});
        max_rel = std::max(max_rel, std::abs(fd - g[i]) / denom);
    }
    CHECK(max_rel < 1e-4);
}

TEST_CASE("head bias shifts leave the heatmap unchanged")
{
    // the map is built from activations and logit gradients only, neither
    // of which sees an additive bias term
    Rng rng(6);
    for (int iter = 0; iter < 5; ++iter) {
        CnnConfig cfg;
        cfg.seed = rng.next();
        CnnModel m = init_model(cfg);
        const ModelInput in = random_input(rng.next());
        const Heatmap h1 = gradcam_pp(m, in, 0);

        CnnModel shifted = m;
        shifted.weights[kHeadB][0] += 7.5;
        const Heatmap h2 = gradcam_pp(shifted, in, 0);
        CHECK(h1.intensities == h2.intensities);
    }
}

TEST_CASE("bilinear upsample preserves constants and identity")
{
    Heatmap h;
    h.width = h.height = 8;
    h.intensities.assign(64, 0.37);
    const Heatmap big = upsample_bilinear(h, 200, 100);
    for (double v : big.intensities)
        CHECK(v == doctest::Approx(0.37).epsilon(1e-12));

    Rng rng(7);
    Heatmap r;
    r.width = r.height = 64;
    r.intensities.resize(64 * 64);
    for (auto& v : r.intensities)
        v = rng.uniform();
    const Heatmap same = upsample_bilinear(r, 64, 64);
    for (std::size_t i = 0; i < r.intensities.size(); ++i)
        CHECK(same.intensities[i] == doctest::Approx(r.intensities[i]).epsilon(1e-12));

    const auto [lo, hi] = std::minmax_element(r.intensities.begin(), r.intensities.end());
    const Heatmap up = upsample_bilinear(r, 500, 300);
    for (double v : up.intensities) {
        CHECK(v >= *lo - 1e-12);
        CHECK(v <= *hi + 1e-12);
    }
}

TEST_CASE("annotate reports per-section means")
{
    const RawBinary bin = test_helpers::fixture_pe();
    const auto layout = parse_pe(bin);
    REQUIRE(layout.has_value());

    Heatmap h;
    h.width = 32;
    h.height = 40;
    h.intensities.assign(32 * 40, 0.5);
    const AnnotatedReport uniform =
        annotate(h, layout, bin.size(), std::nullopt, {{"malicious", 0.9}});
    REQUIRE(uniform.sections.size() == 2);
    CHECK(uniform.sections[0].mean_intensity == doctest::Approx(0.5));
    CHECK(uniform.sections[1].mean_intensity == doctest::Approx(0.5));
    CHECK(uniform.scores.at("malicious") == doctest::Approx(0.9));

    // heat only in .text rows (16..32)
    Heatmap hot = h;
    std::fill(hot.intensities.begin(), hot.intensities.end(), 0.0);
    for (std::size_t r = 16; r < 32; ++r)
        for (std::size_t c = 0; c < 32; ++c)
            hot.intensities[r * 32 + c] = 1.0;
    const AnnotatedReport ranked = annotate(hot, layout, bin.size(), std::nullopt, {});
    CHECK(ranked.sections[0].name == ".text");
    CHECK(ranked.sections[0].mean_intensity > ranked.sections[1].mean_intensity);
}

TEST_CASE("annotate reports the padding region's mean intensity")
{
    Heatmap h;
    h.width = 32;
    h.height = 10;
    h.intensities.assign(320, 0.0);
    for (std::size_t i = 160; i < 320; ++i)
        h.intensities[i] = 1.0;  // bottom half hot

    const PaddingRegion pad{160, 160, 0x00};
    const AnnotatedReport report = annotate(h, std::nullopt, 320, pad, {});
    REQUIRE(report.padding.has_value());
    CHECK(report.padding->region.start_offset == 160);
    CHECK(report.padding->mean_intensity == doctest::Approx(1.0));
    CHECK(report.sections.empty());
}

TEST_CASE("section means weighted by pixel count sum to the heatmap total")
{
    Rng rng(8);
    Heatmap h;
    h.width = 32;
    h.height = 40;
    h.intensities.resize(32 * 40);
    for (auto& v : h.intensities)
        v = rng.uniform();

    // full partition of the image rows into two pseudo-sections
    PeLayout layout;
    layout.sections.push_back({"a", 0, 512, 0, false});
    layout.sections.push_back({"b", 512, 768, 0, false});
    const AnnotatedReport report = annotate(h, layout, 1280, std::nullopt, {});

    double weighted = 0.0;
    for (const auto& s : report.sections)
        weighted += s.mean_intensity * static_cast<double>((s.end_row - s.start_row) * 32);
    double total = 0.0;
    for (double v : h.intensities)
        total += v;
    CHECK(weighted == doctest::Approx(total).epsilon(1e-9));
}

TEST_CASE("annotate rejects undersized geometry")
{
    Heatmap h;
    h.width = 8;
    h.height = 8;
    h.intensities.assign(64, 0.0);
    CHECK_THROWS_AS(annotate(h, std::nullopt, 100, std::nullopt, {}),
                    GeometryMismatchError);
}

TEST_CASE("render_heatmap covers the ramp and matches geometry")
{
    Heatmap h;
    h.width = 5;
    h.height = 1;
    h.intensities = {0.0, 0.25, 0.5, 0.75, 1.0};
    const RgbImage img = render_heatmap(h, nullptr);
    REQUIRE(img.pixels.size() == 15);
    // ramp stops: blue, cyan, green, yellow, red
    CHECK(img.pixels[0] == 0);
    CHECK(img.pixels[2] == 255);
    CHECK(img.pixels[12] == 255);
    CHECK(img.pixels[13] == 0);
    CHECK(img.pixels[14] == 0);

    GrayImage base;
    base.width = 4;
    base.height = 4;
    base.pixels.assign(16, 0);
    Heatmap wrong;
    wrong.width = wrong.height = 2;
    wrong.intensities.assign(4, 0.0);
    CHECK_THROWS_AS(render_heatmap(wrong, &base), GeometryMismatchError);
}
