#include "binsight/gradcam.hpp"
#include "binsight/errors.hpp"

#include <algorithm>
#include <cmath>

namespace binsight {

Heatmap gradcam_pp(const CnnModel& model, const ModelInput& input, std::size_t head)
{
    if (model.config.filters[2] == 0)
        throw NoConvLayerError("gradcam_pp: model has no conv layer");
    if (head >= model.config.heads)
        throw HeadCountMismatchError("gradcam_pp: no such head");

    ForwardResult fr = forward(model, input);
    const Tensor& a = fr.cache.pool_out[2];            // [filters, 8, 8]
    const Tensor g = logit_gradient_last_conv(model, fr.cache, head);

    const std::size_t channels = a.shape[0];
    const std::size_t cells = CnnConfig::kConvGrid * CnnConfig::kConvGrid;

    std::vector<double> grid(cells, 0.0);
    for (std::size_t k = 0; k < channels; ++k) {
        const double* ak = &a.v[k * cells];
        const double* gk = &g.v[k * cells];
        double sum_a = 0.0;
        for (std::size_t i = 0; i < cells; ++i)
            sum_a += ak[i];

        double wk = 0.0;
        for (std::size_t i = 0; i < cells; ++i) {
            const double gi = gk[i];
            const double denom = 2.0 * gi * gi + sum_a * gi * gi * gi;
            if (denom == 0.0)
                continue;  // 0/0 convention
            const double alpha = gi * gi / denom;
            wk += alpha * std::max(gi, 0.0);
        }
        for (std::size_t i = 0; i < cells; ++i)
            grid[i] += wk * ak[i];
    }

    double mx = 0.0;
    for (double& x : grid) {
        if (x < 0.0) x = 0.0;
        mx = std::max(mx, x);
    }
    if (mx > 0.0)
        for (double& x : grid)
            x /= mx;

    Heatmap small;
    small.width = small.height = CnnConfig::kConvGrid;
    small.intensities = std::move(grid);
    return upsample_bilinear(small, ModelInput::kSide, ModelInput::kSide);
}

Heatmap upsample_bilinear(const Heatmap& h, std::size_t width, std::size_t height)
{
    Heatmap out;
    out.width = width;
    out.height = height;
    out.intensities.resize(width * height);

    const double sy = static_cast<double>(h.height) / height;
    const double sx = static_cast<double>(h.width) / width;
    for (std::size_t y = 0; y < height; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(h.height - 1));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, h.height - 1);
        const double ty = fy - y0;
        for (std::size_t x = 0; x < width; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(h.width - 1));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, h.width - 1);
            const double tx = fx - x0;
            const double top = h.intensities[y0 * h.width + x0] * (1.0 - tx) +
                               h.intensities[y0 * h.width + x1] * tx;
            const double bot = h.intensities[y1 * h.width + x0] * (1.0 - tx) +
                               h.intensities[y1 * h.width + x1] * tx;
            out.intensities[y * width + x] = top * (1.0 - ty) + bot * ty;
        }
    }
    return out;
}

namespace {

double row_range_mean(const Heatmap& h, std::size_t start_row, std::size_t end_row)
{
    if (start_row >= end_row)
        return 0.0;
    double acc = 0.0;
    for (std::size_t i = start_row * h.width; i < end_row * h.width; ++i)
        acc += h.intensities[i];
    return acc / static_cast<double>((end_row - start_row) * h.width);
}

} // namespace

AnnotatedReport annotate(const Heatmap& h, const std::optional<PeLayout>& layout,
                         std::size_t file_len,
                         const std::optional<PaddingRegion>& padding,
                         const std::map<std::string, double>& scores)
{
    if (h.width * h.height < file_len)
        throw GeometryMismatchError("annotate: heatmap geometry cannot hold file");

    AnnotatedReport report;
    report.heatmap = h;
    report.scores = scores;

    if (layout) {
        for (const auto& rows : section_pixel_ranges(*layout, h.width, h.height, file_len)) {
            SectionIntensity si;
            si.name = rows.name;
            si.start_row = rows.start_row;
            si.end_row = rows.end_row;
            si.mean_intensity = row_range_mean(h, rows.start_row, rows.end_row);
            report.sections.push_back(std::move(si));
        }
    }
    if (padding) {
        const std::size_t start_row = static_cast<std::size_t>(padding->start_offset / h.width);
        const std::size_t end_row = std::min<std::size_t>(
            h.height, (padding->start_offset + padding->length + h.width - 1) / h.width);
        report.padding = PaddingIntensity{*padding, row_range_mean(h, start_row, end_row)};
    }
    return report;
}

namespace {

// 5-stop cold-to-warm ramp: blue, cyan, green, yellow, red.
constexpr std::uint8_t kRamp[5][3] = {
    {0, 0, 255}, {0, 255, 255}, {0, 255, 0}, {255, 255, 0}, {255, 0, 0}};

void ramp_color(double t, double rgb[3])
{
    t = std::clamp(t, 0.0, 1.0) * 4.0;
    const std::size_t seg = std::min<std::size_t>(3, static_cast<std::size_t>(t));
    const double f = t - seg;
    for (int c = 0; c < 3; ++c)
        rgb[c] = kRamp[seg][c] * (1.0 - f) + kRamp[seg + 1][c] * f;
}

} // namespace

RgbImage render_heatmap(const Heatmap& h, const GrayImage* base)
{
    if (base && (base->width != h.width || base->height != h.height))
        throw GeometryMismatchError("render_heatmap: base image geometry differs");

    RgbImage img;
    img.width = h.width;
    img.height = h.height;
    img.pixels.resize(3 * h.width * h.height);
    for (std::size_t i = 0; i < h.intensities.size(); ++i) {
        double rgb[3];
        ramp_color(h.intensities[i], rgb);
        for (int c = 0; c < 3; ++c) {
            double v = rgb[c];
            if (base)
                v = 0.6 * v + 0.4 * base->pixels[i];
            img.pixels[3 * i + c] = static_cast<std::uint8_t>(std::lround(v));
        }
    }
    return img;
}

} // namespace binsight
