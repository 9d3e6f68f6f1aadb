#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "binsight/binary.hpp"
#include "binsight/cnn.hpp"
#include "binsight/image.hpp"
#include "binsight/stats.hpp"

namespace binsight {

/// Per-pixel attention intensities in [0,1]; max is 1 unless the whole map
/// is zero.
struct Heatmap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> intensities;
};

struct SectionIntensity {
    std::string name;
    std::size_t start_row = 0;
    std::size_t end_row = 0;  // exclusive
    double mean_intensity = 0.0;
};

struct PaddingIntensity {
    PaddingRegion region;
    double mean_intensity = 0.0;
};

struct AnnotatedReport {
    Heatmap heatmap;
    std::vector<SectionIntensity> sections;
    std::optional<PaddingIntensity> padding;
    std::map<std::string, double> scores;
};

/// GradCAM++ over the last conv block's pooled activations (the 8x8 grid).
/// Y is the chosen head's pre-sigmoid logit. Weights
///   alpha = g^2 / (2 g^2 + sum(A) g^3)   with 0/0 := 0,
///   w_k = sum(alpha * relu(g)),
/// map = relu(sum_k w_k A^k), max-normalized, bilinear-upsampled to 64x64.
Heatmap gradcam_pp(const CnnModel& model, const ModelInput& input, std::size_t head);

/// Bilinear resize (half-pixel centers); output values stay within the
/// source min/max.
Heatmap upsample_bilinear(const Heatmap& h, std::size_t width, std::size_t height);

/// Per-section and padding-region mean intensities over the file-geometry
/// heatmap. Throws GeometryMismatchError when the heatmap cannot hold the file.
AnnotatedReport annotate(const Heatmap& h, const std::optional<PeLayout>& layout,
                         std::size_t file_len,
                         const std::optional<PaddingRegion>& padding,
                         const std::map<std::string, double>& scores);

/// Cold-to-warm ramp render; when `base` is given the heatmap colors are
/// blended over the grayscale image (60% ramp, 40% image).
RgbImage render_heatmap(const Heatmap& h, const GrayImage* base);

} // namespace binsight
