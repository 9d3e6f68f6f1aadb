#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "binsight/image.hpp"
#include "binsight/tensor.hpp"

namespace binsight {

/// Fixed topology: three conv(3x3, stride 1, same padding) + ReLU +
/// maxpool(2x2) blocks, dense-256 with ReLU (the embedding), then one
/// sigmoid unit per head. 64x64 input shrinks to 8x8 after the pools.
struct CnnConfig {
    std::size_t input_channels = 1;              // 1 = grayscale, 3 = RGB
    std::array<std::size_t, 3> filters = {8, 16, 32};
    std::size_t embedding_dim = 256;
    std::size_t heads = 1;                       // 2 = malicious + modified
    std::uint64_t seed = 0;

    static constexpr std::size_t kKernel = 3;
    static constexpr std::size_t kConvGrid = 8;  // spatial side after the third pool

    std::size_t flatten_len() const { return filters[2] * kConvGrid * kConvGrid; }
};

/// Weight tensor order inside CnnModel::weights.
enum WeightIndex : std::size_t {
    kConv1W, kConv1B, kConv2W, kConv2B, kConv3W, kConv3B,
    kDenseW, kDenseB, kHeadW, kHeadB,
    kWeightCount
};

struct CnnModel {
    CnnConfig config;
    std::vector<Tensor> weights;  // indexed by WeightIndex
    std::size_t trained_epochs = 0;
};

/// Every intermediate of one forward pass, kept for backprop and GradCAM++.
struct ActivationCache {
    std::vector<double> input;                       // channels*64*64
    std::array<Tensor, 3> conv_pre;                  // pre-ReLU
    std::array<Tensor, 3> conv_post;                 // post-ReLU
    std::array<Tensor, 3> pool_out;                  // post 2x2 max-pool
    std::array<std::vector<std::uint32_t>, 3> pool_argmax;
    std::vector<double> emb_pre;                     // dense pre-ReLU
    std::vector<double> emb;                         // the 256-dim embedding
    std::vector<double> logits;                      // per head, pre-sigmoid
    std::vector<double> scores;                      // sigmoid(logits)
};

struct ForwardResult {
    std::vector<double> scores;
    ActivationCache cache;
};

/// Per-head targets; nullopt masks that head out of the loss.
using HeadTargets = std::vector<std::optional<double>>;

struct LabeledInput {
    ModelInput input;
    HeadTargets labels;
};

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 32;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    std::size_t threads = 0;        // 0 = hardware concurrency
    double stop_below_loss = 0.0;   // early stop once mean epoch loss drops below; 0 disables
};

/// He-uniform conv/dense weights, zero biases, deterministic per seed.
CnnModel init_model(const CnnConfig& config);

ForwardResult forward(const CnnModel& model, const ModelInput& input);

/// Summed per-head binary cross-entropy for one sample.
double bce_loss(const std::vector<double>& scores, const HeadTargets& targets);

/// Exact gradients of bce_loss w.r.t. every weight tensor; same layout as
/// model.weights.
std::vector<Tensor> backward(const CnnModel& model, const ActivationCache& cache,
                             const HeadTargets& targets);

/// SGD with momentum over seeded shuffled mini-batches. Returns the mean
/// training loss per epoch. Throws DivergenceError on non-finite loss.
std::vector<double> fit(CnnModel& model, const std::vector<LabeledInput>& dataset,
                        const TrainConfig& tc);

/// Post-ReLU dense activations, length 256, entries >= 0.
std::vector<double> embed(const CnnModel& model, const ModelInput& input);

struct DualScores {
    double malicious = 0.0;
    double modified = 0.0;
};

DualScores predict_dual(const CnnModel& model, const ModelInput& input);

enum class Route { ModifiedSpecialist, CleanSpecialist };

struct StackedVerdict {
    bool modified_flag = false;
    double modified_score = 0.0;   // the gate's score
    double malicious_score = 0.0;  // chosen specialist's score
    Route route = Route::CleanSpecialist;
};

/// Gate scores the input; >= 0.5 routes to the modified-binaries specialist.
StackedVerdict predict_stacked(const CnnModel& gate,
                               const CnnModel& specialist_modified,
                               const CnnModel& specialist_clean,
                               const ModelInput& input);

/// d(logit of head)/d(pool3 output), shape [filters3, 8, 8]. Feeds GradCAM++.
Tensor logit_gradient_last_conv(const CnnModel& model, const ActivationCache& cache,
                                std::size_t head);

} // namespace binsight
