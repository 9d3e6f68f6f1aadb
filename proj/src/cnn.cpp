#include "binsight/cnn.hpp"
#include "binsight/errors.hpp"
#include "binsight/rng.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace binsight {

namespace {

constexpr std::size_t kSide = ModelInput::kSide;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double safe_log(double x) { return std::log(std::max(x, 1e-300)); }

// 3x3 conv, stride 1, zero padding 1. in: [in_ch][side][side], out: [out_ch][side][side].
void conv_forward(const double* in, std::size_t in_ch, std::size_t side,
                  const Tensor& w, const Tensor& b, double* out, std::size_t out_ch)
{
    const std::size_t plane = side * side;
    for (std::size_t o = 0; o < out_ch; ++o) {
        double* dst = out + o * plane;
        std::fill(dst, dst + plane, b[o]);
        for (std::size_t i = 0; i < in_ch; ++i) {
            const double* src = in + i * plane;
            const double* k = &w.v[(o * in_ch + i) * 9];
            for (std::size_t y = 0; y < side; ++y) {
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const std::size_t sy = y + ky;
                    if (sy < 1 || sy > side) continue;
                    const double* row = src + (sy - 1) * side;
                    double* drow = dst + y * side;
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const double kv = k[ky * 3 + kx];
                        // x + kx - 1 must stay in [0, side)
                        const std::size_t x_lo = kx == 0 ? 1 : 0;
                        const std::size_t x_hi = kx == 2 ? side - 1 : side;
                        for (std::size_t x = x_lo; x < x_hi; ++x)
                            drow[x] += kv * row[x + kx - 1];
                    }
                }
            }
        }
    }
}

// Accumulates kernel/bias gradients and (optionally) the input gradient.
void conv_backward(const double* in, std::size_t in_ch, std::size_t side,
                   const Tensor& w, std::size_t out_ch,
                   const double* dout, Tensor& gw, Tensor& gb, double* din)
{
    const std::size_t plane = side * side;
    for (std::size_t o = 0; o < out_ch; ++o) {
        const double* d = dout + o * plane;
        double gbo = 0.0;
        for (std::size_t p = 0; p < plane; ++p) gbo += d[p];
        gb[o] += gbo;
        for (std::size_t i = 0; i < in_ch; ++i) {
            const double* src = in + i * plane;
            double* gk = &gw.v[(o * in_ch + i) * 9];
            const double* k = &w.v[(o * in_ch + i) * 9];
            double* dsrc = din ? din + i * plane : nullptr;
            for (std::size_t y = 0; y < side; ++y) {
                const double* drow = d + y * side;
                for (std::size_t ky = 0; ky < 3; ++ky) {
                    const std::size_t sy = y + ky;
                    if (sy < 1 || sy > side) continue;
                    const double* srow = src + (sy - 1) * side;
                    double* dsrow = dsrc ? dsrc + (sy - 1) * side : nullptr;
                    for (std::size_t kx = 0; kx < 3; ++kx) {
                        const std::size_t x_lo = kx == 0 ? 1 : 0;
                        const std::size_t x_hi = kx == 2 ? side - 1 : side;
                        double acc = 0.0;
                        const double kv = k[ky * 3 + kx];
                        for (std::size_t x = x_lo; x < x_hi; ++x) {
                            acc += drow[x] * srow[x + kx - 1];
                            if (dsrow) dsrow[x + kx - 1] += kv * drow[x];
                        }
                        gk[ky * 3 + kx] += acc;
                    }
                }
            }
        }
    }
}

void maxpool_forward(const double* in, std::size_t ch, std::size_t side,
                     double* out, std::uint32_t* argmax)
{
    const std::size_t half = side / 2;
    for (std::size_t c = 0; c < ch; ++c) {
        const double* src = in + c * side * side;
        double* dst = out + c * half * half;
        std::uint32_t* arg = argmax + c * half * half;
        for (std::size_t y = 0; y < half; ++y) {
            for (std::size_t x = 0; x < half; ++x) {
                const std::size_t base = (2 * y) * side + 2 * x;
                std::size_t best = base;
                double bv = src[base];
                for (std::size_t dy = 0; dy < 2; ++dy)
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = base + dy * side + dx;
                        if (src[idx] > bv) { bv = src[idx]; best = idx; }
                    }
                dst[y * half + x] = bv;
                arg[y * half + x] = static_cast<std::uint32_t>(c * side * side + best);
            }
        }
    }
}

std::array<std::size_t, 3> block_input_sides() { return {kSide, kSide / 2, kSide / 4}; }

void check_shapes(const CnnModel& model, const ModelInput& input)
{
    if (input.channels != model.config.input_channels)
        throw ShapeMismatchError("input channel count does not match model");
    if (input.values.size() != input.channels * kSide * kSide)
        throw ShapeMismatchError("input length does not match 64x64 geometry");
}

} // namespace

CnnModel init_model(const CnnConfig& config)
{
    if (config.heads != 1 && config.heads != 2)
        throw Error("init_model: heads must be 1 or 2");
    if (config.embedding_dim != 256)
        throw Error("init_model: embedding_dim is fixed at 256");

    CnnModel m;
    m.config = config;
    m.weights.resize(kWeightCount);

    std::size_t in_ch = config.input_channels;
    Rng rng(config.seed);
    auto he_uniform = [&](Tensor& t, std::size_t fan_in) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& x : t.v) x = rng.uniform(-limit, limit);
    };

    for (std::size_t k = 0; k < 3; ++k) {
        const std::size_t f = config.filters[k];
        Tensor w({f, in_ch, 3, 3});
        he_uniform(w, in_ch * 9);
        m.weights[kConv1W + 2 * k] = std::move(w);
        m.weights[kConv1B + 2 * k] = Tensor({f});
        in_ch = f;
    }
    const std::size_t flat = m.config.flatten_len();
    Tensor dw({config.embedding_dim, flat});
    he_uniform(dw, flat);
    m.weights[kDenseW] = std::move(dw);
    m.weights[kDenseB] = Tensor({config.embedding_dim});
    Tensor hw({config.heads, config.embedding_dim});
    he_uniform(hw, config.embedding_dim);
    m.weights[kHeadW] = std::move(hw);
    m.weights[kHeadB] = Tensor({config.heads});
    return m;
}

ForwardResult forward(const CnnModel& model, const ModelInput& input)
{
    check_shapes(model, input);
    const auto& cfg = model.config;
    const auto sides = block_input_sides();

    ForwardResult r;
    ActivationCache& c = r.cache;
    c.input = input.values;

    const double* cur = c.input.data();
    std::size_t in_ch = cfg.input_channels;
    for (std::size_t k = 0; k < 3; ++k) {
        const std::size_t side = sides[k];
        const std::size_t f = cfg.filters[k];
        c.conv_pre[k] = Tensor({f, side, side});
        conv_forward(cur, in_ch, side, model.weights[kConv1W + 2 * k],
                     model.weights[kConv1B + 2 * k], c.conv_pre[k].v.data(), f);
        c.conv_post[k] = c.conv_pre[k];
        for (double& x : c.conv_post[k].v)
            if (x < 0.0) x = 0.0;
        const std::size_t half = side / 2;
        c.pool_out[k] = Tensor({f, half, half});
        c.pool_argmax[k].resize(f * half * half);
        maxpool_forward(c.conv_post[k].v.data(), f, side, c.pool_out[k].v.data(),
                        c.pool_argmax[k].data());
        cur = c.pool_out[k].v.data();
        in_ch = f;
    }

    const std::vector<double>& flat = c.pool_out[2].v;
    const std::size_t flat_len = flat.size();
    const Tensor& dw = model.weights[kDenseW];
    const Tensor& db = model.weights[kDenseB];
    c.emb_pre.resize(cfg.embedding_dim);
    for (std::size_t j = 0; j < cfg.embedding_dim; ++j) {
        const double* row = &dw.v[j * flat_len];
        double acc = db[j];
        for (std::size_t i = 0; i < flat_len; ++i)
            acc += row[i] * flat[i];
        c.emb_pre[j] = acc;
    }
    c.emb = c.emb_pre;
    for (double& x : c.emb)
        if (x < 0.0) x = 0.0;

    const Tensor& hw = model.weights[kHeadW];
    const Tensor& hb = model.weights[kHeadB];
    c.logits.resize(cfg.heads);
    c.scores.resize(cfg.heads);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        const double* row = &hw.v[h * cfg.embedding_dim];
        double acc = hb[h];
        for (std::size_t j = 0; j < cfg.embedding_dim; ++j)
            acc += row[j] * c.emb[j];
        c.logits[h] = acc;
        c.scores[h] = sigmoid(acc);
    }
    r.scores = c.scores;
    return r;
}

double bce_loss(const std::vector<double>& scores, const HeadTargets& targets)
{
    if (scores.size() != targets.size())
        throw ShapeMismatchError("bce_loss: score/target count mismatch");
    double loss = 0.0;
    for (std::size_t h = 0; h < scores.size(); ++h) {
        if (!targets[h])
            continue;
        const double y = *targets[h];
        const double p = scores[h];
        loss -= y * safe_log(p) + (1.0 - y) * safe_log(1.0 - p);
    }
    return loss;
}

std::vector<Tensor> backward(const CnnModel& model, const ActivationCache& cache,
                             const HeadTargets& targets)
{
    const auto& cfg = model.config;
    if (targets.size() != cfg.heads)
        throw ShapeMismatchError("backward: target count does not match heads");

    std::vector<Tensor> grads(kWeightCount);
    for (std::size_t i = 0; i < kWeightCount; ++i)
        grads[i] = Tensor(model.weights[i].shape);

    // sigmoid + BCE collapses to p - y at the logit
    std::vector<double> dlogit(cfg.heads, 0.0);
    for (std::size_t h = 0; h < cfg.heads; ++h)
        if (targets[h])
            dlogit[h] = cache.scores[h] - *targets[h];

    const std::size_t emb_dim = cfg.embedding_dim;
    std::vector<double> demb(emb_dim, 0.0);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        const double d = dlogit[h];
        grads[kHeadB][h] = d;
        double* gw = &grads[kHeadW].v[h * emb_dim];
        const double* hw = &model.weights[kHeadW].v[h * emb_dim];
        for (std::size_t j = 0; j < emb_dim; ++j) {
            gw[j] = d * cache.emb[j];
            demb[j] += d * hw[j];
        }
    }
    for (std::size_t j = 0; j < emb_dim; ++j)
        if (cache.emb_pre[j] <= 0.0)
            demb[j] = 0.0;

    const std::vector<double>& flat = cache.pool_out[2].v;
    const std::size_t flat_len = flat.size();
    std::vector<double> dflat(flat_len, 0.0);
    for (std::size_t j = 0; j < emb_dim; ++j) {
        const double d = demb[j];
        grads[kDenseB][j] = d;
        double* gw = &grads[kDenseW].v[j * flat_len];
        if (d == 0.0)
            continue;
        const double* w = &model.weights[kDenseW].v[j * flat_len];
        for (std::size_t i = 0; i < flat_len; ++i) {
            gw[i] = d * flat[i];
            dflat[i] += d * w[i];
        }
    }

    const auto sides = block_input_sides();
    std::vector<double> dpool = std::move(dflat);
    for (std::size_t k = 3; k-- > 0;) {
        const std::size_t side = sides[k];
        const std::size_t f = cfg.filters[k];
        // unpool: route each pooled gradient to its argmax cell, then ReLU mask
        std::vector<double> dconv(f * side * side, 0.0);
        for (std::size_t p = 0; p < dpool.size(); ++p)
            dconv[cache.pool_argmax[k][p]] += dpool[p];
        const auto& pre = cache.conv_pre[k].v;
        for (std::size_t i = 0; i < dconv.size(); ++i)
            if (pre[i] <= 0.0)
                dconv[i] = 0.0;

        const std::size_t in_ch = k == 0 ? cfg.input_channels : cfg.filters[k - 1];
        const double* in = k == 0 ? cache.input.data() : cache.pool_out[k - 1].v.data();
        std::vector<double> din;
        double* din_ptr = nullptr;
        if (k > 0) {
            din.assign(in_ch * side * side, 0.0);
            din_ptr = din.data();
        }
        conv_backward(in, in_ch, side, model.weights[kConv1W + 2 * k], f,
                      dconv.data(), grads[kConv1W + 2 * k], grads[kConv1B + 2 * k],
                      din_ptr);
        dpool = std::move(din);
    }
    return grads;
}

std::vector<double> fit(CnnModel& model, const std::vector<LabeledInput>& dataset,
                        const TrainConfig& tc)
{
    if (dataset.empty())
        throw Error("fit: empty dataset");
    if (tc.batch_size == 0 || tc.learning_rate < 0.0)
        throw Error("fit: invalid train config");

    std::size_t n_threads = tc.threads ? tc.threads : std::thread::hardware_concurrency();
    if (n_threads == 0) n_threads = 1;

    std::vector<Tensor> velocity(kWeightCount);
    for (std::size_t i = 0; i < kWeightCount; ++i)
        velocity[i] = Tensor(model.weights[i].shape);

    Rng rng(tc.seed);
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> curve;
    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;

        for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
            const std::size_t count = std::min(tc.batch_size, order.size() - start);

            // Per-sample gradient buffers, reduced in sample order afterwards:
            // result is independent of the thread count.
            std::vector<std::vector<Tensor>> sample_grads(count);
            std::vector<double> sample_loss(count, 0.0);
            auto worker = [&](std::size_t lo, std::size_t hi) {
                for (std::size_t s = lo; s < hi; ++s) {
                    const LabeledInput& ex = dataset[order[start + s]];
                    ForwardResult fr = forward(model, ex.input);
                    sample_loss[s] = bce_loss(fr.scores, ex.labels);
                    sample_grads[s] = backward(model, fr.cache, ex.labels);
                }
            };
            if (n_threads == 1 || count == 1) {
                worker(0, count);
            } else {
                std::vector<std::thread> pool;
                const std::size_t chunk = (count + n_threads - 1) / n_threads;
                for (std::size_t t = 0; t < n_threads && t * chunk < count; ++t)
                    pool.emplace_back(worker, t * chunk, std::min(count, (t + 1) * chunk));
                for (auto& th : pool) th.join();
            }

            std::vector<Tensor> grads(kWeightCount);
            for (std::size_t i = 0; i < kWeightCount; ++i)
                grads[i] = Tensor(model.weights[i].shape);
            for (std::size_t s = 0; s < count; ++s) {
                epoch_loss += sample_loss[s];
                for (std::size_t i = 0; i < kWeightCount; ++i) {
                    const auto& g = sample_grads[s][i].v;
                    auto& acc = grads[i].v;
                    for (std::size_t j = 0; j < g.size(); ++j)
                        acc[j] += g[j];
                }
            }

            const double scale = 1.0 / static_cast<double>(count);
            for (std::size_t i = 0; i < kWeightCount; ++i) {
                auto& w = model.weights[i].v;
                auto& vel = velocity[i].v;
                const auto& g = grads[i].v;
                for (std::size_t j = 0; j < w.size(); ++j) {
                    vel[j] = tc.momentum * vel[j] - tc.learning_rate * g[j] * scale;
                    w[j] += vel[j];
                }
            }
        }

        const double mean_loss = epoch_loss / static_cast<double>(dataset.size());
        if (!std::isfinite(mean_loss))
            throw DivergenceError("fit: loss became non-finite at epoch " +
                                  std::to_string(epoch + 1));
        curve.push_back(mean_loss);
        ++model.trained_epochs;
        if (tc.stop_below_loss > 0.0 && mean_loss < tc.stop_below_loss)
            break;
    }
    return curve;
}

std::vector<double> embed(const CnnModel& model, const ModelInput& input)
{
    return forward(model, input).cache.emb;
}

DualScores predict_dual(const CnnModel& model, const ModelInput& input)
{
    if (model.config.heads != 2)
        throw HeadCountMismatchError("predict_dual requires a two-head model");
    ForwardResult r = forward(model, input);
    return DualScores{r.scores[0], r.scores[1]};
}

StackedVerdict predict_stacked(const CnnModel& gate,
                               const CnnModel& specialist_modified,
                               const CnnModel& specialist_clean,
                               const ModelInput& input)
{
    if (gate.config.heads != 1 || specialist_modified.config.heads != 1 ||
        specialist_clean.config.heads != 1)
        throw HeadCountMismatchError("predict_stacked requires single-head models");

    StackedVerdict v;
    v.modified_score = forward(gate, input).scores[0];
    v.modified_flag = v.modified_score >= 0.5;
    v.route = v.modified_flag ? Route::ModifiedSpecialist : Route::CleanSpecialist;
    const CnnModel& chosen = v.modified_flag ? specialist_modified : specialist_clean;
    v.malicious_score = forward(chosen, input).scores[0];
    return v;
}

Tensor logit_gradient_last_conv(const CnnModel& model, const ActivationCache& cache,
                                std::size_t head)
{
    const auto& cfg = model.config;
    if (head >= cfg.heads)
        throw HeadCountMismatchError("logit_gradient_last_conv: no such head");

    const std::size_t emb_dim = cfg.embedding_dim;
    std::vector<double> demb(emb_dim);
    const double* hw = &model.weights[kHeadW].v[head * emb_dim];
    for (std::size_t j = 0; j < emb_dim; ++j)
        demb[j] = cache.emb_pre[j] > 0.0 ? hw[j] : 0.0;

    const std::size_t flat_len = cache.pool_out[2].size();
    Tensor g(cache.pool_out[2].shape);
    for (std::size_t j = 0; j < emb_dim; ++j) {
        const double d = demb[j];
        if (d == 0.0)
            continue;
        const double* w = &model.weights[kDenseW].v[j * flat_len];
        for (std::size_t i = 0; i < flat_len; ++i)
            g.v[i] += d * w[i];
    }
    return g;
}

} // namespace binsight
