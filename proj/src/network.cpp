#include "evosynth/network.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "evosynth/errors.hpp"
#include "evosynth/rng.hpp"

namespace evo {

using RowMat =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConst = Eigen::Map<const RowMat>;

Loss loss_from_string(const std::string& s) {
    if (s == "bce" || s == "binary-cross-entropy") return Loss::binary_cross_entropy;
    if (s == "mse" || s == "mean-squared-error") return Loss::mean_squared_error;
    throw std::invalid_argument("unknown loss '" + s + "'");
}

const char* to_string(Loss l) {
    return l == Loss::binary_cross_entropy ? "bce" : "mse";
}

namespace {

constexpr float kBceClamp = 1e-7f;

inline float sigmoidf(float z) { return 1.0f / (1.0f + std::exp(-z)); }

void activate(Activation act, float* p, std::int64_t n) {
    switch (act) {
        case Activation::relu:
            for (std::int64_t i = 0; i < n; ++i) p[i] = p[i] > 0.0f ? p[i] : 0.0f;
            break;
        case Activation::sigmoid:
            for (std::int64_t i = 0; i < n; ++i) p[i] = sigmoidf(p[i]);
            break;
        case Activation::identity:
            break;
    }
}

// Derivative from the post-activation value (all three activations allow it).
inline float act_deriv(Activation act, float y) {
    switch (act) {
        case Activation::relu: return y > 0.0f ? 1.0f : 0.0f;
        case Activation::sigmoid: return y * (1.0f - y);
        case Activation::identity: return 1.0f;
    }
    return 1.0f;
}

void im2col(const float* x, int ci, int ih, int iw, int kh, int kw, int stride,
            int pad, int oh, int ow, float* col) {
    // col is {ci*kh*kw, oh*ow}
    for (int c = 0; c < ci; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                float* row = col + ((static_cast<std::int64_t>(c) * kh + ky) * kw + kx) *
                                       (static_cast<std::int64_t>(oh) * ow);
                for (int oy = 0; oy < oh; ++oy) {
                    int y = oy * stride - pad + ky;
                    if (y < 0 || y >= ih) {
                        for (int ox = 0; ox < ow; ++ox) row[oy * ow + ox] = 0.0f;
                        continue;
                    }
                    const float* src = x + (static_cast<std::int64_t>(c) * ih + y) * iw;
                    for (int ox = 0; ox < ow; ++ox) {
                        int xx = ox * stride - pad + kx;
                        row[oy * ow + ox] = (xx >= 0 && xx < iw) ? src[xx] : 0.0f;
                    }
                }
            }
        }
    }
}

void col2im_accumulate(const float* col, int ci, int ih, int iw, int kh, int kw,
                       int stride, int pad, int oh, int ow, float* gx) {
    for (int c = 0; c < ci; ++c) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const float* row =
                    col + ((static_cast<std::int64_t>(c) * kh + ky) * kw + kx) *
                              (static_cast<std::int64_t>(oh) * ow);
                for (int oy = 0; oy < oh; ++oy) {
                    int y = oy * stride - pad + ky;
                    if (y < 0 || y >= ih) continue;
                    float* dst = gx + (static_cast<std::int64_t>(c) * ih + y) * iw;
                    for (int ox = 0; ox < ow; ++ox) {
                        int xx = ox * stride - pad + kx;
                        if (xx >= 0 && xx < iw) dst[xx] += row[oy * ow + ox];
                    }
                }
            }
        }
    }
}

std::int64_t plane_elems(const Shape3& s) {
    return static_cast<std::int64_t>(s.h) * s.w;
}

void check_batch_shape(const Network& net, const Tensor& batch) {
    if (batch.shape.size() != 4)
        throw ShapeError("batch must be {N,C,H,W}, got rank " +
                         std::to_string(batch.shape.size()));
    Shape3 in{batch.shape[1], batch.shape[2], batch.shape[3]};
    if (in != net.arch.input)
        throw ShapeError("batch shape " + in.str() +
                         " does not match network input " +
                         net.arch.input.str());
}

}  // namespace

Network init_network(const Architecture& arch, const TrainConfig& cfg,
                     std::uint64_t seed) {
    Network net;
    net.arch = arch;
    net.weights.resize(arch.layers.size());
    net.biases.resize(arch.layers.size());
    std::mt19937_64 rng(seed);
    for (int i = 0; i < arch.num_layers(); ++i) {
        const LayerSpec& s = arch.layers[i];
        if (!s.has_weights()) continue;
        net.weights[i] = Tensor(s.weight_shape());
        net.biases[i] = Tensor({s.out.c});
        const auto& mask = arch.masks[i];
        std::int64_t n = s.weight_count();

        if (cfg.init == InitMode::constant) {
            for (std::int64_t j = 0; j < n; ++j)
                net.weights[i][j] = mask[j] ? cfg.init_constant : 0.0f;
            continue;
        }

        // Fans measured on the unmasked topology: average live incoming per
        // hit output unit / live outgoing per hit input slot.
        std::int64_t per_out = n / s.out.c;
        std::int64_t unmasked = 0;
        std::vector<std::uint8_t> out_hit(s.out.c, 0);
        std::int64_t in_slots = (s.kind == LayerKind::conv2d) ? s.in.c
                                                              : s.in.numel();
        std::vector<std::uint8_t> in_hit(in_slots, 0);
        std::int64_t kplane = (s.kind == LayerKind::conv2d)
                                  ? static_cast<std::int64_t>(s.kh) * s.kw
                                  : 1;
        for (int o = 0; o < s.out.c; ++o) {
            for (std::int64_t j = 0; j < per_out; ++j) {
                if (!mask[o * per_out + j]) continue;
                ++unmasked;
                out_hit[o] = 1;
                in_hit[j / kplane] = 1;
            }
        }
        std::int64_t outs = 0, ins = 0;
        for (auto b : out_hit) outs += b;
        for (auto b : in_hit) ins += b;
        double fan_in = outs ? static_cast<double>(unmasked) / outs : 0.0;
        double fan_out = ins ? static_cast<double>(unmasked) / ins : 0.0;
        double scale =
            (fan_in + fan_out) > 0 ? std::sqrt(6.0 / (fan_in + fan_out)) : 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            double u = uniform_open01(rng);
            float w = static_cast<float>(scale * (2.0 * u - 1.0));
            net.weights[i][j] = mask[j] ? w : 0.0f;
        }
    }
    return net;
}

void apply_mask(Network& net) {
    for (int i = 0; i < net.arch.num_layers(); ++i) {
        const auto& mask = net.arch.masks[i];
        for (std::size_t j = 0; j < mask.size(); ++j)
            if (!mask[j]) net.weights[i][j] = 0.0f;
    }
}

ForwardTrace forward_trace(const Network& net, const Tensor& batch) {
    check_batch_shape(net, batch);
    const Architecture& arch = net.arch;
    int N = batch.shape[0];
    ForwardTrace trace;
    trace.outputs.resize(arch.layers.size());

    std::vector<float> colbuf;
    for (int i = 0; i < arch.num_layers(); ++i) {
        const LayerSpec& s = arch.layers[i];
        const Tensor& x = (i == 0) ? batch : trace.outputs[i - 1];
        Tensor y({N, s.out.c, s.out.h, s.out.w});
        std::int64_t in_sz = s.in.numel();
        std::int64_t out_sz = s.out.numel();

        switch (s.kind) {
            case LayerKind::dense: {
                MapConst X(x.ptr(), N, in_sz);
                MapConst W(net.weights[i].ptr(), s.out.c, in_sz);
                MapMat Y(y.ptr(), N, s.out.c);
                Y.noalias() = X * W.transpose();
                for (int n = 0; n < N; ++n)
                    for (int o = 0; o < s.out.c; ++o)
                        y[n * s.out.c + o] += net.biases[i][o];
                activate(s.act, y.ptr(), y.numel());
                break;
            }
            case LayerKind::conv2d: {
                std::int64_t K = static_cast<std::int64_t>(s.in.c) * s.kh * s.kw;
                std::int64_t ohw = plane_elems(s.out);
                colbuf.resize(static_cast<std::size_t>(K * ohw));
                MapConst W(net.weights[i].ptr(), s.out.c, K);
                for (int n = 0; n < N; ++n) {
                    im2col(x.ptr() + n * in_sz, s.in.c, s.in.h, s.in.w, s.kh,
                           s.kw, s.stride, s.pad, s.out.h, s.out.w,
                           colbuf.data());
                    MapConst C(colbuf.data(), K, ohw);
                    MapMat Y(y.ptr() + n * out_sz, s.out.c, ohw);
                    Y.noalias() = W * C;
                    for (int o = 0; o < s.out.c; ++o)
                        Y.row(o).array() += net.biases[i][o];
                }
                activate(s.act, y.ptr(), y.numel());
                break;
            }
            case LayerKind::upsample: {
                int f = s.factor;
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < s.out.c; ++c) {
                        const float* src =
                            x.ptr() + (static_cast<std::int64_t>(n) * s.in.c + c) *
                                          plane_elems(s.in);
                        float* dst =
                            y.ptr() + (static_cast<std::int64_t>(n) * s.out.c + c) *
                                          plane_elems(s.out);
                        for (int oy = 0; oy < s.out.h; ++oy)
                            for (int ox = 0; ox < s.out.w; ++ox)
                                dst[oy * s.out.w + ox] =
                                    src[(oy / f) * s.in.w + (ox / f)];
                    }
                break;
            }
            case LayerKind::concat: {
                const Tensor& skip = (s.from == -1) ? batch : trace.outputs[s.from];
                std::int64_t main_sz = in_sz;
                std::int64_t skip_sz = skip.numel() / N;
                for (int n = 0; n < N; ++n) {
                    float* dst = y.ptr() + n * out_sz;
                    std::copy(x.ptr() + n * main_sz, x.ptr() + (n + 1) * main_sz, dst);
                    std::copy(skip.ptr() + n * skip_sz,
                              skip.ptr() + (n + 1) * skip_sz, dst + main_sz);
                }
                break;
            }
            case LayerKind::nonlinearity: {
                std::copy(x.data.begin(), x.data.end(), y.data.begin());
                activate(s.act, y.ptr(), y.numel());
                break;
            }
        }
        trace.outputs[i] = std::move(y);
    }
    return trace;
}

Tensor forward(const Network& net, const Tensor& batch) {
    ForwardTrace t = forward_trace(net, batch);
    return std::move(t.outputs.back());
}

double loss_value(const Tensor& output, const Tensor& targets, Loss loss) {
    if (!output.same_shape(targets))
        throw ShapeError("targets shape does not match output shape");
    double acc = 0.0;
    std::int64_t n = output.numel();
    if (loss == Loss::mean_squared_error) {
        for (std::int64_t i = 0; i < n; ++i) {
            double d = static_cast<double>(output[i]) - targets[i];
            acc += d * d;
        }
    } else {
        for (std::int64_t i = 0; i < n; ++i) {
            double y = std::min(std::max(static_cast<double>(output[i]),
                                         static_cast<double>(kBceClamp)),
                                1.0 - static_cast<double>(kBceClamp));
            double t = targets[i];
            acc -= t * std::log(y) + (1.0 - t) * std::log1p(-y);
        }
    }
    return acc / static_cast<double>(n);
}

namespace {

// dL/dz of the final layer (activation derivative folded in). The
// bce+sigmoid pair uses the fused (y - t)/M form so saturated outputs do not
// produce inf*0.
Tensor output_delta(const Tensor& y, const Tensor& t, Loss loss,
                    Activation last_act) {
    Tensor d(y.shape);
    std::int64_t n = y.numel();
    double inv = 1.0 / static_cast<double>(n);
    if (loss == Loss::binary_cross_entropy && last_act == Activation::sigmoid) {
        for (std::int64_t i = 0; i < n; ++i)
            d[i] = static_cast<float>((y[i] - t[i]) * inv);
        return d;
    }
    for (std::int64_t i = 0; i < n; ++i) {
        double dy;
        if (loss == Loss::mean_squared_error) {
            dy = 2.0 * (y[i] - t[i]) * inv;
        } else {
            double yc = std::min(std::max(static_cast<double>(y[i]),
                                          static_cast<double>(kBceClamp)),
                                 1.0 - static_cast<double>(kBceClamp));
            dy = (yc - t[i]) / (yc * (1.0 - yc)) * inv;
        }
        d[i] = static_cast<float>(dy * act_deriv(last_act, y[i]));
    }
    return d;
}

Gradients backward(const Network& net, const Tensor& batch,
                   const ForwardTrace& trace, Tensor dlast) {
    const Architecture& arch = net.arch;
    int N = batch.shape[0];
    int L = arch.num_layers();

    Gradients g;
    g.weights.resize(L);
    g.biases.resize(L);
    for (int i = 0; i < L; ++i) {
        if (!arch.layers[i].has_weights()) continue;
        g.weights[i] = Tensor(arch.layers[i].weight_shape());
        g.biases[i] = Tensor({arch.layers[i].out.c});
    }

    // Output-gradient buffer per layer; dlast already includes the final
    // activation derivative.
    std::vector<Tensor> gy(L);
    gy[L - 1] = std::move(dlast);

    std::vector<float> colbuf, dcolbuf;
    for (int i = L - 1; i >= 0; --i) {
        const LayerSpec& s = arch.layers[i];
        if (gy[i].empty()) continue;  // branch never reaches the loss
        Tensor dz = std::move(gy[i]);
        const Tensor& y = trace.outputs[i];
        bool act_applied = s.has_weights() || s.kind == LayerKind::nonlinearity;
        if (act_applied && i != L - 1 && s.act != Activation::identity) {
            for (std::int64_t j = 0; j < dz.numel(); ++j)
                dz[j] *= act_deriv(s.act, y[j]);
        }

        const Tensor& x = (i == 0) ? batch : trace.outputs[i - 1];
        Tensor* gx = nullptr;
        if (i > 0) {
            if (gy[i - 1].empty()) gy[i - 1] = Tensor(trace.outputs[i - 1].shape);
            gx = &gy[i - 1];
        }

        std::int64_t in_sz = s.in.numel();
        std::int64_t out_sz = s.out.numel();

        switch (s.kind) {
            case LayerKind::dense: {
                MapConst X(x.ptr(), N, in_sz);
                MapConst D(dz.ptr(), N, s.out.c);
                MapMat GW(g.weights[i].ptr(), s.out.c, in_sz);
                GW.noalias() = D.transpose() * X;
                for (int o = 0; o < s.out.c; ++o)
                    g.biases[i][o] = D.col(o).sum();
                if (gx) {
                    MapConst W(net.weights[i].ptr(), s.out.c, in_sz);
                    MapMat GX(gx->ptr(), N, in_sz);
                    GX.noalias() += D * W;
                }
                break;
            }
            case LayerKind::conv2d: {
                std::int64_t K = static_cast<std::int64_t>(s.in.c) * s.kh * s.kw;
                std::int64_t ohw = plane_elems(s.out);
                colbuf.resize(static_cast<std::size_t>(K * ohw));
                dcolbuf.resize(static_cast<std::size_t>(K * ohw));
                MapConst W(net.weights[i].ptr(), s.out.c, K);
                MapMat GW(g.weights[i].ptr(), s.out.c, K);
                for (int n = 0; n < N; ++n) {
                    im2col(x.ptr() + n * in_sz, s.in.c, s.in.h, s.in.w, s.kh,
                           s.kw, s.stride, s.pad, s.out.h, s.out.w,
                           colbuf.data());
                    MapConst C(colbuf.data(), K, ohw);
                    MapConst D(dz.ptr() + n * out_sz, s.out.c, ohw);
                    GW.noalias() += D * C.transpose();
                    for (int o = 0; o < s.out.c; ++o)
                        g.biases[i][o] += D.row(o).sum();
                    if (gx) {
                        MapMat DC(dcolbuf.data(), K, ohw);
                        DC.noalias() = W.transpose() * D;
                        col2im_accumulate(dcolbuf.data(), s.in.c, s.in.h,
                                          s.in.w, s.kh, s.kw, s.stride, s.pad,
                                          s.out.h, s.out.w,
                                          gx->ptr() + n * in_sz);
                    }
                }
                break;
            }
            case LayerKind::upsample: {
                if (!gx) break;
                int f = s.factor;
                for (int n = 0; n < N; ++n)
                    for (int c = 0; c < s.out.c; ++c) {
                        const float* src =
                            dz.ptr() + (static_cast<std::int64_t>(n) * s.out.c + c) *
                                           plane_elems(s.out);
                        float* dst =
                            gx->ptr() + (static_cast<std::int64_t>(n) * s.in.c + c) *
                                            plane_elems(s.in);
                        for (int oy = 0; oy < s.out.h; ++oy)
                            for (int ox = 0; ox < s.out.w; ++ox)
                                dst[(oy / f) * s.in.w + (ox / f)] +=
                                    src[oy * s.out.w + ox];
                    }
                break;
            }
            case LayerKind::concat: {
                std::int64_t main_sz = in_sz;
                std::int64_t skip_sz = out_sz - main_sz;
                Tensor* gskip = nullptr;
                if (s.from >= 0) {
                    if (gy[s.from].empty())
                        gy[s.from] = Tensor(trace.outputs[s.from].shape);
                    gskip = &gy[s.from];
                }
                for (int n = 0; n < N; ++n) {
                    const float* src = dz.ptr() + n * out_sz;
                    if (gx) {
                        float* dst = gx->ptr() + n * main_sz;
                        for (std::int64_t j = 0; j < main_sz; ++j) dst[j] += src[j];
                    }
                    if (gskip) {
                        float* dst = gskip->ptr() + n * skip_sz;
                        for (std::int64_t j = 0; j < skip_sz; ++j)
                            dst[j] += src[main_sz + j];
                    }
                }
                break;
            }
            case LayerKind::nonlinearity: {
                if (!gx) break;
                for (std::int64_t j = 0; j < dz.numel(); ++j)
                    (*gx)[j] += dz[j];
                break;
            }
        }
    }

    // Masking contract: gradients at masked synapses are exactly zero.
    for (int i = 0; i < L; ++i) {
        const auto& mask = arch.masks[i];
        for (std::size_t j = 0; j < mask.size(); ++j)
            if (!mask[j]) g.weights[i][j] = 0.0f;
    }
    return g;
}

Activation final_activation(const Architecture& arch) {
    const LayerSpec& last = arch.layers.back();
    bool applies = last.has_weights() || last.kind == LayerKind::nonlinearity;
    return applies ? last.act : Activation::identity;
}

}  // namespace

Gradients gradients(const Network& net, const Tensor& batch,
                    const Tensor& targets, Loss loss) {
    ForwardTrace trace = forward_trace(net, batch);
    const Tensor& y = trace.outputs.back();
    if (!y.same_shape(targets))
        throw ShapeError("targets shape does not match output shape");
    Tensor dlast = output_delta(y, targets, loss, final_activation(net.arch));
    return backward(net, batch, trace, std::move(dlast));
}

Tensor stack_inputs(const std::vector<Example>& data,
                    const std::vector<std::size_t>& indices) {
    const Tensor& first = data[indices[0]].input;
    std::vector<int> shape = first.shape;
    shape.insert(shape.begin(), static_cast<int>(indices.size()));
    Tensor out(shape);
    std::int64_t sz = first.numel();
    for (std::size_t n = 0; n < indices.size(); ++n)
        std::copy(data[indices[n]].input.data.begin(),
                  data[indices[n]].input.data.end(), out.ptr() + n * sz);
    return out;
}

Tensor stack_targets(const std::vector<Example>& data,
                     const std::vector<std::size_t>& indices) {
    const Tensor& first = data[indices[0]].target;
    std::vector<int> shape = first.shape;
    shape.insert(shape.begin(), static_cast<int>(indices.size()));
    Tensor out(shape);
    std::int64_t sz = first.numel();
    for (std::size_t n = 0; n < indices.size(); ++n)
        std::copy(data[indices[n]].target.data.begin(),
                  data[indices[n]].target.data.end(), out.ptr() + n * sz);
    return out;
}

TrainResult train(Network net, const std::vector<Example>& data,
                  const TrainConfig& cfg) {
    if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (cfg.epochs > 0 && cfg.learning_rate <= 0.0f)
        throw std::invalid_argument("learning rate must be > 0 when training");
    if (cfg.epochs > 0 && data.empty())
        throw std::invalid_argument("dataset is empty");

    TrainResult result;
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        deterministic_shuffle(order, rng);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(order.size(),
                                       start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
            Tensor X = stack_inputs(data, idx);
            Tensor T = stack_targets(data, idx);

            ForwardTrace trace = forward_trace(net, X);
            const Tensor& y = trace.outputs.back();
            if (!y.same_shape(T))
                throw ShapeError("targets shape does not match output shape");
            double batch_loss = loss_value(y, T, cfg.loss);
            if (!std::isfinite(batch_loss)) throw TrainingDiverged(epoch);

            Tensor dlast = output_delta(y, T, cfg.loss, final_activation(net.arch));
            Gradients g = backward(net, X, trace, std::move(dlast));

            for (int i = 0; i < net.arch.num_layers(); ++i) {
                if (!net.arch.layers[i].has_weights()) continue;
                const auto& mask = net.arch.masks[i];
                float* w = net.weights[i].ptr();
                const float* gw = g.weights[i].ptr();
                for (std::size_t j = 0; j < mask.size(); ++j)
                    if (mask[j]) w[j] -= cfg.learning_rate * gw[j];
                float* b = net.biases[i].ptr();
                const float* gb = g.biases[i].ptr();
                for (int o = 0; o < net.arch.layers[i].out.c; ++o)
                    b[o] -= cfg.learning_rate * gb[o];
            }
            loss_sum += batch_loss * static_cast<double>(idx.size());
            seen += idx.size();
        }
        result.epoch_loss.push_back(loss_sum / static_cast<double>(seen));
    }
    result.net = std::move(net);
    return result;
}

}  // namespace evo
