// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mhpe/nn/tensor.hpp"
#include "mhpe/rng.hpp"

namespace mhpe::nn {

/// One learnable array with its gradient and momentum buffer.
struct Param {
    std::string name;
    std::vector<float> w;
    std::vector<float> g;
    std::vector<float> m;
    bool decay = true;  // weight decay applies to conv kernels only

    void init(std::string n, size_t size, bool decay_) {
        name = std::move(n);
        w.assign(size, 0.f);
        g.assign(size, 0.f);
        m.assign(size, 0.f);
        decay = decay_;
    }
};

struct Conv2d {
    int in_c = 0, out_c = 0, k = 1, stride = 1, pad = 0;
    bool use_bias = false;
    Param weight;  // [out_c][in_c][k][k]
    Param bias;

    // training-time caches
    std::vector<float> cols;
    int cached_out_h = 0, cached_out_w = 0, cached_in_h = 0, cached_in_w = 0;

    void configure(const std::string& name, int in, int out, int kernel, int stride_, bool bias_) {
        in_c = in;
        out_c = out;
        k = kernel;
        stride = stride_;
        pad = kernel / 2;
        use_bias = bias_;
        weight.init(name + ".weight", static_cast<size_t>(out) * in * kernel * kernel, true);
        bias.init(name + ".bias", bias_ ? out : 0, false);
    }

    void init_weights(Rng& rng) {
        const double fan_in = static_cast<double>(in_c) * k * k;
        const double std = std::sqrt(2.0 / fan_in);
        for (auto& v : weight.w) v = static_cast<float>(rng.normal(0.0, std));
        for (auto& v : bias.w) v = 0.f;
    }

    int out_h(int in_h) const { return (in_h + 2 * pad - k) / stride + 1; }
    int out_w(int in_w) const { return (in_w + 2 * pad - k) / stride + 1; }

    void forward(const Tensor& x, Tensor& y, bool train) {
        const int oh = out_h(x.h), ow = out_w(x.w);
        y = Tensor(out_c, oh, ow);
        im2col(x, k, stride, pad, oh, ow, cols);
        if (train) {
            cached_out_h = oh;
            cached_out_w = ow;
            cached_in_h = x.h;
            cached_in_w = x.w;
        }
        const int kk = in_c * k * k;
        MapConstMatF wmat(weight.w.data(), out_c, kk);
        MapConstMatF amat(cols.data(), kk, oh * ow);
        MapMatF ymat(y.data(), out_c, oh * ow);
        ymat.noalias() = wmat * amat;
        if (use_bias) {
            for (int co = 0; co < out_c; ++co) {
                ymat.row(co).array() += bias.w[co];
            }
        }
    }

    /// Consumes the cached im2col matrix from the matching forward call.
    void backward(const Tensor& dy, Tensor& dx) {
        const int kk = in_c * k * k;
        const int spatial = cached_out_h * cached_out_w;
        MapConstMatF dymat(dy.data(), out_c, spatial);
        MapConstMatF amat(cols.data(), kk, spatial);
        MapMatF gw(weight.g.data(), out_c, kk);
        gw.noalias() += dymat * amat.transpose();
        if (use_bias) {
            for (int co = 0; co < out_c; ++co) bias.g[co] += dymat.row(co).sum();
        }
        MapConstMatF wmat(weight.w.data(), out_c, kk);
        std::vector<float> dcols(static_cast<size_t>(kk) * spatial);
        MapMatF damat(dcols.data(), kk, spatial);
        damat.noalias() = wmat.transpose() * dymat;
        dx = Tensor(in_c, cached_in_h, cached_in_w);
        col2im(dcols, in_c, cached_in_h, cached_in_w, k, stride, pad, cached_out_h, cached_out_w, dx);
    }
};

/// GroupNorm with affine parameters; batch-independent, so training and
/// evaluation behave identically and per-image results never depend on
/// batch composition.
struct GroupNorm {
    int channels = 0, groups = 1;
    static constexpr float kEps = 1e-5f;
    Param gamma;
    Param beta;

    std::vector<float> xhat;    // cache
    std::vector<float> invstd;  // per group

    void configure(const std::string& name, int c) {
        channels = c;
        groups = 1;
        for (int g = std::min(8, c); g >= 1; --g) {
            if (c % g == 0) {
                groups = g;
                break;
            }
        }
        gamma.init(name + ".gamma", c, false);
        beta.init(name + ".beta", c, false);
        std::fill(gamma.w.begin(), gamma.w.end(), 1.f);
    }

    void forward(const Tensor& x, Tensor& y, bool train) {
        y = Tensor(x.c, x.h, x.w);
        const int cpg = channels / groups;
        const size_t gsize = static_cast<size_t>(cpg) * x.plane();
        if (train) {
            xhat.resize(x.size());
            invstd.resize(groups);
        }
        for (int g = 0; g < groups; ++g) {
            const float* xs = x.data() + g * gsize;
            double mean = 0;
            for (size_t i = 0; i < gsize; ++i) mean += xs[i];
            mean /= static_cast<double>(gsize);
            double var = 0;
            for (size_t i = 0; i < gsize; ++i) {
                const double d = xs[i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(gsize);
            const float inv = static_cast<float>(1.0 / std::sqrt(var + kEps));
            if (train) invstd[g] = inv;
            float* ys = y.data() + g * gsize;
            for (int cc = 0; cc < cpg; ++cc) {
                const int ci = g * cpg + cc;
                const float ga = gamma.w[ci], be = beta.w[ci];
                const float* xp = xs + static_cast<size_t>(cc) * x.plane();
                float* yp = ys + static_cast<size_t>(cc) * x.plane();
                float* hp = train ? xhat.data() + g * gsize + static_cast<size_t>(cc) * x.plane() : nullptr;
                for (int i = 0; i < x.plane(); ++i) {
                    const float h = (xp[i] - static_cast<float>(mean)) * inv;
                    if (hp) hp[i] = h;
                    yp[i] = ga * h + be;
                }
            }
        }
    }

    void backward(const Tensor& dy, Tensor& dx) {
        const int cpg = channels / groups;
        const int plane = dy.plane();
        const size_t gsize = static_cast<size_t>(cpg) * plane;
        dx = Tensor(dy.c, dy.h, dy.w);
        for (int g = 0; g < groups; ++g) {
            // accumulate per-group sums of dL/dxhat and dL/dxhat * xhat
            double sum_dh = 0, sum_dh_h = 0;
            for (int cc = 0; cc < cpg; ++cc) {
                const int ci = g * cpg + cc;
                const float* dyp = dy.data() + (static_cast<size_t>(ci)) * plane;
                const float* hp = xhat.data() + g * gsize + static_cast<size_t>(cc) * plane;
                double gsum = 0, ghsum = 0;
                for (int i = 0; i < plane; ++i) {
                    gsum += dyp[i];
                    ghsum += static_cast<double>(dyp[i]) * hp[i];
                }
                gamma.g[ci] += static_cast<float>(ghsum);
                beta.g[ci] += static_cast<float>(gsum);
                sum_dh += gamma.w[ci] * gsum;
                sum_dh_h += gamma.w[ci] * ghsum;
            }
            const double n = static_cast<double>(gsize);
            const float inv = invstd[g];
            for (int cc = 0; cc < cpg; ++cc) {
                const int ci = g * cpg + cc;
                const float* dyp = dy.data() + (static_cast<size_t>(ci)) * plane;
                const float* hp = xhat.data() + g * gsize + static_cast<size_t>(cc) * plane;
                float* dxp = dx.data() + (static_cast<size_t>(ci)) * plane;
                const float ga = gamma.w[ci];
                for (int i = 0; i < plane; ++i) {
                    const double dh = static_cast<double>(ga) * dyp[i];
                    dxp[i] = static_cast<float>(inv * (dh - sum_dh / n - hp[i] * sum_dh_h / n));
                }
            }
        }
    }
};

struct SiLU {
    std::vector<float> sig;  // cache of sigmoid(x)

    void forward(const Tensor& x, Tensor& y, bool train) {
        y = Tensor(x.c, x.h, x.w);
        if (train) sig.resize(x.size());
        for (size_t i = 0; i < x.size(); ++i) {
            const float s = 1.f / (1.f + std::exp(-x.v[i]));
            if (train) sig[i] = s;
            y.v[i] = x.v[i] * s;
        }
    }

    void backward(const Tensor& dy, const Tensor& x, Tensor& dx) {
        dx = Tensor(x.c, x.h, x.w);
        for (size_t i = 0; i < x.size(); ++i) {
            const float s = sig[i];
            dx.v[i] = dy.v[i] * s * (1.f + x.v[i] * (1.f - s));
        }
    }
};

inline void upsample2x(const Tensor& x, Tensor& y) {
    y = Tensor(x.c, x.h * 2, x.w * 2);
    for (int c = 0; c < x.c; ++c)
        for (int yy = 0; yy < y.h; ++yy) {
            const float* src = x.data() + (static_cast<size_t>(c) * x.h + yy / 2) * x.w;
            float* dst = y.data() + (static_cast<size_t>(c) * y.h + yy) * y.w;
            for (int xx = 0; xx < y.w; ++xx) dst[xx] = src[xx / 2];
        }
}

inline void upsample2x_backward(const Tensor& dy, int in_h, int in_w, Tensor& dx) {
    dx = Tensor(dy.c, in_h, in_w);
    for (int c = 0; c < dy.c; ++c)
        for (int yy = 0; yy < dy.h; ++yy) {
            const float* src = dy.data() + (static_cast<size_t>(c) * dy.h + yy) * dy.w;
            float* dst = dx.data() + (static_cast<size_t>(c) * in_h + yy / 2) * in_w;
            for (int xx = 0; xx < dy.w; ++xx) dst[xx / 2] += src[xx];
        }
}

inline void concat_channels(const Tensor& a, const Tensor& b, Tensor& y) {
    if (a.h != b.h || a.w != b.w) throw ShapeError("concat: spatial mismatch");
    y = Tensor(a.c + b.c, a.h, a.w);
    std::memcpy(y.data(), a.data(), a.size() * sizeof(float));
    std::memcpy(y.data() + a.size(), b.data(), b.size() * sizeof(float));
}

inline void split_channels(const Tensor& dy, int ca, Tensor& da, Tensor& db) {
    da = Tensor(ca, dy.h, dy.w);
    db = Tensor(dy.c - ca, dy.h, dy.w);
    std::memcpy(da.data(), dy.data(), da.size() * sizeof(float));
    std::memcpy(db.data(), dy.data() + da.size(), db.size() * sizeof(float));
}

}  // namespace mhpe::nn
