// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstring>
#include <vector>

#include "mhpe/common.hpp"

namespace mhpe::nn {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatF = Eigen::Map<MatF>;
using MapConstMatF = Eigen::Map<const MatF>;

/// CHW float tensor for a single image/feature map.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, 0.f) {}

    size_t size() const { return v.size(); }
    int plane() const { return h * w; }
    float* data() { return v.data(); }
    const float* data() const { return v.data(); }

    float& at(int ci, int yi, int xi) { return v[(static_cast<size_t>(ci) * h + yi) * w + xi]; }
    float at(int ci, int yi, int xi) const { return v[(static_cast<size_t>(ci) * h + yi) * w + xi]; }

    void zero() { std::fill(v.begin(), v.end(), 0.f); }

    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }
};

/// Unfold x into a (c*k*k) x (out_h*out_w) matrix for GEMM convolution.
inline void im2col(const Tensor& x, int k, int stride, int pad, int out_h, int out_w,
                   std::vector<float>& cols) {
    const size_t rows = static_cast<size_t>(x.c) * k * k;
    cols.assign(rows * out_h * out_w, 0.f);
    const int spatial = out_h * out_w;
    for (int ci = 0; ci < x.c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                float* dst = cols.data() + ((static_cast<size_t>(ci) * k + ky) * k + kx) * spatial;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= x.h) {
                        dst += out_w;
                        continue;
                    }
                    const float* src_row = x.data() + (static_cast<size_t>(ci) * x.h + iy) * x.w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        *dst++ = (ix >= 0 && ix < x.w) ? src_row[ix] : 0.f;
                    }
                }
            }
        }
    }
}

/// Scatter-add the column matrix back onto the input gradient.
inline void col2im(const std::vector<float>& cols, int c, int in_h, int in_w, int k, int stride,
                   int pad, int out_h, int out_w, Tensor& dx) {
    const int spatial = out_h * out_w;
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const float* src = cols.data() + ((static_cast<size_t>(ci) * k + ky) * k + kx) * spatial;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= in_h) {
                        src += out_w;
                        continue;
                    }
                    float* dst_row = dx.data() + (static_cast<size_t>(ci) * in_h + iy) * in_w;
                    for (int ox = 0; ox < out_w; ++ox, ++src) {
                        const int ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < in_w) dst_row[ix] += *src;
                    }
                }
            }
        }
    }
}

}  // namespace mhpe::nn
