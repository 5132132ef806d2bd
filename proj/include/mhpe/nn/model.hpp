// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <memory>
#include <vector>

#include "mhpe/nn/layers.hpp"

namespace mhpe::nn {

struct ConvBlock {
    Conv2d conv;
    GroupNorm gn;
    SiLU act;
    Tensor pre_act;  // GN output, cached for the SiLU backward

    void configure(const std::string& name, int in, int out, int k, int stride) {
        conv.configure(name + ".conv", in, out, k, stride, false);
        gn.configure(name + ".gn", out);
    }

    void init_weights(Rng& rng) { conv.init_weights(rng); }

    void forward(const Tensor& x, Tensor& y, bool train) {
        Tensor t;
        conv.forward(x, t, train);
        gn.forward(t, pre_act, train);
        act.forward(pre_act, y, train);
        if (!train) pre_act = Tensor();
    }

    void backward(const Tensor& dy, Tensor& dx) {
        Tensor d2, d1;
        act.backward(dy, pre_act, d2);
        gn.backward(d2, d1);
        conv.backward(d1, dx);
    }

    void collect(std::vector<Param*>& out) {
        out.push_back(&conv.weight);
        out.push_back(&gn.gamma);
        out.push_back(&gn.beta);
    }
};

/// Residual bottleneck: 1x1 reduce, 3x3 expand, skip connection.
struct Bottleneck {
    ConvBlock reduce, expand;

    void configure(const std::string& name, int c) {
        reduce.configure(name + ".reduce", c, c / 2, 1, 1);
        expand.configure(name + ".expand", c / 2, c, 3, 1);
    }

    void init_weights(Rng& rng) {
        reduce.init_weights(rng);
        expand.init_weights(rng);
    }

    void forward(const Tensor& x, Tensor& y, bool train) {
        Tensor mid, res;
        reduce.forward(x, mid, train);
        expand.forward(mid, res, train);
        y = Tensor(x.c, x.h, x.w);
        for (size_t i = 0; i < y.size(); ++i) y.v[i] = x.v[i] + res.v[i];
    }

    void backward(const Tensor& dy, Tensor& dx) {
        Tensor dmid;
        expand.backward(dy, dmid);
        reduce.backward(dmid, dx);
        for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += dy.v[i];
    }

    void collect(std::vector<Param*>& out) {
        reduce.collect(out);
        expand.collect(out);
    }
};

inline constexpr int kOutputChannels = 9;  // obj, box(4), class, pose(3)
inline constexpr std::array<int, 4> kStrides = {8, 16, 32, 64};

struct ModelConfig {
    std::array<int, 6> widths = {16, 32, 64, 96, 128, 160};
    int anchors_per_stride = 3;
    double objectness_bias = -5.0;
    double class_score_bias = 5.293305;  // sigmoid ~= 0.995; channel carries no loss
};

/// Dense raw predictions: one tensor per stride, laid out as
/// [C_a * C_o, H/s, W/s] with channel index a * C_o + c.
struct RawGrids {
    int input_h = 0, input_w = 0;
    int anchors_per_stride = 0;
    std::array<Tensor, 4> g;

    int grid_h(int si) const { return input_h / kStrides[si]; }
    int grid_w(int si) const { return input_w / kStrides[si]; }

    float raw(int si, int a, int ch, int y, int x) const {
        return g[si].at(a * kOutputChannels + ch, y, x);
    }
    float& raw(int si, int a, int ch, int y, int x) {
        return g[si].at(a * kOutputChannels + ch, y, x);
    }

    RawGrids zeros_like() const {
        RawGrids d;
        d.input_h = input_h;
        d.input_w = input_w;
        d.anchors_per_stride = anchors_per_stride;
        for (int i = 0; i < 4; ++i) d.g[i] = Tensor(g[i].c, g[i].h, g[i].w);
        return d;
    }
};

/// CSP-style pyramid: five stride-2 stages with residual bottlenecks, a
/// top-down feature pyramid, and four 1x1 prediction heads.
struct Model {
    ModelConfig cfg;
    ConvBlock stem, d1, d2, d3, d4, d5;
    Bottleneck b1, b2, b3, b4, b5;
    ConvBlock t5a, t5b, t4a, t4b, t3a, t3b;
    Conv2d h3, h4, h5, h6;

    // branch-point tensors kept for the backward pass
    Tensor p3, p4, p5, p6, n5, n4, n3;

    explicit Model(const ModelConfig& c = {}) : cfg(c) {
        const auto& w = cfg.widths;
        stem.configure("stem", 3, w[0], 3, 2);
        d1.configure("d1", w[0], w[1], 3, 2);
        b1.configure("b1", w[1]);
        d2.configure("d2", w[1], w[2], 3, 2);
        b2.configure("b2", w[2]);
        d3.configure("d3", w[2], w[3], 3, 2);
        b3.configure("b3", w[3]);
        d4.configure("d4", w[3], w[4], 3, 2);
        b4.configure("b4", w[4]);
        d5.configure("d5", w[4], w[5], 3, 2);
        b5.configure("b5", w[5]);
        t5a.configure("t5a", w[5] + w[4], w[4], 1, 1);
        t5b.configure("t5b", w[4], w[4], 3, 1);
        t4a.configure("t4a", w[4] + w[3], w[3], 1, 1);
        t4b.configure("t4b", w[3], w[3], 3, 1);
        t3a.configure("t3a", w[3] + w[2], w[2], 1, 1);
        t3b.configure("t3b", w[2], w[2], 3, 1);
        const int head_c = cfg.anchors_per_stride * kOutputChannels;
        h3.configure("h3", w[2], head_c, 1, 1, true);
        h4.configure("h4", w[3], head_c, 1, 1, true);
        h5.configure("h5", w[4], head_c, 1, 1, true);
        h6.configure("h6", w[5], head_c, 1, 1, true);
    }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        for (ConvBlock* cb : {&stem, &d1, &d2, &d3, &d4, &d5}) cb->collect(out);
        for (Bottleneck* bn : {&b1, &b2, &b3, &b4, &b5}) bn->collect(out);
        for (ConvBlock* cb : {&t5a, &t5b, &t4a, &t4b, &t3a, &t3b}) cb->collect(out);
        for (Conv2d* hc : {&h3, &h4, &h5, &h6}) {
            out.push_back(&hc->weight);
            out.push_back(&hc->bias);
        }
        return out;
    }

    size_t parameter_count() {
        size_t n = 0;
        for (const Param* p : params()) n += p->w.size();
        return n;
    }

    void init_weights(std::uint64_t seed) {
        Rng rng(seed);
        for (ConvBlock* cb : {&stem, &d1, &d2, &d3, &d4, &d5, &t5a, &t5b, &t4a, &t4b, &t3a, &t3b}) {
            cb->init_weights(rng);
        }
        for (Bottleneck* bn : {&b1, &b2, &b3, &b4, &b5}) bn->init_weights(rng);
        for (Conv2d* hc : {&h3, &h4, &h5, &h6}) {
            // detection-head convention: small weights, biased objectness
            for (auto& v : hc->weight.w) v = static_cast<float>(rng.normal(0.0, 0.01));
            for (int a = 0; a < cfg.anchors_per_stride; ++a) {
                hc->bias.w[a * kOutputChannels + 0] = static_cast<float>(cfg.objectness_bias);
                hc->bias.w[a * kOutputChannels + 5] = static_cast<float>(cfg.class_score_bias);
            }
        }
    }

    void zero_grad() {
        for (Param* p : params()) std::fill(p->g.begin(), p->g.end(), 0.f);
    }

    RawGrids forward(const Tensor& image, bool train) {
        if (image.c != 3 || image.h % 64 != 0 || image.w % 64 != 0 || image.h == 0 || image.w == 0) {
            throw ShapeError("model input must be 3xHxW with H, W multiples of 64");
        }
        Tensor t0, t1;
        stem.forward(image, t0, train);
        d1.forward(t0, t1, train);
        Tensor p2;
        b1.forward(t1, p2, train);
        d2.forward(p2, t0, train);
        b2.forward(t0, p3, train);
        d3.forward(p3, t0, train);
        b3.forward(t0, p4, train);
        d4.forward(p4, t0, train);
        b4.forward(t0, p5, train);
        d5.forward(p5, t0, train);
        b5.forward(t0, p6, train);

        Tensor u, cat, ta;
        upsample2x(p6, u);
        concat_channels(u, p5, cat);
        t5a.forward(cat, ta, train);
        t5b.forward(ta, n5, train);
        upsample2x(n5, u);
        concat_channels(u, p4, cat);
        t4a.forward(cat, ta, train);
        t4b.forward(ta, n4, train);
        upsample2x(n4, u);
        concat_channels(u, p3, cat);
        t3a.forward(cat, ta, train);
        t3b.forward(ta, n3, train);

        RawGrids out;
        out.input_h = image.h;
        out.input_w = image.w;
        out.anchors_per_stride = cfg.anchors_per_stride;
        h3.forward(n3, out.g[0], train);
        h4.forward(n4, out.g[1], train);
        h5.forward(n5, out.g[2], train);
        h6.forward(p6, out.g[3], train);
        return out;
    }

    /// Accumulates parameter gradients from grid gradients. Must follow a
    /// forward(..., train=true) call on the same input.
    void backward(const RawGrids& dgrids) {
        Tensor dn3, dn4, dn5, dp6, tmp, da, dcat, du, dskip;

        h3.backward(dgrids.g[0], dn3);
        t3b.backward(dn3, tmp);
        t3a.backward(tmp, dcat);
        Tensor dp3;
        split_channels(dcat, cfg.widths[3], du, dp3);
        upsample2x_backward(du, n4.h, n4.w, dn4);

        h4.backward(dgrids.g[1], tmp);
        for (size_t i = 0; i < dn4.size(); ++i) dn4.v[i] += tmp.v[i];
        t4b.backward(dn4, tmp);
        t4a.backward(tmp, dcat);
        Tensor dp4;
        split_channels(dcat, cfg.widths[4], du, dp4);
        upsample2x_backward(du, n5.h, n5.w, dn5);

        h5.backward(dgrids.g[2], tmp);
        for (size_t i = 0; i < dn5.size(); ++i) dn5.v[i] += tmp.v[i];
        t5b.backward(dn5, tmp);
        t5a.backward(tmp, dcat);
        Tensor dp5;
        split_channels(dcat, cfg.widths[5], du, dp5);
        upsample2x_backward(du, p6.h, p6.w, dp6);

        h6.backward(dgrids.g[3], tmp);
        for (size_t i = 0; i < dp6.size(); ++i) dp6.v[i] += tmp.v[i];

        b5.backward(dp6, tmp);
        Tensor dstage;
        d5.backward(tmp, dstage);
        for (size_t i = 0; i < dp5.size(); ++i) dp5.v[i] += dstage.v[i];
        b4.backward(dp5, tmp);
        d4.backward(tmp, dstage);
        for (size_t i = 0; i < dp4.size(); ++i) dp4.v[i] += dstage.v[i];
        b3.backward(dp4, tmp);
        d3.backward(tmp, dstage);
        for (size_t i = 0; i < dp3.size(); ++i) dp3.v[i] += dstage.v[i];
        b2.backward(dp3, tmp);
        d2.backward(tmp, dstage);
        b1.backward(dstage, tmp);
        d1.backward(tmp, dstage);
        Tensor dimage;
        stem.backward(dstage, dimage);
    }
};

}  // namespace mhpe::nn
