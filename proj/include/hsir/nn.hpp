#pragma once

#include "hsir/autodiff.hpp"
#include "hsir/params.hpp"

namespace hsir {

struct Conv2d {
    Var weight;  // (Cout, Cin/groups, k, k)
    Var bias;    // (Cout)
    int stride = 1;
    int pad = 0;
    int groups = 1;
    ops::Pad pad_mode = ops::Pad::Zero;

    Var operator()(const Var& x) const {
        return conv2d(x, weight, bias, stride, pad, pad_mode, groups);
    }
    Tensor operator()(const Tensor& x) const {
        return ops::conv2d(x, weight.val(), &bias.val(), stride, pad, pad_mode, groups);
    }
    int in_width() const { return weight.val().dim(1) * groups; }
    int out_width() const { return weight.val().dim(0); }

    static int64_t param_count(int cin, int cout, int k, int groups) {
        return static_cast<int64_t>(cout) * (cin / groups) * k * k + cout;
    }
    static uint64_t mac_count(int cin, int cout, int k, int groups, int oh, int ow) {
        return static_cast<uint64_t>(cout) * (cin / groups) * k * k * oh * ow;
    }
};

Conv2d make_conv(ParamRegistry& reg, const std::string& prefix, int cin, int cout, int k,
                 int stride, int pad, ops::Pad mode, int groups, Rng& rng);

struct LayerNorm {
    Var gain, bias;  // (C)
    double eps = 1e-8;

    Var operator()(const Var& x) const { return layer_norm_chan(x, gain, bias, eps); }
    Tensor operator()(const Tensor& x) const {
        return ops::layer_norm_chan(x, gain.val(), bias.val(), eps, nullptr);
    }
    static int64_t param_count(int c) { return 2 * static_cast<int64_t>(c); }
};

LayerNorm make_layer_norm(ParamRegistry& reg, const std::string& prefix, int c);

}  // namespace hsir
