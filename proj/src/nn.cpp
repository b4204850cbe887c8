#include "hsir/nn.hpp"

namespace hsir {

Conv2d make_conv(ParamRegistry& reg, const std::string& prefix, int cin, int cout, int k,
                 int stride, int pad, ops::Pad mode, int groups, Rng& rng) {
    if (cin < 1 || cout < 1 || k < 1) throw ConfigError("conv: dims must be >= 1 at " + prefix);
    if (cin % groups != 0 || cout % groups != 0)
        throw ConfigError("conv: groups must divide channels at " + prefix);
    Conv2d c;
    int fan_in = (cin / groups) * k * k;
    c.weight = reg.add(prefix + ".weight", uniform_fan_in({cout, cin / groups, k, k}, fan_in, rng));
    c.bias = reg.add(prefix + ".bias", Tensor({cout}));
    c.stride = stride;
    c.pad = pad;
    c.groups = groups;
    c.pad_mode = mode;
    return c;
}

LayerNorm make_layer_norm(ParamRegistry& reg, const std::string& prefix, int c) {
    LayerNorm ln;
    ln.gain = reg.add(prefix + ".gain", Tensor::full({c}, 1.0));
    ln.bias = reg.add(prefix + ".bias", Tensor({c}));
    return ln;
}

}  // namespace hsir
