#include "hsir/attention.hpp"

#include <cmath>

namespace hsir {

SpectralAttentionParams make_spectral_attention_params(ParamRegistry& reg,
                                                       const std::string& prefix, int c, int heads,
                                                       Rng& rng) {
    if (c < 1) throw ConfigError("spectral attention: channel count must be >= 1");
    if (heads < 1 || c % heads != 0)
        throw ConfigError("spectral attention: heads must divide width " + std::to_string(c));
    SpectralAttentionParams p;
    p.w_q = reg.add(prefix + ".w_q", uniform_fan_in({c, c}, c, rng));
    p.w_k = reg.add(prefix + ".w_k", uniform_fan_in({c, c}, c, rng));
    p.w_v = reg.add(prefix + ".w_v", uniform_fan_in({c, c}, c, rng));
    p.sigma = reg.add(prefix + ".sigma", Tensor::scalar(1.0));
    p.heads = heads;
    return p;
}

WindowAttentionParams make_window_attention_params(ParamRegistry& reg, const std::string& prefix,
                                                   int c, int d_qk, int d_v, int m, int heads,
                                                   Rng& rng) {
    if (m < 1) throw ConfigError("window attention: window size must be >= 1");
    if (d_qk < 1 || d_v < 1) throw ConfigError("window attention: projection widths must be >= 1");
    if (heads < 1 || d_qk % heads != 0 || d_v % heads != 0)
        throw ConfigError("window attention: heads must divide d_qk and d_v");
    WindowAttentionParams p;
    p.w_q = reg.add(prefix + ".w_q", uniform_fan_in({c, d_qk}, c, rng));
    p.w_k = reg.add(prefix + ".w_k", uniform_fan_in({c, d_qk}, c, rng));
    p.w_v = reg.add(prefix + ".w_v", uniform_fan_in({c, d_v}, c, rng));
    int t = (2 * m - 1) * (2 * m - 1);
    p.bias_table = reg.add(prefix + ".bias_table", Tensor({t}));
    p.bias_index = std::make_shared<const std::vector<int>>(relative_position_bias_index(m));
    p.window_size = m;
    p.heads = heads;
    return p;
}

std::vector<int> relative_position_bias_index(int m) {
    if (m < 1) throw ConfigError("bias index: window size must be >= 1");
    int m2 = m * m, span = 2 * m - 1;
    std::vector<int> idx(static_cast<size_t>(m2) * m2);
    for (int a = 0; a < m2; ++a) {
        int ar = a / m, ac = a % m;
        for (int b = 0; b < m2; ++b) {
            int br = b / m, bc = b % m;
            int dr = ar - br + m - 1;
            int dc = ac - bc + m - 1;
            idx[static_cast<size_t>(a) * m2 + b] = dr * span + dc;
        }
    }
    return idx;
}

Tensor relative_position_bias(const Tensor& table, int m) {
    int span = 2 * m - 1;
    if (table.numel() != static_cast<int64_t>(span) * span)
        throw ConfigError("bias table: expected " + std::to_string(span * span) + " entries, got " +
                          std::to_string(table.numel()));
    std::vector<int> idx = relative_position_bias_index(m);
    int m2 = m * m;
    Tensor b({m2, m2});
    for (int64_t i = 0; i < b.numel(); ++i) b[i] = table[idx[static_cast<size_t>(i)]];
    return b;
}

Var relative_position_bias(const Var& table, const WindowAttentionParams& p) {
    int m2 = p.window_size * p.window_size;
    int span = 2 * p.window_size - 1;
    if (table.val().numel() != static_cast<int64_t>(span) * span)
        throw ConfigError("bias table: wrong length for window size " +
                          std::to_string(p.window_size));
    return gather(table, p.bias_index, {m2, m2});
}

std::pair<Tensor, WindowLayout> window_partition(const Tensor& x, int m) {
    if (m < 1) throw ConfigError("window_partition: window size must be >= 1");
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    WindowLayout layout;
    layout.window_size = m;
    layout.orig_h = h;
    layout.orig_w = w;
    layout.channels = c;
    int ph = (h % m == 0) ? h : (h / m + 1) * m;
    int pw = (w % m == 0) ? w : (w / m + 1) * m;
    layout.pad_h = ph - h;
    layout.pad_w = pw - w;
    layout.n_windows = (ph / m) * (pw / m);
    Tensor xp = (layout.pad_h || layout.pad_w) ? ops::reflect_pad_br(x, layout.pad_h, layout.pad_w)
                                               : x;
    return {ops::window_split(xp, m), layout};
}

Tensor window_merge(const Tensor& windows, const WindowLayout& layout) {
    int m = layout.window_size;
    int ph = layout.orig_h + layout.pad_h, pw = layout.orig_w + layout.pad_w;
    if (windows.dim(0) != layout.n_windows)
        throw ConfigError("window_merge: expected " + std::to_string(layout.n_windows) +
                          " windows, got " + std::to_string(windows.dim(0)));
    int c = windows.dim(2);
    Tensor merged = ops::window_unsplit(windows, c, ph, pw, m);
    if (!layout.pad_h && !layout.pad_w) return merged;
    return ops::crop_tl(merged, layout.orig_h, layout.orig_w);
}

Tensor spectral_self_attention(const Tensor& x, const SpectralAttentionParams& p) {
    if (!x.all_finite()) throw NumericError("spectral attention: input has non-finite values");
    Tensor out = ops::ssa_forward(x, p.w_q.val(), p.w_k.val(), p.w_v.val(), p.sigma.val()[0],
                                  p.heads, nullptr);
    if (!out.all_finite()) throw NumericError("spectral attention: non-finite output");
    return out;
}

Var spectral_self_attention(const Var& x, const SpectralAttentionParams& p) {
    return spectral_attention(x, p.w_q, p.w_k, p.w_v, p.sigma, p.heads);
}

Tensor window_self_attention(const Tensor& x, const WindowAttentionParams& p, int m) {
    if (m != p.window_size)
        throw ConfigError("window attention: bias index built for M=" +
                          std::to_string(p.window_size) + ", called with M=" + std::to_string(m));
    Tensor bias = relative_position_bias(p.bias_table.val(), m);
    return ops::wsa_forward(x, p.w_q.val(), p.w_k.val(), p.w_v.val(), bias, m, p.heads, nullptr);
}

Var window_self_attention(const Var& x, const WindowAttentionParams& p) {
    Var bias = relative_position_bias(p.bias_table, p);
    return window_attention(x, p.w_q, p.w_k, p.w_v, bias, p.window_size, p.heads);
}

Tensor spectral_attention_weights(const Tensor& x, const SpectralAttentionParams& p) {
    ops::SsaCache cache;
    ops::ssa_forward(x, p.w_q.val(), p.w_k.val(), p.w_v.val(), p.sigma.val()[0], p.heads, &cache);
    return cache.attn;  // (heads, C/heads, C/heads)
}

std::vector<Tensor> window_attention_weights(const Tensor& x, const WindowAttentionParams& p,
                                             int m) {
    Tensor bias = relative_position_bias(p.bias_table.val(), m);
    ops::WsaCache cache;
    ops::wsa_forward(x, p.w_q.val(), p.w_k.val(), p.w_v.val(), bias, m, p.heads, &cache);
    int n = cache.attn.dim(0), heads = cache.attn.dim(1), m2 = cache.attn.dim(2);
    std::vector<Tensor> mats;
    for (int wi = 0; wi < n; ++wi)
        for (int hd = 0; hd < heads; ++hd) {
            Tensor a({m2, m2});
            const double* src = cache.attn.data() + ((static_cast<int64_t>(wi) * heads + hd) * m2) * m2;
            std::copy(src, src + static_cast<int64_t>(m2) * m2, a.data());
            mats.push_back(std::move(a));
        }
    return mats;
}

uint64_t attention_mac_count(AttentionKind kind, int c, int h, int w, int m, int d_qk, int d_v) {
    if (c < 1 || h < 1 || w < 1) throw ConfigError("attention_mac_count: positive dims required");
    if (kind == AttentionKind::Spectral)
        return 2ull * static_cast<uint64_t>(h) * w * c * c;
    if (m < 1 || d_qk < 1 || d_v < 1)
        throw ConfigError("attention_mac_count: positive window params required");
    uint64_t n = static_cast<uint64_t>((h + m - 1) / m) * static_cast<uint64_t>((w + m - 1) / m);
    uint64_t m2 = static_cast<uint64_t>(m) * m;
    return n * (m2 * m2 * d_qk + m2 * m2 * d_v);
}

}  // namespace hsir
