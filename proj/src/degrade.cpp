#include "hsir/degrade.hpp"

#include <algorithm>
#include <cmath>

namespace hsir {

Tensor add_gaussian_noise(const Tensor& x, double sigma_8bit, uint64_t seed, bool clip) {
    if (sigma_8bit < 0) throw ConfigError("noise: sigma must be >= 0");
    Tensor y = x;
    if (sigma_8bit == 0.0) return y;
    Rng rng(seed);
    double s = sigma_8bit / 255.0;
    for (int64_t i = 0; i < y.numel(); ++i) y[i] += s * rng.normal();
    if (clip)
        for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::clamp(y[i], 0.0, 1.0);
    return y;
}

double draw_blind_sigma(double lo, double hi, uint64_t seed) {
    if (lo < 0 || hi < lo) throw ConfigError("noise: invalid blind sigma range");
    Rng rng(derive_seed(seed, 0x5157));
    return rng.uniform(lo, hi);
}

std::pair<Tensor, CorruptionMask> apply_stripes(const Tensor& x, const StripeParams& sp,
                                                uint64_t seed) {
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Rng rng(seed);
    CorruptionMask cm;
    cm.mask = Tensor::full({c, h, w}, 1.0);
    int span_max = sp.band_span_max > 0 ? sp.band_span_max : std::max(1, c / 4);
    int run_len = (sp.orientation == StripeOrientation::Vertical) ? w : h;

    int n_groups = static_cast<int>(rng.uniform_int(sp.n_groups_min, sp.n_groups_max));
    for (int g = 0; g < n_groups; ++g) {
        int start = static_cast<int>(rng.uniform_int(0, run_len - 1));
        int width = static_cast<int>(rng.uniform_int(sp.width_min, sp.width_max));
        int band0 = static_cast<int>(rng.uniform_int(0, c - 1));
        int span = static_cast<int>(rng.uniform_int(sp.band_span_min, span_max));
        int end = std::min(run_len, start + std::max(1, width));   // clamp, never wrap
        int band1 = std::min(c, band0 + std::max(1, span));
        for (int b = band0; b < band1; ++b) {
            if (sp.orientation == StripeOrientation::Vertical) {
                for (int y = 0; y < h; ++y)
                    for (int col = start; col < end; ++col) cm.mask.at(b, y, col) = 0.0;
            } else {
                for (int row = start; row < end; ++row)
                    for (int col = 0; col < w; ++col) cm.mask.at(b, row, col) = 0.0;
            }
        }
    }

    int n_missing = static_cast<int>(rng.uniform_int(sp.n_missing_min, sp.n_missing_max));
    for (int i = 0; i < n_missing; ++i) {
        int band0 = static_cast<int>(rng.uniform_int(0, c - 1));
        int len = static_cast<int>(rng.uniform_int(sp.missing_len_min, sp.missing_len_max));
        int band1 = std::min(c, band0 + std::max(1, len));
        for (int b = band0; b < band1; ++b)
            for (int y = 0; y < h; ++y)
                for (int col = 0; col < w; ++col) cm.mask.at(b, y, col) = 0.0;
    }

    Tensor corrupted = x;
    for (int64_t i = 0; i < corrupted.numel(); ++i) corrupted[i] *= cm.mask[i];
    return {std::move(corrupted), std::move(cm)};
}

Tensor downsample_cube(const Tensor& x, int scale) {
    if (scale < 1) throw ConfigError("downsample: scale must be >= 1");
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h % scale != 0 || w % scale != 0)
        throw ConfigError("downsample: " + x.shape_str() + " not divisible by scale " +
                          std::to_string(scale));
    int oh = h / scale, ow = w / scale;
    Tensor out({c, oh, ow});
    double inv = 1.0 / (static_cast<double>(scale) * scale);
    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double s = 0.0;
                for (int dy = 0; dy < scale; ++dy)
                    for (int dx = 0; dx < scale; ++dx)
                        s += x.at(ch, oy * scale + dy, ox * scale + dx);
                out.at(ch, oy, ox) = s * inv;
            }
    return out;
}

namespace {
// Keys cubic kernel, a = -0.5.
double keys(double t) {
    t = std::abs(t);
    const double a = -0.5;
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return a * (((t - 5.0) * t + 8.0) * t - 4.0);
    return 0.0;
}

// One separable pass along the last axis of a (rows, n) view.
void bicubic_pass(const double* src, double* dst, int rows, int n, int f) {
    int on = n * f;
    // phase weights repeat with period f
    std::vector<double> wts(static_cast<size_t>(f) * 4);
    std::vector<int> base(static_cast<size_t>(f));
    for (int ph = 0; ph < f; ++ph) {
        double sx = (ph + 0.5) / f - 0.5;
        int b = static_cast<int>(std::floor(sx));
        base[static_cast<size_t>(ph)] = b;
        for (int j = 0; j < 4; ++j)
            wts[static_cast<size_t>(ph) * 4 + j] = keys(sx - (b - 1 + j));
    }
    for (int r = 0; r < rows; ++r) {
        const double* s = src + static_cast<int64_t>(r) * n;
        double* d = dst + static_cast<int64_t>(r) * on;
        for (int o = 0; o < on; ++o) {
            int cell = o / f, ph = o % f;
            int b = cell + base[static_cast<size_t>(ph)];
            double acc = 0.0;
            for (int j = 0; j < 4; ++j) {
                int idx = std::clamp(b - 1 + j, 0, n - 1);
                acc += wts[static_cast<size_t>(ph) * 4 + j] * s[idx];
            }
            d[o] = acc;
        }
    }
}
}  // namespace

Tensor bicubic_upsample(const Tensor& x, int scale) {
    if (scale < 1) throw ConfigError("bicubic: scale must be >= 1");
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    // horizontal, then vertical (per band)
    Tensor mid({c, h, w * scale});
    for (int ch = 0; ch < c; ++ch)
        bicubic_pass(x.data() + static_cast<int64_t>(ch) * h * w,
                     mid.data() + static_cast<int64_t>(ch) * h * w * scale, h, w, scale);
    Tensor out({c, h * scale, w * scale});
    // vertical pass: operate on transposed views
    std::vector<double> col_in(static_cast<size_t>(h));
    std::vector<double> col_out(static_cast<size_t>(h) * scale);
    int ow = w * scale;
    for (int ch = 0; ch < c; ++ch)
        for (int xx = 0; xx < ow; ++xx) {
            for (int y = 0; y < h; ++y) col_in[static_cast<size_t>(y)] = mid.at(ch, y, xx);
            bicubic_pass(col_in.data(), col_out.data(), 1, h, scale);
            for (int y = 0; y < h * scale; ++y) out.at(ch, y, xx) = col_out[static_cast<size_t>(y)];
        }
    return out;
}

DegradedSample apply_degradation(const Tensor& clean, const DegradationSpec& spec) {
    DegradedSample out;
    switch (spec.kind) {
        case DegradationKind::Noise: {
            double sigma = spec.blind ? draw_blind_sigma(spec.blind_min, spec.blind_max, spec.seed)
                                      : spec.sigma_8bit;
            out.realized_sigma = sigma;
            out.degraded = add_gaussian_noise(clean, sigma, spec.seed, spec.clip);
            break;
        }
        case DegradationKind::Stripes: {
            auto [corrupted, mask] = apply_stripes(clean, spec.stripes, spec.seed);
            out.degraded = std::move(corrupted);
            out.mask = std::move(mask.mask);
            out.has_mask = true;
            break;
        }
        case DegradationKind::Downsample: {
            out.degraded = bicubic_upsample(downsample_cube(clean, spec.scale), spec.scale);
            break;
        }
    }
    return out;
}

}  // namespace hsir
