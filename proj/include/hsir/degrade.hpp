#pragma once

#include <cstdint>
#include <utility>

#include "hsir/rng.hpp"
#include "hsir/tensor.hpp"

namespace hsir {

enum class DegradationKind { Noise, Stripes, Downsample };
enum class StripeOrientation { Vertical, Horizontal };

struct StripeParams {
    int n_groups_min = 3, n_groups_max = 10;
    int width_min = 1, width_max = 10;           // pixels
    int band_span_min = 1, band_span_max = 0;    // 0 = C/4 at apply time
    int n_missing_min = 1, n_missing_max = 5;    // fully-missing band ranges
    int missing_len_min = 1, missing_len_max = 10;
    StripeOrientation orientation = StripeOrientation::Vertical;
};

/// Seed-determined corruption recipe. The seed fully determines the
/// realized damage.
struct DegradationSpec {
    DegradationKind kind = DegradationKind::Noise;
    double sigma_8bit = 30.0;  // 8-bit units applied to [0,1] data (sigma/255)
    bool blind = false;
    double blind_min = 30.0, blind_max = 70.0;
    bool clip = false;  // clamp noisy output to [0,1] (visual emission only)
    StripeParams stripes;
    int scale = 4;  // 4 or 8
    uint64_t seed = 0;
};

struct CorruptionMask {
    Tensor mask;  // (C,H,W), 1 = observed, 0 = missing
};

/// y = x + n with n ~ N(0, (sigma/255)^2) i.i.d.; output is NOT clipped
/// unless asked, so the analytic MSE expectation stays exact.
Tensor add_gaussian_noise(const Tensor& x, double sigma_8bit, uint64_t seed, bool clip = false);

/// Blind-mode sigma draw, uniform over [lo, hi], one per cube.
double draw_blind_sigma(double lo, double hi, uint64_t seed);

/// Zeroes random column runs over contiguous band ranges plus whole missing
/// band ranges. Out-of-range draws are clamped, never wrapped.
std::pair<Tensor, CorruptionMask> apply_stripes(const Tensor& x, const StripeParams& sp,
                                                uint64_t seed);

/// Per-band f x f block averaging; H and W must be divisible by f.
Tensor downsample_cube(const Tensor& x, int scale);

/// Separable bicubic interpolation (kernel parameter a = -0.5, half-pixel
/// alignment, clamped borders).
Tensor bicubic_upsample(const Tensor& x, int scale);

/// What the model consumes for each task: noisy cube, striped cube (+mask),
/// or the bicubically pre-upsampled low-resolution cube.
struct DegradedSample {
    Tensor degraded;
    Tensor mask;
    bool has_mask = false;
    double realized_sigma = 0.0;
};
DegradedSample apply_degradation(const Tensor& clean, const DegradationSpec& spec);

}  // namespace hsir
