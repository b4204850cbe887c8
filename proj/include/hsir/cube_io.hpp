#pragma once

#include <cstdint>
#include <string>

#include "hsir/tensor.hpp"

namespace hsir {

/// Cube files are raw little-endian IEEE-754 32-bit floats in
/// band-sequential order (all of band 0, then band 1, ...), with a JSON
/// sidecar at <path>.json describing the shape:
///   {"format_version":1, "channels":C, "height":H, "width":W,
///    "dtype":"f32", "layout":"band-sequential", "value_range":[lo,hi]}
/// The voxel at (band, row, col) sits at float offset band*H*W + row*W + col.
void write_cube(const std::string& path, const Tensor& cube);
Tensor read_cube(const std::string& path);

/// Smooth low-rank scene: mixture_order nonnegative abundance fields
/// (softmax of blurred noise) times smooth positive spectra, rescaled so the
/// maximum is 1. Numerical rank is at most mixture_order.
struct SyntheticSceneSpec {
    uint64_t seed = 0;
    int size = 64;                    // H = W
    int bands = 8;                    // C
    int mixture_order = 3;
    double spatial_smoothness = 6.0;  // Gaussian blur sigma, pixels
    double spectral_smoothness = 2.0; // Gaussian blur sigma, band index
};
Tensor synth_scene(const SyntheticSceneSpec& spec);

/// 8-bit RGB preview from three bands with a per-band 2-98 percentile
/// stretch, written as binary PPM (P6).
void write_preview_ppm(const std::string& path, const Tensor& cube, int band_r, int band_g,
                       int band_b);

}  // namespace hsir
