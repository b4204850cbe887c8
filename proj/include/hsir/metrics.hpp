#pragma once

#include <string>
#include <vector>

#include "hsir/tensor.hpp"

namespace hsir {

struct MetricsReport {
    double mpsnr = 0.0;  // dB, mean over bands, capped at 100
    double mssim = 0.0;  // mean per-band SSIM
    double sam = 0.0;    // mean per-pixel spectral angle, degrees
    std::vector<double> per_band_psnr;
    std::vector<double> per_band_ssim;
};

/// Per-band PSNR with peak 1.0; identical bands report the 100 dB cap.
double mpsnr(const Tensor& ref, const Tensor& test, std::vector<double>* per_band = nullptr);

/// Per-band SSIM: 11x11 Gaussian window (std 1.5), K1=0.01, K2=0.03,
/// dynamic range 1.0, mean over the valid window positions.
double mssim(const Tensor& ref, const Tensor& test, std::vector<double>* per_band = nullptr);

/// Mean spectral angle in degrees over pixels; near-zero spectra (norm
/// below 1e-12) contribute 0.
double sam_degrees(const Tensor& ref, const Tensor& test);

MetricsReport evaluate_metrics(const Tensor& ref, const Tensor& test);

std::string report_text(const MetricsReport& r);  // key=value lines
std::string report_row(const MetricsReport& r);   // single tab-separated row

}  // namespace hsir
