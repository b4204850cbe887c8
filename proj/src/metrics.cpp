#include "hsir/metrics.hpp"

#include <cmath>
#include <cstdio>

namespace hsir {

namespace {
constexpr double kPsnrCap = 100.0;
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
}  // namespace

double mpsnr(const Tensor& ref, const Tensor& test, std::vector<double>* per_band) {
    require_same_shape(ref, test, "mpsnr");
    int c = ref.dim(0);
    int64_t plane = static_cast<int64_t>(ref.dim(1)) * ref.dim(2);
    if (per_band) per_band->clear();
    double sum = 0.0;
    for (int b = 0; b < c; ++b) {
        double mse = 0.0;
        const double* r = ref.data() + b * plane;
        const double* t = test.data() + b * plane;
        for (int64_t i = 0; i < plane; ++i) {
            double d = r[i] - t[i];
            mse += d * d;
        }
        mse /= static_cast<double>(plane);
        double psnr = (mse == 0.0) ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
        if (per_band) per_band->push_back(psnr);
        sum += psnr;
    }
    return sum / c;
}

namespace {
std::vector<double> gaussian_kernel() {
    std::vector<double> k(kSsimWindow);
    int half = kSsimWindow / 2;
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        double d = i - half;
        k[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += k[static_cast<size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable valid-region filter: (H,W) -> (H-10, W-10).
void filter_valid(const double* src, int h, int w, const std::vector<double>& k, double* dst) {
    int vw = w - kSsimWindow + 1, vh = h - kSsimWindow + 1;
    std::vector<double> tmp(static_cast<size_t>(h) * vw);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < vw; ++x) {
            double s = 0.0;
            for (int j = 0; j < kSsimWindow; ++j) s += k[static_cast<size_t>(j)] * src[y * w + x + j];
            tmp[static_cast<size_t>(y) * vw + x] = s;
        }
    for (int y = 0; y < vh; ++y)
        for (int x = 0; x < vw; ++x) {
            double s = 0.0;
            for (int j = 0; j < kSsimWindow; ++j)
                s += k[static_cast<size_t>(j)] * tmp[static_cast<size_t>(y + j) * vw + x];
            dst[y * vw + x] = s;
        }
}

double ssim_band(const double* x, const double* y, int h, int w) {
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // K1,K2 with L=1
    static const std::vector<double> kern = gaussian_kernel();
    int vh = h - kSsimWindow + 1, vw = w - kSsimWindow + 1;
    int64_t n = static_cast<int64_t>(h) * w, vn = static_cast<int64_t>(vh) * vw;
    std::vector<double> xx(n), yy(n), xy(n);
    for (int64_t i = 0; i < n; ++i) {
        xx[static_cast<size_t>(i)] = x[i] * x[i];
        yy[static_cast<size_t>(i)] = y[i] * y[i];
        xy[static_cast<size_t>(i)] = x[i] * y[i];
    }
    std::vector<double> mx(vn), my(vn), mxx(vn), myy(vn), mxy(vn);
    filter_valid(x, h, w, kern, mx.data());
    filter_valid(y, h, w, kern, my.data());
    filter_valid(xx.data(), h, w, kern, mxx.data());
    filter_valid(yy.data(), h, w, kern, myy.data());
    filter_valid(xy.data(), h, w, kern, mxy.data());
    double acc = 0.0;
    for (int64_t i = 0; i < vn; ++i) {
        double mux = mx[static_cast<size_t>(i)], muy = my[static_cast<size_t>(i)];
        double vx = mxx[static_cast<size_t>(i)] - mux * mux;
        double vy = myy[static_cast<size_t>(i)] - muy * muy;
        double cxy = mxy[static_cast<size_t>(i)] - mux * muy;
        acc += ((2 * mux * muy + c1) * (2 * cxy + c2)) /
               ((mux * mux + muy * muy + c1) * (vx + vy + c2));
    }
    return acc / static_cast<double>(vn);
}
}  // namespace

double mssim(const Tensor& ref, const Tensor& test, std::vector<double>* per_band) {
    require_same_shape(ref, test, "mssim");
    int c = ref.dim(0), h = ref.dim(1), w = ref.dim(2);
    if (h < kSsimWindow || w < kSsimWindow)
        throw ConfigError("mssim: image " + ref.shape_str() + " smaller than the 11x11 window");
    if (per_band) per_band->clear();
    int64_t plane = static_cast<int64_t>(h) * w;
    double sum = 0.0;
    for (int b = 0; b < c; ++b) {
        double v = ssim_band(ref.data() + b * plane, test.data() + b * plane, h, w);
        if (per_band) per_band->push_back(v);
        sum += v;
    }
    return sum / c;
}

double sam_degrees(const Tensor& ref, const Tensor& test) {
    require_same_shape(ref, test, "sam");
    int c = ref.dim(0), h = ref.dim(1), w = ref.dim(2);
    int64_t plane = static_cast<int64_t>(h) * w;
    std::vector<double> u(static_cast<size_t>(c)), v(static_cast<size_t>(c));
    double acc = 0.0;
    for (int64_t p = 0; p < plane; ++p) {
        double nr = 0.0, nt = 0.0;
        for (int b = 0; b < c; ++b) {
            double rv = ref.data()[b * plane + p];
            double tv = test.data()[b * plane + p];
            nr += rv * rv;
            nt += tv * tv;
        }
        nr = std::sqrt(nr);
        nt = std::sqrt(nt);
        if (nr < 1e-12 || nt < 1e-12) continue;  // zero-spectrum pixels contribute 0
        // Half-angle form of arccos(<r,t>/(|r||t|)): the cosine never needs
        // clamping and collinear spectra give an exact zero.
        double dm = 0.0, dp = 0.0;
        for (int b = 0; b < c; ++b) {
            u[static_cast<size_t>(b)] = ref.data()[b * plane + p] / nr;
            v[static_cast<size_t>(b)] = test.data()[b * plane + p] / nt;
            double a = u[static_cast<size_t>(b)] - v[static_cast<size_t>(b)];
            double s = u[static_cast<size_t>(b)] + v[static_cast<size_t>(b)];
            dm += a * a;
            dp += s * s;
        }
        acc += 2.0 * std::atan2(std::sqrt(dm), std::sqrt(dp));
    }
    return acc / static_cast<double>(plane) * (180.0 / 3.14159265358979323846);
}

MetricsReport evaluate_metrics(const Tensor& ref, const Tensor& test) {
    MetricsReport r;
    r.mpsnr = mpsnr(ref, test, &r.per_band_psnr);
    r.mssim = mssim(ref, test, &r.per_band_ssim);
    r.sam = sam_degrees(ref, test);
    return r;
}

std::string report_text(const MetricsReport& r) {
    char buf[128];
    std::string s;
    std::snprintf(buf, sizeof buf, "mpsnr=%.6f\n", r.mpsnr);
    s += buf;
    std::snprintf(buf, sizeof buf, "mssim=%.6f\n", r.mssim);
    s += buf;
    std::snprintf(buf, sizeof buf, "sam=%.6f\n", r.sam);
    s += buf;
    for (size_t i = 0; i < r.per_band_psnr.size(); ++i) {
        std::snprintf(buf, sizeof buf, "band%zu.psnr=%.6f\n", i, r.per_band_psnr[i]);
        s += buf;
        std::snprintf(buf, sizeof buf, "band%zu.ssim=%.6f\n", i, r.per_band_ssim[i]);
        s += buf;
    }
    return s;
}

std::string report_row(const MetricsReport& r) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.6f\t%.6f\t%.6f", r.mpsnr, r.mssim, r.sam);
    return buf;
}

}  // namespace hsir
