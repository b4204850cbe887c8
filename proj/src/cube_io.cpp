#include "hsir/cube_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hsir/rng.hpp"
#include "json.hpp"

namespace hsir {

using nlohmann::json;

void write_cube(const std::string& path, const Tensor& cube) {
    if (cube.rank() != 3) throw ConfigError("write_cube: rank-3 cube required");
    int c = cube.dim(0), h = cube.dim(1), w = cube.dim(2);
    double lo = cube.numel() ? cube[0] : 0.0, hi = lo;
    std::vector<float> payload(static_cast<size_t>(cube.numel()));
    for (int64_t i = 0; i < cube.numel(); ++i) {
        payload[static_cast<size_t>(i)] = static_cast<float>(cube[i]);
        lo = std::min(lo, cube[i]);
        hi = std::max(hi, cube[i]);
    }
    json header;
    header["format_version"] = 1;
    header["channels"] = c;
    header["height"] = h;
    header["width"] = w;
    header["dtype"] = "f32";
    header["layout"] = "band-sequential";
    header["value_range"] = {lo, hi};

    std::ofstream pf(path, std::ios::binary);
    if (!pf) throw DataError("cannot write cube payload '" + path + "'");
    pf.write(reinterpret_cast<const char*>(payload.data()),
             static_cast<std::streamsize>(payload.size() * 4));
    if (!pf) throw DataError("write failure on '" + path + "'");
    std::ofstream hf(path + ".json", std::ios::binary);
    if (!hf) throw DataError("cannot write cube header '" + path + ".json'");
    hf << header.dump(2) << "\n";
}

Tensor read_cube(const std::string& path) {
    std::ifstream hf(path + ".json", std::ios::binary);
    if (!hf) throw DataError("missing cube header '" + path + ".json'");
    json header;
    try {
        hf >> header;
    } catch (const json::exception& e) {
        throw DataError(std::string("bad cube header: ") + e.what());
    }
    int version = header.value("format_version", -1);
    if (version != 1)
        throw DataError("unknown cube format_version " + std::to_string(version) + " in '" + path +
                        ".json'");
    if (header.value("dtype", "") != "f32")
        throw DataError("unsupported cube dtype '" + header.value("dtype", "") + "'");
    if (header.value("layout", "") != "band-sequential")
        throw DataError("unsupported cube layout '" + header.value("layout", "") + "'");
    int c = header.value("channels", 0), h = header.value("height", 0), w = header.value("width", 0);
    if (c < 1 || h < 1 || w < 1) throw DataError("cube header has invalid shape");

    std::ifstream pf(path, std::ios::binary | std::ios::ate);
    if (!pf) throw DataError("missing cube payload '" + path + "'");
    int64_t bytes = static_cast<int64_t>(pf.tellg());
    int64_t expected = static_cast<int64_t>(c) * h * w;
    if (bytes != expected * 4)
        throw DataError("cube payload '" + path + "' holds " + std::to_string(bytes / 4) +
                        " floats, expected " + std::to_string(expected));
    pf.seekg(0);
    std::vector<float> payload(static_cast<size_t>(expected));
    pf.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(expected * 4));
    if (!pf) throw DataError("read failure on '" + path + "'");
    Tensor cube({c, h, w});
    for (int64_t i = 0; i < expected; ++i) cube[i] = static_cast<double>(payload[static_cast<size_t>(i)]);
    return cube;
}

namespace {

// Separable Gaussian blur with reflected borders; sigma <= 0 is a no-op.
void gaussian_blur_2d(std::vector<double>& img, int h, int w, double sigma) {
    if (sigma <= 0) return;
    int radius = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
    std::vector<double> k(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[static_cast<size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[static_cast<size_t>(i + radius)];
    }
    for (double& v : k) v /= sum;
    auto reflect = [](int i, int n) {
        if (n == 1) return 0;
        int period = 2 * (n - 1);
        int j = i % period;
        if (j < 0) j += period;
        return j < n ? j : period - j;
    };
    std::vector<double> tmp(img.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i)
                s += k[static_cast<size_t>(i + radius)] * img[static_cast<size_t>(y) * w + reflect(x + i, w)];
            tmp[static_cast<size_t>(y) * w + x] = s;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i)
                s += k[static_cast<size_t>(i + radius)] * tmp[static_cast<size_t>(reflect(y + i, h)) * w + x];
            img[static_cast<size_t>(y) * w + x] = s;
        }
}

void gaussian_blur_1d(std::vector<double>& v, double sigma) {
    if (sigma <= 0) return;
    int n = static_cast<int>(v.size());
    int radius = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
    std::vector<double> k(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[static_cast<size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[static_cast<size_t>(i + radius)];
    }
    for (double& x : k) x /= sum;
    auto reflect = [n](int i) {
        if (n == 1) return 0;
        int period = 2 * (n - 1);
        int j = i % period;
        if (j < 0) j += period;
        return j < n ? j : period - j;
    };
    std::vector<double> out(v.size());
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int d = -radius; d <= radius; ++d) s += k[static_cast<size_t>(d + radius)] * v[static_cast<size_t>(reflect(i + d))];
        out[static_cast<size_t>(i)] = s;
    }
    v = std::move(out);
}

}  // namespace

Tensor synth_scene(const SyntheticSceneSpec& spec) {
    if (spec.size < 1 || spec.bands < 1 || spec.mixture_order < 1)
        throw ConfigError("synth_scene: size, bands and mixture_order must be >= 1");
    int n = spec.size, c = spec.bands, k = spec.mixture_order;
    Rng rng(spec.seed);

    // Smooth abundance fields on the pixel simplex.
    std::vector<std::vector<double>> fields(static_cast<size_t>(k));
    for (auto& f : fields) {
        f.resize(static_cast<size_t>(n) * n);
        for (double& v : f) v = rng.normal();
        gaussian_blur_2d(f, n, n, spec.spatial_smoothness);
        // normalize field scale so the softmax keeps contrast after blurring
        double mean = 0.0, var = 0.0;
        for (double v : f) mean += v;
        mean /= static_cast<double>(f.size());
        for (double v : f) var += (v - mean) * (v - mean);
        var /= static_cast<double>(f.size());
        double inv = var > 0 ? 1.0 / std::sqrt(var) : 1.0;
        for (double& v : f) v = (v - mean) * inv * 3.0;
    }

    // Smooth positive spectral signatures in [0.2, 1].
    std::vector<std::vector<double>> spectra(static_cast<size_t>(k));
    for (auto& s : spectra) {
        s.resize(static_cast<size_t>(c));
        for (double& v : s) v = rng.uniform();
        gaussian_blur_1d(s, spec.spectral_smoothness);
        double lo = *std::min_element(s.begin(), s.end());
        double hi = *std::max_element(s.begin(), s.end());
        double span = hi - lo;
        for (double& v : s) v = span > 1e-12 ? 0.2 + 0.8 * (v - lo) / span : 0.6;
    }

    Tensor cube({c, n, n});
    double maxv = 0.0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            // softmax over mixture components
            double mx = fields[0][static_cast<size_t>(y) * n + x];
            for (int i = 1; i < k; ++i) mx = std::max(mx, fields[static_cast<size_t>(i)][static_cast<size_t>(y) * n + x]);
            double denom = 0.0;
            std::vector<double> a(static_cast<size_t>(k));
            for (int i = 0; i < k; ++i) {
                a[static_cast<size_t>(i)] = std::exp(fields[static_cast<size_t>(i)][static_cast<size_t>(y) * n + x] - mx);
                denom += a[static_cast<size_t>(i)];
            }
            for (int b = 0; b < c; ++b) {
                double v = 0.0;
                for (int i = 0; i < k; ++i) v += (a[static_cast<size_t>(i)] / denom) * spectra[static_cast<size_t>(i)][static_cast<size_t>(b)];
                cube.at(b, y, x) = v;
                maxv = std::max(maxv, v);
            }
        }
    if (maxv > 0)
        for (int64_t i = 0; i < cube.numel(); ++i) cube[i] /= maxv;
    return cube;
}

void write_preview_ppm(const std::string& path, const Tensor& cube, int band_r, int band_g,
                       int band_b) {
    int c = cube.dim(0), h = cube.dim(1), w = cube.dim(2);
    int bands[3] = {band_r, band_g, band_b};
    for (int b : bands)
        if (b < 0 || b >= c)
            throw ConfigError("preview: band " + std::to_string(b) + " out of range [0," +
                              std::to_string(c - 1) + "]");
    int64_t plane = static_cast<int64_t>(h) * w;
    double lo[3], hi[3];
    for (int i = 0; i < 3; ++i) {
        std::vector<double> vals(cube.data() + bands[i] * plane,
                                 cube.data() + (bands[i] + 1) * plane);
        std::sort(vals.begin(), vals.end());
        auto q = [&](double p) {
            double pos = p * (static_cast<double>(vals.size()) - 1);
            size_t i0 = static_cast<size_t>(pos);
            size_t i1 = std::min(vals.size() - 1, i0 + 1);
            double t = pos - static_cast<double>(i0);
            return vals[i0] * (1 - t) + vals[i1] * t;
        };
        lo[i] = q(0.02);
        hi[i] = q(0.98);
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write preview '" + path + "'");
    f << "P6\n" << w << " " << h << "\n255\n";
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int i = 0; i < 3; ++i) {
                double v = cube.at(bands[i], y, x);
                double t = (hi[i] - lo[i] > 1e-12) ? (v - lo[i]) / (hi[i] - lo[i])
                                                   : std::clamp(v, 0.0, 1.0);
                unsigned char byte = static_cast<unsigned char>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
                f.put(static_cast<char>(byte));
            }
    if (!f) throw DataError("write failure on preview '" + path + "'");
}

}  // namespace hsir
