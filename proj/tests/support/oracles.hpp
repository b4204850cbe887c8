#pragma once

// Independent brute-force oracles. Everything here is written as plain
// scalar loops against the documented contracts and never calls into the
// library kernels it is used to verify.

#include <cmath>
#include <cstdint>
#include <vector>

#include "hsir/tensor.hpp"

namespace oracle {

using hsir::Tensor;

inline int reflect101(int i, int n) {
    if (n == 1) return 0;
    int period = 2 * (n - 1);
    int j = i % period;
    if (j < 0) j += period;
    return j < n ? j : period - j;
}

// Dense spectral attention: X is the HW x C flattening, logits sigma*K^T Q,
// column softmax, output V * A reshaped back.
inline Tensor spectral_attention(const Tensor& x, const Tensor& wq, const Tensor& wk,
                                 const Tensor& wv, double sigma) {
    int c = x.dim(0), h = x.dim(1), w = x.dim(2), hw = h * w;
    std::vector<std::vector<double>> xm(hw, std::vector<double>(c));
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) xm[y * w + xx][ch] = x.at(ch, y, xx);
    auto project = [&](const Tensor& wmat) {
        std::vector<std::vector<double>> out(hw, std::vector<double>(c, 0.0));
        for (int p = 0; p < hw; ++p)
            for (int j = 0; j < c; ++j)
                for (int i = 0; i < c; ++i) out[p][j] += xm[p][i] * wmat.at2(i, j);
        return out;
    };
    auto q = project(wq), k = project(wk), v = project(wv);
    // logits(i,j) = sigma * sum_p K[p][i] * Q[p][j]
    std::vector<std::vector<double>> logits(c, std::vector<double>(c, 0.0));
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j) {
            double s = 0.0;
            for (int p = 0; p < hw; ++p) s += k[p][i] * q[p][j];
            logits[i][j] = sigma * s;
        }
    // column softmax
    std::vector<std::vector<double>> a(c, std::vector<double>(c));
    for (int j = 0; j < c; ++j) {
        double mx = logits[0][j];
        for (int i = 1; i < c; ++i) mx = std::max(mx, logits[i][j]);
        double sum = 0.0;
        for (int i = 0; i < c; ++i) {
            a[i][j] = std::exp(logits[i][j] - mx);
            sum += a[i][j];
        }
        for (int i = 0; i < c; ++i) a[i][j] /= sum;
    }
    Tensor out({c, h, w});
    for (int p = 0; p < hw; ++p)
        for (int j = 0; j < c; ++j) {
            double s = 0.0;
            for (int i = 0; i < c; ++i) s += v[p][i] * a[i][j];
            out.at(j, p / w, p % w) = s;
        }
    return out;
}

// Dense single-window attention covering the whole map (M = H = W):
// rows of Softmax(Q K^T + B) weight the value rows.
inline Tensor window_attention_full(const Tensor& x, const Tensor& wq, const Tensor& wk,
                                    const Tensor& wv, const Tensor& bias) {
    int c = x.dim(0), h = x.dim(1), w = x.dim(2), m2 = h * w;
    int dqk = wq.dim(1), dv = wv.dim(1);
    std::vector<std::vector<double>> xm(m2, std::vector<double>(c));
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) xm[y * w + xx][ch] = x.at(ch, y, xx);
    std::vector<std::vector<double>> q(m2, std::vector<double>(dqk, 0.0)), k = q;
    std::vector<std::vector<double>> v(m2, std::vector<double>(dv, 0.0));
    for (int p = 0; p < m2; ++p) {
        for (int d = 0; d < dqk; ++d)
            for (int ci = 0; ci < c; ++ci) {
                q[p][d] += xm[p][ci] * wq.at2(ci, d);
                k[p][d] += xm[p][ci] * wk.at2(ci, d);
            }
        for (int d = 0; d < dv; ++d)
            for (int ci = 0; ci < c; ++ci) v[p][d] += xm[p][ci] * wv.at2(ci, d);
    }
    std::vector<std::vector<double>> a(m2, std::vector<double>(m2));
    for (int i = 0; i < m2; ++i) {
        double mx = -1e300;
        for (int j = 0; j < m2; ++j) {
            double l = bias.at2(i, j);
            for (int d = 0; d < dqk; ++d) l += q[i][d] * k[j][d];
            a[i][j] = l;
            mx = std::max(mx, l);
        }
        double sum = 0.0;
        for (int j = 0; j < m2; ++j) {
            a[i][j] = std::exp(a[i][j] - mx);
            sum += a[i][j];
        }
        for (int j = 0; j < m2; ++j) a[i][j] /= sum;
    }
    Tensor out({dv, h, w});
    for (int i = 0; i < m2; ++i)
        for (int d = 0; d < dv; ++d) {
            double s = 0.0;
            for (int j = 0; j < m2; ++j) s += a[i][j] * v[j][d];
            out.at(d, i / w, i % w) = s;
        }
    return out;
}

// Tiled window attention: reflect-pad to multiples of m, run the dense
// single-window oracle on every m x m tile, merge, crop.
inline Tensor window_attention_tiled(const Tensor& x, const Tensor& wq, const Tensor& wk,
                                     const Tensor& wv, const Tensor& bias, int m) {
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    int ph = (h % m == 0) ? h : (h / m + 1) * m;
    int pw = (w % m == 0) ? w : (w / m + 1) * m;
    Tensor xp({c, ph, pw});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < ph; ++y)
            for (int xx = 0; xx < pw; ++xx)
                xp.at(ch, y, xx) = x.at(ch, reflect101(y, h), reflect101(xx, w));
    int dv = wv.dim(1);
    Tensor out({dv, ph, pw});
    for (int wy = 0; wy < ph / m; ++wy)
        for (int wx = 0; wx < pw / m; ++wx) {
            Tensor tile({c, m, m});
            for (int ch = 0; ch < c; ++ch)
                for (int py = 0; py < m; ++py)
                    for (int px = 0; px < m; ++px)
                        tile.at(ch, py, px) = xp.at(ch, wy * m + py, wx * m + px);
            Tensor res = window_attention_full(tile, wq, wk, wv, bias);
            for (int d = 0; d < dv; ++d)
                for (int py = 0; py < m; ++py)
                    for (int px = 0; px < m; ++px)
                        out.at(d, wy * m + py, wx * m + px) = res.at(d, py, px);
        }
    if (ph == h && pw == w) return out;
    Tensor cropped({dv, h, w});
    for (int d = 0; d < dv; ++d)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) cropped.at(d, y, xx) = out.at(d, y, xx);
    return cropped;
}

// Plain convolution with explicit pad handling (zero or reflect).
inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                     bool reflect, int groups) {
    int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
    int cout = w.dim(0), cin_g = w.dim(1), k = w.dim(2);
    int oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
    int cout_g = cout / groups;
    Tensor out({cout, oh, ow});
    for (int co = 0; co < cout; ++co)
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double acc = b.numel() ? b[co] : 0.0;
                for (int cl = 0; cl < cin_g; ++cl)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            int iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
                            if (reflect) {
                                iy = reflect101(iy, h);
                                ix = reflect101(ix, wd);
                            } else if (iy < 0 || iy >= h || ix < 0 || ix >= wd) {
                                continue;
                            }
                            int ci = (co / cout_g) * cin_g + cl;
                            double wv =
                                w[((static_cast<int64_t>(co) * cin_g + cl) * k + ky) * k + kx];
                            acc += wv * x.at(ci, iy, ix);
                        }
                out.at(co, oy, ox) = acc;
            }
    return out;
}

// Per-pixel channel normalization followed by the affine map.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({c, h, w});
    for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
            double mu = 0.0;
            for (int ch = 0; ch < c; ++ch) mu += x.at(ch, y, xx);
            mu /= c;
            double var = 0.0;
            for (int ch = 0; ch < c; ++ch) var += (x.at(ch, y, xx) - mu) * (x.at(ch, y, xx) - mu);
            var /= c;
            for (int ch = 0; ch < c; ++ch)
                out.at(ch, y, xx) = (x.at(ch, y, xx) - mu) / std::sqrt(var + eps) * gain[ch] + bias[ch];
        }
    return out;
}

// Elementwise product of the channel halves by scalar loop.
inline Tensor simple_gate(const Tensor& x) {
    int c = x.dim(0) / 2, h = x.dim(1), w = x.dim(2);
    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) out.at(ch, y, xx) = x.at(ch, y, xx) * x.at(c + ch, y, xx);
    return out;
}

// Pixel shuffle via the documented index formula.
inline Tensor pixel_shuffle(const Tensor& x, int r) {
    int cin = x.dim(0), h = x.dim(1), w = x.dim(2), c = cin / (r * r);
    Tensor out({c, h * r, w * r});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h * r; ++y)
            for (int xx = 0; xx < w * r; ++xx)
                out.at(ch, y, xx) = x.at(ch * r * r + (y % r) * r + (xx % r), y / r, xx / r);
    return out;
}

// Relative-position bias by direct offset enumeration.
inline Tensor relative_bias(const Tensor& table, int m) {
    int m2 = m * m;
    Tensor out({m2, m2});
    for (int ar = 0; ar < m; ++ar)
        for (int ac = 0; ac < m; ++ac)
            for (int br = 0; br < m; ++br)
                for (int bc = 0; bc < m; ++bc) {
                    int dr = ar - br + m - 1, dc = ac - bc + m - 1;
                    out.at2(ar * m + ac, br * m + bc) = table[dr * (2 * m - 1) + dc];
                }
    return out;
}

// SSIM of one band by direct sliding windows (11x11 Gaussian, std 1.5).
inline double ssim_direct(const double* x, const double* y, int h, int w) {
    const int win = 11;
    const double c1 = 1e-4, c2 = 9e-4;
    double kern[win][win];
    double ksum = 0.0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            double dy = i - 5, dx = j - 5;
            kern[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * 1.5 * 1.5));
            ksum += kern[i][j];
        }
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) kern[i][j] /= ksum;
    double acc = 0.0;
    int count = 0;
    for (int y0 = 0; y0 + win <= h; ++y0)
        for (int x0 = 0; x0 + win <= w; ++x0) {
            double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    double a = x[(y0 + i) * w + x0 + j], b = y[(y0 + i) * w + x0 + j];
                    mx += kern[i][j] * a;
                    my += kern[i][j] * b;
                    mxx += kern[i][j] * a * a;
                    myy += kern[i][j] * b * b;
                    mxy += kern[i][j] * a * b;
                }
            double vx = mxx - mx * mx, vy = myy - my * my, cxy = mxy - mx * my;
            acc += ((2 * mx * my + c1) * (2 * cxy + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return acc / count;
}

// Bicubic interpolation evaluated directly in 2-D (4x4 tap products).
inline Tensor bicubic_2d(const Tensor& x, int f) {
    auto kernel = [](double t) {
        t = std::abs(t);
        const double a = -0.5;
        if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
        if (t < 2.0) return a * (((t - 5.0) * t + 8.0) * t - 4.0);
        return 0.0;
    };
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({c, h * f, w * f});
    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < h * f; ++oy)
            for (int ox = 0; ox < w * f; ++ox) {
                double sy = (oy + 0.5) / f - 0.5, sx = (ox + 0.5) / f - 0.5;
                int by = static_cast<int>(std::floor(sy)), bx = static_cast<int>(std::floor(sx));
                double acc = 0.0;
                for (int i = -1; i <= 2; ++i)
                    for (int j = -1; j <= 2; ++j) {
                        int yy = std::min(h - 1, std::max(0, by + i));
                        int xx = std::min(w - 1, std::max(0, bx + j));
                        acc += kernel(sy - (by + i)) * kernel(sx - (bx + j)) * x.at(ch, yy, xx);
                    }
                out.at(ch, oy, ox) = acc;
            }
    return out;
}

// Instrumented attention cores: run the computation on real data and count
// one per fused multiply-add (logits + value aggregation only).
inline uint64_t count_spectral_core_macs(const Tensor& x, double sigma) {
    int c = x.dim(0), hw = x.dim(1) * x.dim(2);
    uint64_t macs = 0;
    std::vector<std::vector<double>> xm(static_cast<size_t>(hw), std::vector<double>(static_cast<size_t>(c)));
    for (int ch = 0; ch < c; ++ch)
        for (int p = 0; p < hw; ++p) xm[static_cast<size_t>(p)][static_cast<size_t>(ch)] = x[static_cast<int64_t>(ch) * hw + p];
    std::vector<std::vector<double>> logits(static_cast<size_t>(c), std::vector<double>(static_cast<size_t>(c), 0.0));
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j)
            for (int p = 0; p < hw; ++p) {
                logits[static_cast<size_t>(i)][static_cast<size_t>(j)] += xm[static_cast<size_t>(p)][static_cast<size_t>(i)] * xm[static_cast<size_t>(p)][static_cast<size_t>(j)];
                ++macs;  // one fused multiply-add into the logit matrix
            }
    // sigma re-weighting and softmax are elementwise, not MACs
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j) logits[static_cast<size_t>(i)][static_cast<size_t>(j)] *= sigma;
    std::vector<double> out(static_cast<size_t>(hw) * static_cast<size_t>(c), 0.0);
    for (int p = 0; p < hw; ++p)
        for (int j = 0; j < c; ++j)
            for (int i = 0; i < c; ++i) {
                out[static_cast<size_t>(p) * c + j] += xm[static_cast<size_t>(p)][static_cast<size_t>(i)] * logits[static_cast<size_t>(i)][static_cast<size_t>(j)];
                ++macs;  // one fused multiply-add of the value aggregation
            }
    return macs;
}

inline uint64_t count_window_core_macs(int h, int w, int m, int d_qk, int d_v) {
    int nh = (h + m - 1) / m, nw = (w + m - 1) / m;
    int m2 = m * m;
    uint64_t macs = 0;
    std::vector<double> q(static_cast<size_t>(m2) * d_qk, 0.5), k = q, v(static_cast<size_t>(m2) * d_v, 0.25);
    for (int win = 0; win < nh * nw; ++win) {
        std::vector<double> logits(static_cast<size_t>(m2) * m2, 0.0);
        for (int a = 0; a < m2; ++a)
            for (int b = 0; b < m2; ++b)
                for (int d = 0; d < d_qk; ++d) {
                    logits[static_cast<size_t>(a) * m2 + b] += q[static_cast<size_t>(a) * d_qk + d] * k[static_cast<size_t>(b) * d_qk + d];
                    ++macs;
                }
        std::vector<double> out(static_cast<size_t>(m2) * d_v, 0.0);
        for (int a = 0; a < m2; ++a)
            for (int d = 0; d < d_v; ++d)
                for (int b = 0; b < m2; ++b) {
                    out[static_cast<size_t>(a) * d_v + d] += logits[static_cast<size_t>(a) * m2 + b] * v[static_cast<size_t>(b) * d_v + d];
                    ++macs;
                }
    }
    return macs;
}

}  // namespace oracle
