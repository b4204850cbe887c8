#include "hsir/ops.hpp"

#include <cmath>

namespace hsir::ops {

namespace {
thread_local bool g_mac_enabled = false;
thread_local uint64_t g_mac_count = 0;
}  // namespace

void mac_counter_enable(bool on) { g_mac_enabled = on; }
void mac_counter_reset() { g_mac_count = 0; }
uint64_t mac_counter_value() { return g_mac_count; }
void mac_add(uint64_t n) {
    if (g_mac_enabled) g_mac_count += n;
}

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    int period = 2 * (n - 1);
    int j = i % period;
    if (j < 0) j += period;
    return j < n ? j : period - j;
}

Tensor reflect_pad_br(const Tensor& x, int pad_h, int pad_w) {
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({c, h + pad_h, w + pad_w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h + pad_h; ++y) {
            int sy = reflect_index(y, h);
            for (int xx = 0; xx < w + pad_w; ++xx) out.at(ch, y, xx) = x.at(ch, sy, reflect_index(xx, w));
        }
    return out;
}

void reflect_pad_br_backward(const Tensor& gout, int orig_h, int orig_w, Tensor& gx) {
    int c = gout.dim(0), ph = gout.dim(1), pw = gout.dim(2);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < ph; ++y) {
            int sy = reflect_index(y, orig_h);
            for (int xx = 0; xx < pw; ++xx) gx.at(ch, sy, reflect_index(xx, orig_w)) += gout.at(ch, y, xx);
        }
}

Tensor crop_tl(const Tensor& x, int out_h, int out_w) {
    int c = x.dim(0);
    Tensor out({c, out_h, out_w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < out_h; ++y)
            for (int xx = 0; xx < out_w; ++xx) out.at(ch, y, xx) = x.at(ch, y, xx);
    return out;
}

void crop_tl_backward(const Tensor& gout, Tensor& gx) {
    int c = gout.dim(0), h = gout.dim(1), w = gout.dim(2);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) gx.at(ch, y, xx) += gout.at(ch, y, xx);
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor* b, int stride, int pad, Pad mode,
              int groups) {
    int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
    int cout = w.dim(0), cin_g = w.dim(1), k = w.dim(2);
    if (cin % groups != 0 || cout % groups != 0 || cin / groups != cin_g)
        throw ConfigError("conv2d: channel/group mismatch: x " + x.shape_str() + " w " +
                          w.shape_str() + " groups " + std::to_string(groups));
    int oh = (h + 2 * pad - k) / stride + 1;
    int ow = (wd + 2 * pad - k) / stride + 1;
    if (oh <= 0 || ow <= 0) throw ConfigError("conv2d: empty output for input " + x.shape_str());

    Tensor out({cout, oh, ow});
    int cout_g = cout / groups;
    const double* wp = w.data();
    uint64_t macs = 0;
    for (int co = 0; co < cout; ++co) {
        int g = co / cout_g;
        int ci0 = g * cin_g;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = b ? (*b)[co] : 0.0;
                for (int cl = 0; cl < cin_g; ++cl) {
                    const double* wk_base = wp + ((static_cast<int64_t>(co) * cin_g + cl) * k) * k;
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = oy * stride + ky - pad;
                        if (mode == Pad::Reflect) iy = reflect_index(iy, h);
                        else if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = ox * stride + kx - pad;
                            if (mode == Pad::Reflect) ix = reflect_index(ix, wd);
                            else if (ix < 0 || ix >= wd) continue;
                            acc += wk_base[ky * k + kx] * x.at(ci0 + cl, iy, ix);
                            ++macs;
                        }
                    }
                }
                out.at(co, oy, ox) = acc;
            }
        }
    }
    mac_add(macs);
    return out;
}

void conv2d_backward(const Tensor& x, const Tensor& w, int stride, int pad, Pad mode, int groups,
                     const Tensor& gout, Tensor* gx, Tensor* gw, Tensor* gb) {
    int cin = x.dim(0), h = x.dim(1), wd = x.dim(2);
    int cout = w.dim(0), cin_g = w.dim(1), k = w.dim(2);
    int oh = gout.dim(1), ow = gout.dim(2);
    int cout_g = cout / groups;
    const double* wp = w.data();
    double* gwp = gw ? gw->data() : nullptr;
    for (int co = 0; co < cout; ++co) {
        int g = co / cout_g;
        int ci0 = g * cin_g;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double go = gout.at(co, oy, ox);
                if (gb) (*gb)[co] += go;
                for (int cl = 0; cl < cin_g; ++cl) {
                    int64_t wbase = ((static_cast<int64_t>(co) * cin_g + cl) * k) * k;
                    for (int ky = 0; ky < k; ++ky) {
                        int iy = oy * stride + ky - pad;
                        if (mode == Pad::Reflect) iy = reflect_index(iy, h);
                        else if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            int ix = ox * stride + kx - pad;
                            if (mode == Pad::Reflect) ix = reflect_index(ix, wd);
                            else if (ix < 0 || ix >= wd) continue;
                            if (gx) gx->at(ci0 + cl, iy, ix) += wp[wbase + ky * k + kx] * go;
                            if (gwp) gwp[wbase + ky * k + kx] += x.at(ci0 + cl, iy, ix) * go;
                        }
                    }
                }
            }
        }
    }
    (void)cin;
}

Tensor layer_norm_chan(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps,
                       LayerNormCache* cache) {
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({c, h, w});
    Tensor mean({h, w}), inv_std({h, w});
    for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
            double mu = 0.0;
            for (int ch = 0; ch < c; ++ch) mu += x.at(ch, y, xx);
            mu /= c;
            double var = 0.0;
            for (int ch = 0; ch < c; ++ch) {
                double d = x.at(ch, y, xx) - mu;
                var += d * d;
            }
            var /= c;
            double is = 1.0 / std::sqrt(var + eps);
            mean.at2(y, xx) = mu;
            inv_std.at2(y, xx) = is;
            for (int ch = 0; ch < c; ++ch)
                out.at(ch, y, xx) = (x.at(ch, y, xx) - mu) * is * gain[ch] + bias[ch];
        }
    }
    if (cache) {
        cache->mean = std::move(mean);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

void layer_norm_chan_backward(const Tensor& x, const Tensor& gain, const LayerNormCache& cache,
                              const Tensor& gout, Tensor* gx, Tensor* ggain, Tensor* gbias) {
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
            double mu = cache.mean.at2(y, xx);
            double is = cache.inv_std.at2(y, xx);
            double sum_gh = 0.0, sum_gh_xhat = 0.0;
            for (int ch = 0; ch < c; ++ch) {
                double xhat = (x.at(ch, y, xx) - mu) * is;
                double go = gout.at(ch, y, xx);
                if (ggain) (*ggain)[ch] += go * xhat;
                if (gbias) (*gbias)[ch] += go;
                double gh = go * gain[ch];
                sum_gh += gh;
                sum_gh_xhat += gh * xhat;
            }
            if (gx) {
                for (int ch = 0; ch < c; ++ch) {
                    double xhat = (x.at(ch, y, xx) - mu) * is;
                    double gh = gout.at(ch, y, xx) * gain[ch];
                    gx->at(ch, y, xx) += is * (gh - sum_gh / c - xhat * sum_gh_xhat / c);
                }
            }
        }
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ConfigError("matmul: incompatible shapes " + a.shape_str() + " x " + b.shape_str());
    int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            double av = a.at2(i, p);
            for (int j = 0; j < n; ++j) out.at2(i, j) += av * b.at2(p, j);
        }
    }
    mac_add(static_cast<uint64_t>(m) * k * n);
    return out;
}

Tensor transpose2d(const Tensor& a) {
    int m = a.dim(0), n = a.dim(1);
    Tensor out({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at2(j, i) = a.at2(i, j);
    return out;
}

Tensor softmax_rows(const Tensor& logits) {
    int m = logits.dim(0), n = logits.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        double mx = logits.at2(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, logits.at2(i, j));
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            double e = std::exp(logits.at2(i, j) - mx);
            out.at2(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < n; ++j) out.at2(i, j) /= sum;
    }
    return out;
}

Tensor softmax_cols(const Tensor& logits) {
    int m = logits.dim(0), n = logits.dim(1);
    Tensor out({m, n});
    for (int j = 0; j < n; ++j) {
        double mx = logits.at2(0, j);
        for (int i = 1; i < m; ++i) mx = std::max(mx, logits.at2(i, j));
        double sum = 0.0;
        for (int i = 0; i < m; ++i) {
            double e = std::exp(logits.at2(i, j) - mx);
            out.at2(i, j) = e;
            sum += e;
        }
        for (int i = 0; i < m; ++i) out.at2(i, j) /= sum;
    }
    return out;
}

Tensor softmax_rows_backward(const Tensor& a, const Tensor& da) {
    int m = a.dim(0), n = a.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += da.at2(i, j) * a.at2(i, j);
        for (int j = 0; j < n; ++j) out.at2(i, j) = a.at2(i, j) * (da.at2(i, j) - dot);
    }
    return out;
}

Tensor softmax_cols_backward(const Tensor& a, const Tensor& da) {
    int m = a.dim(0), n = a.dim(1);
    Tensor out({m, n});
    for (int j = 0; j < n; ++j) {
        double dot = 0.0;
        for (int i = 0; i < m; ++i) dot += da.at2(i, j) * a.at2(i, j);
        for (int i = 0; i < m; ++i) out.at2(i, j) = a.at2(i, j) * (da.at2(i, j) - dot);
    }
    return out;
}

Tensor chw_to_pixmat(const Tensor& x) {
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({h * w, c});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) out.at2(y * w + xx, ch) = x.at(ch, y, xx);
    return out;
}

Tensor pixmat_to_chw(const Tensor& m, int h, int w) {
    int c = m.dim(1);
    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) out.at(ch, y, xx) = m.at2(y * w + xx, ch);
    return out;
}

Tensor pixel_shuffle(const Tensor& x, int r) {
    int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (cin % (r * r) != 0)
        throw ConfigError("pixel_shuffle: channels " + std::to_string(cin) +
                          " not divisible by r^2=" + std::to_string(r * r));
    int c = cin / (r * r);
    Tensor out({c, h * r, w * r});
    for (int ch = 0; ch < c; ++ch)
        for (int dy = 0; dy < r; ++dy)
            for (int dx = 0; dx < r; ++dx) {
                int src = ch * r * r + dy * r + dx;
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < w; ++xx)
                        out.at(ch, y * r + dy, xx * r + dx) = x.at(src, y, xx);
            }
    return out;
}

Tensor pixel_unshuffle(const Tensor& x, int r) {
    int c = x.dim(0), hr = x.dim(1), wr = x.dim(2);
    if (hr % r != 0 || wr % r != 0) throw ConfigError("pixel_unshuffle: spatial dims not divisible");
    int h = hr / r, w = wr / r;
    Tensor out({c * r * r, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int dy = 0; dy < r; ++dy)
            for (int dx = 0; dx < r; ++dx) {
                int dst = ch * r * r + dy * r + dx;
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < w; ++xx)
                        out.at(dst, y, xx) = x.at(ch, y * r + dy, xx * r + dx);
            }
    return out;
}

Tensor window_split(const Tensor& x, int m) {
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (h % m != 0 || w % m != 0)
        throw ConfigError("window_split: dims " + x.shape_str() + " not divisible by M=" +
                          std::to_string(m));
    int nh = h / m, nw = w / m;
    Tensor out({nh * nw, m * m, c});
    for (int wy = 0; wy < nh; ++wy)
        for (int wx = 0; wx < nw; ++wx) {
            int wi = wy * nw + wx;
            for (int py = 0; py < m; ++py)
                for (int px = 0; px < m; ++px) {
                    int p = py * m + px;
                    for (int ch = 0; ch < c; ++ch)
                        out[static_cast<int64_t>(wi) * m * m * c + static_cast<int64_t>(p) * c + ch] =
                            x.at(ch, wy * m + py, wx * m + px);
                }
        }
    return out;
}

Tensor window_unsplit(const Tensor& win, int c, int h, int wd, int m) {
    int nh = h / m, nw = wd / m;
    if (win.dim(0) != nh * nw || win.dim(1) != m * m || win.dim(2) != c)
        throw ConfigError("window_unsplit: windows " + win.shape_str() + " inconsistent with (" +
                          std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(wd) +
                          "), M=" + std::to_string(m));
    Tensor out({c, h, wd});
    for (int wy = 0; wy < nh; ++wy)
        for (int wx = 0; wx < nw; ++wx) {
            int wi = wy * nw + wx;
            for (int py = 0; py < m; ++py)
                for (int px = 0; px < m; ++px) {
                    int p = py * m + px;
                    for (int ch = 0; ch < c; ++ch)
                        out.at(ch, wy * m + py, wx * m + px) =
                            win[static_cast<int64_t>(wi) * m * m * c + static_cast<int64_t>(p) * c + ch];
                }
        }
    return out;
}

// ---------------------------------------------------------------------------
// Spectral self-attention core
// ---------------------------------------------------------------------------

Tensor ssa_forward(const Tensor& x, const Tensor& wq, const Tensor& wk, const Tensor& wv,
                   double sigma, int heads, SsaCache* cache) {
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (wq.dim(0) != c || wq.dim(1) != c || !wq.same_shape(wk) || !wq.same_shape(wv))
        throw ConfigError("spectral attention: projections must be (" + std::to_string(c) + "," +
                          std::to_string(c) + "), got " + wq.shape_str());
    if (heads < 1 || c % heads != 0)
        throw ConfigError("spectral attention: heads=" + std::to_string(heads) +
                          " must divide channel count " + std::to_string(c));
    if (!std::isfinite(sigma)) throw NumericError("spectral attention: sigma is not finite");
    int hw = h * w, ch = c / heads;

    Tensor xm = chw_to_pixmat(x);
    Tensor q = matmul(xm, wq);
    Tensor k = matmul(xm, wk);
    Tensor v = matmul(xm, wv);

    Tensor attn({heads, ch, ch});
    Tensor kq({heads, ch, ch});
    Tensor ym({hw, c});
    uint64_t macs = 0;
    for (int hd = 0; hd < heads; ++hd) {
        int c0 = hd * ch;
        // logits: sigma * K_h^T Q_h
        Tensor l({ch, ch});
        for (int i = 0; i < ch; ++i)
            for (int j = 0; j < ch; ++j) {
                double s = 0.0;
                for (int p = 0; p < hw; ++p) s += k.at2(p, c0 + i) * q.at2(p, c0 + j);
                macs += static_cast<uint64_t>(hw);
                kq[static_cast<int64_t>(hd) * ch * ch + i * ch + j] = s;
                l.at2(i, j) = sigma * s;
            }
        Tensor a = softmax_cols(l);
        for (int i = 0; i < ch; ++i)
            for (int j = 0; j < ch; ++j)
                attn[static_cast<int64_t>(hd) * ch * ch + i * ch + j] = a.at2(i, j);
        // Y_h = V_h A
        for (int p = 0; p < hw; ++p)
            for (int j = 0; j < ch; ++j) {
                double s = 0.0;
                for (int i = 0; i < ch; ++i) s += v.at2(p, c0 + i) * a.at2(i, j);
                macs += static_cast<uint64_t>(ch);
                ym.at2(p, c0 + j) = s;
            }
    }
    mac_add(macs);
    if (cache) {
        cache->x_mat = std::move(xm);
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->attn = std::move(attn);
        cache->kq = std::move(kq);
    }
    return pixmat_to_chw(ym, h, w);
}

void ssa_backward(const SsaCache& cache, const Tensor& wq, const Tensor& wk, const Tensor& wv,
                  double sigma, int heads, const Tensor& gout, Tensor* gx, Tensor* gwq,
                  Tensor* gwk, Tensor* gwv, double* gsigma) {
    int h = gout.dim(1), w = gout.dim(2);
    int hw = h * w;
    int c = cache.x_mat.dim(1);
    int ch = c / heads;
    Tensor gy = chw_to_pixmat(gout);  // (HW, C)

    Tensor gq({hw, c}), gk({hw, c}), gv({hw, c});
    for (int hd = 0; hd < heads; ++hd) {
        int c0 = hd * ch;
        Tensor a({ch, ch}), kq({ch, ch});
        for (int i = 0; i < ch; ++i)
            for (int j = 0; j < ch; ++j) {
                a.at2(i, j) = cache.attn[static_cast<int64_t>(hd) * ch * ch + i * ch + j];
                kq.at2(i, j) = cache.kq[static_cast<int64_t>(hd) * ch * ch + i * ch + j];
            }
        // dA = V_h^T dY_h ; dV_h = dY_h A^T
        Tensor da({ch, ch});
        for (int i = 0; i < ch; ++i)
            for (int j = 0; j < ch; ++j) {
                double s = 0.0;
                for (int p = 0; p < hw; ++p) s += cache.v.at2(p, c0 + i) * gy.at2(p, c0 + j);
                da.at2(i, j) = s;
            }
        for (int p = 0; p < hw; ++p)
            for (int i = 0; i < ch; ++i) {
                double s = 0.0;
                for (int j = 0; j < ch; ++j) s += gy.at2(p, c0 + j) * a.at2(i, j);
                gv.at2(p, c0 + i) = s;
            }
        Tensor dl = softmax_cols_backward(a, da);  // gradient wrt sigma*KQ
        if (gsigma)
            for (int i = 0; i < ch; ++i)
                for (int j = 0; j < ch; ++j) *gsigma += dl.at2(i, j) * kq.at2(i, j);
        // dKQ = sigma * dl; dK = Q dKQ^T ; dQ = K dKQ
        for (int p = 0; p < hw; ++p) {
            for (int i = 0; i < ch; ++i) {
                double sk = 0.0, sq = 0.0;
                for (int j = 0; j < ch; ++j) {
                    sk += cache.q.at2(p, c0 + j) * dl.at2(i, j);
                    sq += cache.k.at2(p, c0 + j) * dl.at2(j, i);
                }
                gk.at2(p, c0 + i) = sigma * sk;
                gq.at2(p, c0 + i) = sigma * sq;
            }
        }
    }

    // Projections: Q = X Wq etc.
    Tensor xt = transpose2d(cache.x_mat);
    if (gwq) {
        Tensor t = matmul(xt, gq);
        for (int64_t i = 0; i < t.numel(); ++i) (*gwq)[i] += t[i];
    }
    if (gwk) {
        Tensor t = matmul(xt, gk);
        for (int64_t i = 0; i < t.numel(); ++i) (*gwk)[i] += t[i];
    }
    if (gwv) {
        Tensor t = matmul(xt, gv);
        for (int64_t i = 0; i < t.numel(); ++i) (*gwv)[i] += t[i];
    }
    if (gx) {
        Tensor gxm = matmul(gq, transpose2d(wq));
        Tensor t2 = matmul(gk, transpose2d(wk));
        Tensor t3 = matmul(gv, transpose2d(wv));
        for (int64_t i = 0; i < gxm.numel(); ++i) gxm[i] += t2[i] + t3[i];
        Tensor gchw = pixmat_to_chw(gxm, h, w);
        for (int64_t i = 0; i < gchw.numel(); ++i) (*gx)[i] += gchw[i];
    }
}

// ---------------------------------------------------------------------------
// Window self-attention core
// ---------------------------------------------------------------------------

Tensor wsa_forward(const Tensor& x, const Tensor& wq, const Tensor& wk, const Tensor& wv,
                   const Tensor& bias, int m, int heads, WsaCache* cache) {
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (wq.dim(0) != c || wk.dim(0) != c || wv.dim(0) != c)
        throw ConfigError("window attention: projection rows must equal channels " +
                          std::to_string(c));
    if (wq.dim(1) != wk.dim(1))
        throw ConfigError("window attention: query/key widths differ");
    int dqk = wq.dim(1), dv = wv.dim(1);
    if (heads < 1 || dqk % heads != 0 || dv % heads != 0)
        throw ConfigError("window attention: heads must divide d_qk and d_v");
    if (m < 1) throw ConfigError("window attention: window size must be >= 1");
    int m2 = m * m;
    if (bias.dim(0) != m2 || bias.dim(1) != m2)
        throw ConfigError("window attention: bias must be M^2 x M^2");

    int ph = (h % m == 0) ? h : (h / m + 1) * m;
    int pw = (w % m == 0) ? w : (w / m + 1) * m;
    Tensor xp = (ph == h && pw == w) ? x : reflect_pad_br(x, ph - h, pw - w);
    Tensor win = window_split(xp, m);  // (N, M2, C)
    int n = win.dim(0);

    Tensor q({n, m2, dqk}), k({n, m2, dqk}), v({n, m2, dv});
    Tensor attn({n, heads, m2, m2});
    Tensor out_win({n, m2, dv});
    int hq = dqk / heads, hv = dv / heads;
    uint64_t macs = 0;

    for (int wi = 0; wi < n; ++wi) {
        const double* xw = win.data() + static_cast<int64_t>(wi) * m2 * c;
        double* qw = q.data() + static_cast<int64_t>(wi) * m2 * dqk;
        double* kw = k.data() + static_cast<int64_t>(wi) * m2 * dqk;
        double* vw = v.data() + static_cast<int64_t>(wi) * m2 * dv;
        for (int p = 0; p < m2; ++p) {
            for (int d = 0; d < dqk; ++d) {
                double sq = 0.0, sk = 0.0;
                for (int ci = 0; ci < c; ++ci) {
                    sq += xw[p * c + ci] * wq.at2(ci, d);
                    sk += xw[p * c + ci] * wk.at2(ci, d);
                }
                macs += 2ull * static_cast<uint64_t>(c);
                qw[p * dqk + d] = sq;
                kw[p * dqk + d] = sk;
            }
            for (int d = 0; d < dv; ++d) {
                double sv = 0.0;
                for (int ci = 0; ci < c; ++ci) sv += xw[p * c + ci] * wv.at2(ci, d);
                macs += static_cast<uint64_t>(c);
                vw[p * dv + d] = sv;
            }
        }
        for (int hd = 0; hd < heads; ++hd) {
            Tensor l({m2, m2});
            for (int a = 0; a < m2; ++a)
                for (int bpos = 0; bpos < m2; ++bpos) {
                    double s = 0.0;
                    for (int d = 0; d < hq; ++d)
                        s += qw[a * dqk + hd * hq + d] * kw[bpos * dqk + hd * hq + d];
                    macs += static_cast<uint64_t>(hq);
                    l.at2(a, bpos) = s + bias.at2(a, bpos);
                }
            Tensor a_mat = softmax_rows(l);
            double* aw = attn.data() + ((static_cast<int64_t>(wi) * heads + hd) * m2) * m2;
            for (int64_t i = 0; i < static_cast<int64_t>(m2) * m2; ++i) aw[i] = a_mat[i];
            for (int a = 0; a < m2; ++a)
                for (int d = 0; d < hv; ++d) {
                    double s = 0.0;
                    for (int bpos = 0; bpos < m2; ++bpos)
                        s += a_mat.at2(a, bpos) * vw[bpos * dv + hd * hv + d];
                    macs += static_cast<uint64_t>(m2);
                    out_win[static_cast<int64_t>(wi) * m2 * dv + a * dv + hd * hv + d] = s;
                }
        }
    }
    mac_add(macs);

    Tensor merged = window_unsplit(out_win, dv, ph, pw, m);
    Tensor out = (ph == h && pw == w) ? merged : crop_tl(merged, h, w);
    if (cache) {
        cache->ph = ph;
        cache->pw = pw;
        cache->windows = std::move(win);
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->attn = std::move(attn);
    }
    return out;
}

void wsa_backward(const WsaCache& cache, const Tensor& wq, const Tensor& wk, const Tensor& wv,
                  int m, int heads, int orig_h, int orig_w, const Tensor& gout, Tensor* gx,
                  Tensor* gwq, Tensor* gwk, Tensor* gwv, Tensor* gbias) {
    int c = wq.dim(0), dqk = wq.dim(1), dv = wv.dim(1);
    int m2 = m * m;
    int ph = cache.ph, pw = cache.pw;
    int n = cache.windows.dim(0);
    int hq = dqk / heads, hv = dv / heads;

    // Pad the output gradient back to the padded grid (crop backward = zero fill).
    Tensor gpad({dv, ph, pw});
    for (int ch = 0; ch < dv; ++ch)
        for (int y = 0; y < orig_h; ++y)
            for (int xx = 0; xx < orig_w; ++xx) gpad.at(ch, y, xx) = gout.at(ch, y, xx);
    Tensor gwin_out = window_split(gpad, m);  // (N, M2, dv)

    Tensor gwin_x({n, m2, c});
    for (int wi = 0; wi < n; ++wi) {
        const double* xw = cache.windows.data() + static_cast<int64_t>(wi) * m2 * c;
        const double* qw = cache.q.data() + static_cast<int64_t>(wi) * m2 * dqk;
        const double* kw = cache.k.data() + static_cast<int64_t>(wi) * m2 * dqk;
        const double* vw = cache.v.data() + static_cast<int64_t>(wi) * m2 * dv;
        const double* gy = gwin_out.data() + static_cast<int64_t>(wi) * m2 * dv;

        std::vector<double> gq(static_cast<size_t>(m2) * dqk, 0.0);
        std::vector<double> gk(static_cast<size_t>(m2) * dqk, 0.0);
        std::vector<double> gv(static_cast<size_t>(m2) * dv, 0.0);

        for (int hd = 0; hd < heads; ++hd) {
            const double* aw = cache.attn.data() + ((static_cast<int64_t>(wi) * heads + hd) * m2) * m2;
            // dV_h = A^T dY_h ; dA = dY_h V_h^T
            Tensor da({m2, m2});
            for (int a = 0; a < m2; ++a)
                for (int b = 0; b < m2; ++b) {
                    double s = 0.0;
                    for (int d = 0; d < hv; ++d)
                        s += gy[a * dv + hd * hv + d] * vw[b * dv + hd * hv + d];
                    da.at2(a, b) = s;
                }
            for (int b = 0; b < m2; ++b)
                for (int d = 0; d < hv; ++d) {
                    double s = 0.0;
                    for (int a = 0; a < m2; ++a) s += aw[a * m2 + b] * gy[a * dv + hd * hv + d];
                    gv[static_cast<size_t>(b) * dv + hd * hv + d] += s;
                }
            Tensor a_mat({m2, m2});
            for (int64_t i = 0; i < static_cast<int64_t>(m2) * m2; ++i) a_mat[i] = aw[i];
            Tensor dl = softmax_rows_backward(a_mat, da);
            if (gbias)
                for (int a = 0; a < m2; ++a)
                    for (int b = 0; b < m2; ++b) gbias->at2(a, b) += dl.at2(a, b);
            // dQ_h = dL K_h ; dK_h = dL^T Q_h
            for (int a = 0; a < m2; ++a)
                for (int d = 0; d < hq; ++d) {
                    double sq = 0.0, sk = 0.0;
                    for (int b = 0; b < m2; ++b) {
                        sq += dl.at2(a, b) * kw[b * dqk + hd * hq + d];
                        sk += dl.at2(b, a) * qw[b * dqk + hd * hq + d];
                    }
                    gq[static_cast<size_t>(a) * dqk + hd * hq + d] += sq;
                    gk[static_cast<size_t>(a) * dqk + hd * hq + d] += sk;
                }
        }

        // Projection gradients and window-input gradient.
        double* gxw = gwin_x.data() + static_cast<int64_t>(wi) * m2 * c;
        for (int p = 0; p < m2; ++p) {
            for (int ci = 0; ci < c; ++ci) {
                double sx = 0.0;
                for (int d = 0; d < dqk; ++d) {
                    if (gwq) gwq->at2(ci, d) += xw[p * c + ci] * gq[static_cast<size_t>(p) * dqk + d];
                    if (gwk) gwk->at2(ci, d) += xw[p * c + ci] * gk[static_cast<size_t>(p) * dqk + d];
                    sx += gq[static_cast<size_t>(p) * dqk + d] * wq.at2(ci, d) +
                          gk[static_cast<size_t>(p) * dqk + d] * wk.at2(ci, d);
                }
                for (int d = 0; d < dv; ++d) {
                    if (gwv) gwv->at2(ci, d) += xw[p * c + ci] * gv[static_cast<size_t>(p) * dv + d];
                    sx += gv[static_cast<size_t>(p) * dv + d] * wv.at2(ci, d);
                }
                gxw[p * c + ci] = sx;
            }
        }
    }

    if (gx) {
        Tensor gpad_x = window_unsplit(gwin_x, c, ph, pw, m);
        if (ph == orig_h && pw == orig_w) {
            for (int64_t i = 0; i < gpad_x.numel(); ++i) (*gx)[i] += gpad_x[i];
        } else {
            reflect_pad_br_backward(gpad_x, orig_h, orig_w, *gx);
        }
    }
}

}  // namespace hsir::ops
