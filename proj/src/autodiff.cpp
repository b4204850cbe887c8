#include "hsir/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace hsir {

using detail::Node;

namespace {
thread_local int64_t g_next_id = 1;
thread_local bool g_grad_enabled = true;

std::shared_ptr<Node> make_node(Tensor val) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->id = g_next_id++;
    return n;
}

// Builds a non-leaf node; records parents/backprop only when grad mode is on
// and at least one parent requires grad.
Var make_op(Tensor val, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    auto n = make_node(std::move(val));
    bool need = false;
    if (g_grad_enabled) {
        for (const Var& p : parents)
            if (p.requires_grad()) need = true;
    }
    if (need) {
        n->requires_grad = true;
        for (const Var& p : parents) n->parents.push_back(p.node());
        n->backprop = std::move(backprop);
    }
    return Var::wrap(n);
}

void accumulate(Node& n, const Tensor& g) {
    Tensor& buf = n.grad_buf();
    for (int64_t i = 0; i < g.numel(); ++i) buf[i] += g[i];
}
}  // namespace

Var::Var(Tensor value, bool requires_grad) {
    n_ = make_node(std::move(value));
    n_->requires_grad = requires_grad;
}

NoGradGuard::NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev; }
bool grad_enabled() { return g_grad_enabled; }

void Var::backward() const {
    if (!n_ || n_->val.numel() != 1)
        throw ConfigError("backward: root must be a defined scalar");
    // Collect reachable grad-requiring nodes, then run in reverse creation order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{n_.get()};
    while (!stack.empty()) {
        Node* cur = stack.back();
        stack.pop_back();
        if (!cur->requires_grad || seen.count(cur)) continue;
        seen.insert(cur);
        order.push_back(cur);
        for (auto& p : cur->parents) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });
    n_->grad_buf()[0] += 1.0;
    for (Node* node : order)
        if (node->backprop) node->backprop(*node);
}

// -----------------------------------------------------------------------------

Var add(const Var& a, const Var& b) {
    require_same_shape(a.val(), b.val(), "add");
    Tensor out = a.val();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] += b.val()[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) accumulate(*n.parents[0], n.grad);
        if (n.parents[1]->requires_grad) accumulate(*n.parents[1], n.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a.val(), b.val(), "sub");
    Tensor out = a.val();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] -= b.val()[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        if (n.parents[0]->requires_grad) accumulate(*n.parents[0], n.grad);
        if (n.parents[1]->requires_grad) {
            Tensor neg = n.grad;
            for (int64_t i = 0; i < neg.numel(); ++i) neg[i] = -neg[i];
            accumulate(*n.parents[1], neg);
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a.val(), b.val(), "mul");
    Tensor out = a.val();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= b.val()[i];
    return make_op(std::move(out), {a, b}, [](Node& n) {
        const Tensor& av = n.parents[0]->val;
        const Tensor& bv = n.parents[1]->val;
        if (n.parents[0]->requires_grad) {
            Tensor g = n.grad;
            for (int64_t i = 0; i < g.numel(); ++i) g[i] *= bv[i];
            accumulate(*n.parents[0], g);
        }
        if (n.parents[1]->requires_grad) {
            Tensor g = n.grad;
            for (int64_t i = 0; i < g.numel(); ++i) g[i] *= av[i];
            accumulate(*n.parents[1], g);
        }
    });
}

Var scale(const Var& a, const Var& s) {
    if (s.val().numel() != 1) throw ConfigError("scale: scalar Var required");
    double sv = s.val()[0];
    Tensor out = a.val();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= sv;
    return make_op(std::move(out), {a, s}, [](Node& n) {
        double sv = n.parents[1]->val[0];
        if (n.parents[0]->requires_grad) {
            Tensor g = n.grad;
            for (int64_t i = 0; i < g.numel(); ++i) g[i] *= sv;
            accumulate(*n.parents[0], g);
        }
        if (n.parents[1]->requires_grad) {
            double acc = 0.0;
            const Tensor& av = n.parents[0]->val;
            for (int64_t i = 0; i < av.numel(); ++i) acc += n.grad[i] * av[i];
            Tensor g({1});
            g[0] = acc;
            accumulate(*n.parents[1], g);
        }
    });
}

Var scale_const(const Var& a, double c) {
    Tensor out = a.val();
    for (int64_t i = 0; i < out.numel(); ++i) out[i] *= c;
    return make_op(std::move(out), {a}, [c](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        Tensor g = n.grad;
        for (int64_t i = 0; i < g.numel(); ++i) g[i] *= c;
        accumulate(*n.parents[0], g);
    });
}

Var reshape(const Var& a, std::vector<int> dims) {
    Tensor out = a.val().reshaped(dims);
    return make_op(std::move(out), {a}, [](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        accumulate(*n.parents[0], n.grad.reshaped(n.parents[0]->val.dims()));
    });
}

Var concat_ch(const Var& a, const Var& b) {
    const Tensor& av = a.val();
    const Tensor& bv = b.val();
    if (av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
        throw ConfigError("concat_ch: spatial mismatch " + av.shape_str() + " vs " + bv.shape_str());
    int ca = av.dim(0), cb = bv.dim(0), h = av.dim(1), w = av.dim(2);
    Tensor out({ca + cb, h, w});
    std::copy(av.data(), av.data() + av.numel(), out.data());
    std::copy(bv.data(), bv.data() + bv.numel(), out.data() + av.numel());
    return make_op(std::move(out), {a, b}, [ca, cb, h, w](Node& n) {
        int64_t na = static_cast<int64_t>(ca) * h * w;
        if (n.parents[0]->requires_grad) {
            Tensor& g = n.parents[0]->grad_buf();
            for (int64_t i = 0; i < na; ++i) g[i] += n.grad[i];
        }
        if (n.parents[1]->requires_grad) {
            Tensor& g = n.parents[1]->grad_buf();
            int64_t nb = static_cast<int64_t>(cb) * h * w;
            for (int64_t i = 0; i < nb; ++i) g[i] += n.grad[na + i];
        }
    });
}

Var slice_ch(const Var& a, int c0, int c1) {
    const Tensor& av = a.val();
    int h = av.dim(1), w = av.dim(2);
    if (c0 < 0 || c1 > av.dim(0) || c0 >= c1) throw ConfigError("slice_ch: bad range");
    Tensor out({c1 - c0, h, w});
    int64_t plane = static_cast<int64_t>(h) * w;
    std::copy(av.data() + c0 * plane, av.data() + c1 * plane, out.data());
    return make_op(std::move(out), {a}, [c0, plane](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        Tensor& g = n.parents[0]->grad_buf();
        for (int64_t i = 0; i < n.grad.numel(); ++i) g[c0 * plane + i] += n.grad[i];
    });
}

Var reflect_pad_br(const Var& x, int pad_h, int pad_w) {
    int h = x.val().dim(1), w = x.val().dim(2);
    Tensor out = ops::reflect_pad_br(x.val(), pad_h, pad_w);
    return make_op(std::move(out), {x}, [h, w](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        ops::reflect_pad_br_backward(n.grad, h, w, n.parents[0]->grad_buf());
    });
}

Var crop_tl(const Var& x, int h, int w) {
    Tensor out = ops::crop_tl(x.val(), h, w);
    return make_op(std::move(out), {x}, [](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        ops::crop_tl_backward(n.grad, n.parents[0]->grad_buf());
    });
}

Var pixel_shuffle(const Var& x, int r) {
    Tensor out = ops::pixel_shuffle(x.val(), r);
    return make_op(std::move(out), {x}, [r](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        accumulate(*n.parents[0], ops::pixel_unshuffle(n.grad, r));
    });
}

Var matmul(const Var& a, const Var& b) {
    Tensor out = ops::matmul(a.val(), b.val());
    return make_op(std::move(out), {a, b}, [](Node& n) {
        const Tensor& av = n.parents[0]->val;
        const Tensor& bv = n.parents[1]->val;
        if (n.parents[0]->requires_grad)
            accumulate(*n.parents[0], ops::matmul(n.grad, ops::transpose2d(bv)));
        if (n.parents[1]->requires_grad)
            accumulate(*n.parents[1], ops::matmul(ops::transpose2d(av), n.grad));
    });
}

Var gather(const Var& table, std::shared_ptr<const std::vector<int>> idx, std::vector<int> dims) {
    const Tensor& tv = table.val();
    Tensor out(dims);
    if (out.numel() != static_cast<int64_t>(idx->size()))
        throw ConfigError("gather: index count does not match output shape");
    for (int64_t i = 0; i < out.numel(); ++i) {
        int j = (*idx)[static_cast<size_t>(i)];
        if (j < 0 || j >= tv.numel()) throw ConfigError("gather: index out of range");
        out[i] = tv[j];
    }
    return make_op(std::move(out), {table}, [idx](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        Tensor& g = n.parents[0]->grad_buf();
        for (int64_t i = 0; i < n.grad.numel(); ++i) g[(*idx)[static_cast<size_t>(i)]] += n.grad[i];
    });
}

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad, ops::Pad mode,
           int groups) {
    Tensor out = ops::conv2d(x.val(), w.val(), b.defined() ? &b.val() : nullptr, stride, pad, mode,
                             groups);
    std::vector<Var> parents = {x, w};
    if (b.defined()) parents.push_back(b);
    bool has_bias = b.defined();
    return make_op(std::move(out), std::move(parents),
                   [stride, pad, mode, groups, has_bias](Node& n) {
                       Node& xn = *n.parents[0];
                       Node& wn = *n.parents[1];
                       Tensor* gx = xn.requires_grad ? &xn.grad_buf() : nullptr;
                       Tensor* gw = wn.requires_grad ? &wn.grad_buf() : nullptr;
                       Tensor* gb = nullptr;
                       if (has_bias && n.parents[2]->requires_grad) gb = &n.parents[2]->grad_buf();
                       ops::conv2d_backward(xn.val, wn.val, stride, pad, mode, groups, n.grad, gx,
                                            gw, gb);
                   });
}

Var layer_norm_chan(const Var& x, const Var& gain, const Var& bias, double eps) {
    auto cache = std::make_shared<ops::LayerNormCache>();
    Tensor out = ops::layer_norm_chan(x.val(), gain.val(), bias.val(), eps, cache.get());
    return make_op(std::move(out), {x, gain, bias}, [cache](Node& n) {
        Node& xn = *n.parents[0];
        Node& gn = *n.parents[1];
        Node& bn = *n.parents[2];
        ops::layer_norm_chan_backward(xn.val, gn.val, *cache, n.grad,
                                      xn.requires_grad ? &xn.grad_buf() : nullptr,
                                      gn.requires_grad ? &gn.grad_buf() : nullptr,
                                      bn.requires_grad ? &bn.grad_buf() : nullptr);
    });
}

Var spectral_attention(const Var& x, const Var& wq, const Var& wk, const Var& wv, const Var& sigma,
                       int heads) {
    auto cache = std::make_shared<ops::SsaCache>();
    double sv = sigma.val()[0];
    Tensor out = ops::ssa_forward(x.val(), wq.val(), wk.val(), wv.val(), sv, heads,
                                  grad_enabled() ? cache.get() : nullptr);
    if (!out.all_finite()) throw NumericError("spectral attention produced non-finite values");
    return make_op(std::move(out), {x, wq, wk, wv, sigma}, [cache, heads, sv](Node& n) {
        Node& xn = *n.parents[0];
        Node& qn = *n.parents[1];
        Node& kn = *n.parents[2];
        Node& vn = *n.parents[3];
        Node& sn = *n.parents[4];
        double gs = 0.0;
        ops::ssa_backward(*cache, qn.val, kn.val, vn.val, sv, heads, n.grad,
                          xn.requires_grad ? &xn.grad_buf() : nullptr,
                          qn.requires_grad ? &qn.grad_buf() : nullptr,
                          kn.requires_grad ? &kn.grad_buf() : nullptr,
                          vn.requires_grad ? &vn.grad_buf() : nullptr,
                          sn.requires_grad ? &gs : nullptr);
        if (sn.requires_grad) sn.grad_buf()[0] += gs;
    });
}

Var window_attention(const Var& x, const Var& wq, const Var& wk, const Var& wv, const Var& bias_mat,
                     int m, int heads) {
    auto cache = std::make_shared<ops::WsaCache>();
    int h = x.val().dim(1), w = x.val().dim(2);
    Tensor out = ops::wsa_forward(x.val(), wq.val(), wk.val(), wv.val(), bias_mat.val(), m, heads,
                                  grad_enabled() ? cache.get() : nullptr);
    return make_op(std::move(out), {x, wq, wk, wv, bias_mat}, [cache, m, heads, h, w](Node& n) {
        Node& xn = *n.parents[0];
        Node& qn = *n.parents[1];
        Node& kn = *n.parents[2];
        Node& vn = *n.parents[3];
        Node& bn = *n.parents[4];
        ops::wsa_backward(*cache, qn.val, kn.val, vn.val, m, heads, h, w, n.grad,
                          xn.requires_grad ? &xn.grad_buf() : nullptr,
                          qn.requires_grad ? &qn.grad_buf() : nullptr,
                          kn.requires_grad ? &kn.grad_buf() : nullptr,
                          vn.requires_grad ? &vn.grad_buf() : nullptr,
                          bn.requires_grad ? &bn.grad_buf() : nullptr);
    });
}

Var mean_abs_diff(const Var& a, const Tensor& target) {
    require_same_shape(a.val(), target, "mean_abs_diff");
    auto tgt = std::make_shared<Tensor>(target);
    double acc = 0.0;
    for (int64_t i = 0; i < a.val().numel(); ++i) acc += std::abs(a.val()[i] - (*tgt)[i]);
    Tensor out({1});
    out[0] = acc / static_cast<double>(a.val().numel());
    return make_op(std::move(out), {a}, [tgt](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        const Tensor& av = n.parents[0]->val;
        Tensor& g = n.parents[0]->grad_buf();
        double go = n.grad[0] / static_cast<double>(av.numel());
        for (int64_t i = 0; i < av.numel(); ++i) {
            double d = av[i] - (*tgt)[i];
            g[i] += go * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0));
        }
    });
}

Var dot_const(const Var& a, const Tensor& weights) {
    require_same_shape(a.val(), weights, "dot_const");
    auto w = std::make_shared<Tensor>(weights);
    double acc = 0.0;
    for (int64_t i = 0; i < a.val().numel(); ++i) acc += a.val()[i] * (*w)[i];
    Tensor out({1});
    out[0] = acc;
    return make_op(std::move(out), {a}, [w](Node& n) {
        if (!n.parents[0]->requires_grad) return;
        Tensor& g = n.parents[0]->grad_buf();
        for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[0] * (*w)[i];
    });
}

Var add_scalars(const std::vector<Var>& xs) {
    double acc = 0.0;
    for (const Var& v : xs) acc += v.val()[0];
    Tensor out({1});
    out[0] = acc;
    return make_op(std::move(out), xs, [](Node& n) {
        for (auto& p : n.parents)
            if (p->requires_grad) p->grad_buf()[0] += n.grad[0];
    });
}

}  // namespace hsir
