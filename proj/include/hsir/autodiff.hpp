#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "hsir/ops.hpp"
#include "hsir/tensor.hpp"

namespace hsir {

namespace detail {
struct Node {
    Tensor val;
    Tensor grad;  // allocated on first accumulation
    bool requires_grad = false;
    int64_t id = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // reads own grad, accumulates into parents

    Tensor& grad_buf() {
        if (grad.empty()) grad = Tensor(val.dims());
        return grad;
    }
};
}  // namespace detail

/// Handle to a node of the reverse-mode tape. Graphs are rebuilt per forward
/// pass; leaves (parameters, inputs) persist across passes.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    bool defined() const { return n_ != nullptr; }
    const Tensor& val() const { return n_->val; }
    Tensor& mutable_val() { return n_->val; }
    bool requires_grad() const { return n_ && n_->requires_grad; }

    const Tensor& grad() const { return n_->grad; }
    bool has_grad() const { return n_ && !n_->grad.empty(); }
    void zero_grad() {
        if (n_ && !n_->grad.empty()) n_->grad.fill(0.0);
    }

    /// Reverse pass from this scalar node (numel must be 1).
    void backward() const;

    std::shared_ptr<detail::Node> node() const { return n_; }
    static Var wrap(std::shared_ptr<detail::Node> n) {
        Var v;
        v.n_ = std::move(n);
        return v;
    }

private:
    std::shared_ptr<detail::Node> n_;
};

/// Disables graph construction in scope (inference mode).
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    bool prev;
};
bool grad_enabled();

// Elementwise / structural ops -----------------------------------------------
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, const Var& s);        // s: scalar Var
Var scale_const(const Var& a, double c);
Var reshape(const Var& a, std::vector<int> dims);
Var concat_ch(const Var& a, const Var& b);
Var slice_ch(const Var& a, int c0, int c1);
Var reflect_pad_br(const Var& x, int pad_h, int pad_w);
Var crop_tl(const Var& x, int h, int w);
Var pixel_shuffle(const Var& x, int r);
Var matmul(const Var& a, const Var& b);

// Gather rows of a flat table: out[i] = table[idx[i]].
Var gather(const Var& table, std::shared_ptr<const std::vector<int>> idx, std::vector<int> dims);

// Neural primitives -----------------------------------------------------------
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad, ops::Pad mode,
           int groups);
Var layer_norm_chan(const Var& x, const Var& gain, const Var& bias, double eps);
Var spectral_attention(const Var& x, const Var& wq, const Var& wk, const Var& wv, const Var& sigma,
                       int heads);
Var window_attention(const Var& x, const Var& wq, const Var& wk, const Var& wv, const Var& bias_mat,
                     int m, int heads);

// Reductions -------------------------------------------------------------------
Var mean_abs_diff(const Var& a, const Tensor& target);      // scalar
Var dot_const(const Var& a, const Tensor& weights);         // scalar, for probes
Var add_scalars(const std::vector<Var>& xs);                // scalar sum

}  // namespace hsir
