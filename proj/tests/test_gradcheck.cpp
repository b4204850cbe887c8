#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hsir/block.hpp"
#include "hsir/model.hpp"
#include "support/testutil.hpp"

// Central-difference verification of every learnable parameter class, per
// module and through the whole model.

using namespace hsir;
using testutil::grad_check;
using testutil::probe_loss;
using testutil::random_tensor;

TEST_CASE("spectral attention parameters: w_q, w_k, w_v, sigma") {
    ParamRegistry reg;
    Rng rng(1);
    auto p = make_spectral_attention_params(reg, "ssa", 4, 1, rng);
    Tensor x = random_tensor({4, 8, 8}, 2);
    auto loss = [&] { return probe_loss(spectral_self_attention(Var(x), p)); };
    auto res = grad_check(loss, reg.items);
    CHECK_MESSAGE(res.max_rel < 1e-4, res.worst);
}

TEST_CASE("spectral attention with two heads") {
    ParamRegistry reg;
    Rng rng(3);
    auto p = make_spectral_attention_params(reg, "ssa", 4, 2, rng);
    Tensor x = random_tensor({4, 6, 6}, 4);
    auto loss = [&] { return probe_loss(spectral_self_attention(Var(x), p)); };
    auto res = grad_check(loss, reg.items);
    CHECK_MESSAGE(res.max_rel < 1e-4, res.worst);
}

TEST_CASE("window attention parameters: w_q, w_k, w_v, bias_table") {
    ParamRegistry reg;
    Rng rng(5);
    auto p = make_window_attention_params(reg, "wsa", 4, 1, 4, 4, 1, rng);
    Rng brng(6);
    brng.fill_uniform(p.bias_table.mutable_val(), -0.3, 0.3);
    Tensor x = random_tensor({4, 8, 8}, 7);
    auto loss = [&] { return probe_loss(window_self_attention(Var(x), p)); };
    auto res = grad_check(loss, reg.items);
    CHECK_MESSAGE(res.max_rel < 1e-4, res.worst);
}

TEST_CASE("window attention with padding and two heads") {
    ParamRegistry reg;
    Rng rng(8);
    auto p = make_window_attention_params(reg, "wsa", 3, 2, 4, 3, 2, rng);
    Tensor x = random_tensor({3, 7, 5}, 9);  // forces reflect padding
    auto loss = [&] { return probe_loss(window_self_attention(Var(x), p)); };
    auto res = grad_check(loss, reg.items);
    CHECK_MESSAGE(res.max_rel < 1e-4, res.worst);
}

TEST_CASE("gated feed-forward parameters") {
    BlockSettings s;
    s.width = 4;
    s.window_size = 2;
    ParamRegistry reg;
    Rng rng(10);
    auto p = make_llff(reg, "llff", s, rng);
    Tensor x = random_tensor({4, 6, 6}, 11);
    auto loss = [&] { return probe_loss(llff_forward(Var(x), p)); };
    auto res = grad_check(loss, reg.items);
    CHECK_MESSAGE(res.max_rel < 1e-4, res.worst);
}

TEST_CASE("full transformer block parameters at C=8, H=W=8") {
    BlockSettings s;
    s.width = 8;
    s.window_size = 4;
    ParamRegistry reg;
    Rng rng(12);
    auto p = make_lss_block(reg, "blk", s, rng);
    Tensor x = random_tensor({8, 8, 8}, 13);
    auto loss = [&] { return probe_loss(lss_block_forward(Var(x), p)); };
    auto res = grad_check(loss, reg.items, 1e-5, 4);
    CHECK_MESSAGE(res.max_rel < 1e-4, res.worst);
    CHECK(res.checked > 100);
}

TEST_CASE("stage parameters at the tiny configuration") {
    StageSettings s;
    s.embed_dim = 8;
    s.n_basis = 4;
    s.basis_depths = {1, 1};  // operating size 8
    s.abundance_depths = {1};
    s.bottleneck_depth = 1;
    s.window_size = 2;
    ParamRegistry reg;
    Rng rng(14);
    auto stage = make_stage(reg, "st", s, rng);
    Tensor f = random_tensor({8, 8, 8}, 15);
    auto loss = [&] { return probe_loss(stage_forward(Var(f), stage)); };
    auto res = grad_check(loss, reg.items, 1e-5, 3);
    CHECK_MESSAGE(res.max_rel < 1e-4, res.worst);
    CHECK(res.checked > 200);
}

TEST_CASE("full model gradient check at the tiny configuration") {
    ModelConfig c;
    c.channels = 3;
    c.embed_dim = 8;
    c.n_stages = 1;
    c.n_basis = 4;
    c.basis_depths = {1, 1, 1};  // operating size 32; 16x16 input is padded
    c.abundance_depths = {1, 1};
    c.bottleneck_depth = 1;
    c.window_size = 4;
    Model m(c, 16);
    Tensor x = random_tensor({3, 16, 16}, 17, 0.0, 1.0);
    auto loss = [&] { return probe_loss(m.forward(Var(x))); };
    auto res = grad_check(loss, m.params.items, 1e-5, 2);
    CHECK_MESSAGE(res.max_rel < 1e-3, res.worst);
    CHECK(res.checked > 200);
}
