#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hsir/linalg.hpp"
#include "hsir/stage.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace hsir;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

StageSettings tiny_settings() {
    StageSettings s;
    s.embed_dim = 8;
    s.n_basis = 4;
    s.basis_depths = {1, 1, 1};      // 32 -> 8 -> 2
    s.abundance_depths = {1, 1};
    s.bottleneck_depth = 1;
    s.window_size = 4;
    return s;
}

void make_box_downsample(DownsampleParams& p) {
    Tensor& dw = p.depthwise.weight.mutable_val();
    dw.fill(1.0 / 16.0);
    p.depthwise.bias.mutable_val().fill(0.0);
    Tensor& pw = p.pointwise.weight.mutable_val();
    pw.fill(0.0);
    for (int i = 0; i < std::min(pw.dim(0), pw.dim(1)); ++i)
        pw[static_cast<int64_t>(i) * pw.dim(1) + i] = 1.0;
    p.pointwise.bias.mutable_val().fill(0.0);
}

void make_identity_1x1(Conv2d& c) {
    Tensor& w = c.weight.mutable_val();
    w.fill(0.0);
    for (int i = 0; i < std::min(w.dim(0), w.dim(1)); ++i)
        w[static_cast<int64_t>(i) * w.dim(1) + i] = 1.0;
    c.bias.mutable_val().fill(0.0);
}

// Turns a block into the identity map: both branch up-projections zeroed,
// alpha=beta=0.5, LLFF body zeroed.
void neutralize_block(LssBlockParams& b) {
    b.spe.proj_up.weight.mutable_val().fill(0.0);
    b.spe.proj_up.bias.mutable_val().fill(0.0);
    b.spa.proj_up.weight.mutable_val().fill(0.0);
    b.spa.proj_up.bias.mutable_val().fill(0.0);
    b.alpha.mutable_val()[0] = 0.5;
    b.beta.mutable_val()[0] = 0.5;
    b.llff.project.weight.mutable_val().fill(0.0);
    b.llff.project.bias.mutable_val().fill(0.0);
}

}  // namespace

TEST_CASE("downsample: box kernel keeps constants and averages 4x4 blocks") {
    ParamRegistry reg;
    Rng rng(1);
    auto p = make_downsample(reg, "down", 1, 1, rng);
    make_box_downsample(p);

    Tensor c = Tensor::full({1, 8, 8}, 0.37);
    Tensor yc = downsample(c, p);
    CHECK(yc.dims() == std::vector<int>{1, 2, 2});
    for (int64_t i = 0; i < yc.numel(); ++i) CHECK(yc[i] == doctest::Approx(0.37));

    Tensor ramp({1, 8, 8});
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) ramp.at(0, y, x) = y * 8 + x;
    Tensor yr = downsample(ramp, p);
    for (int oy = 0; oy < 2; ++oy)
        for (int ox = 0; ox < 2; ++ox) {
            double mean = 0;
            for (int dy = 0; dy < 4; ++dy)
                for (int dx = 0; dx < 4; ++dx) mean += ramp.at(0, oy * 4 + dy, ox * 4 + dx);
            mean /= 16.0;
            CHECK(yr.at(0, oy, ox) == doctest::Approx(mean));
        }
}

TEST_CASE("downsample shape arithmetic: 64 -> 16") {
    ParamRegistry reg;
    Rng rng(2);
    auto p = make_downsample(reg, "down", 3, 6, rng);
    Tensor x = random_tensor({3, 64, 64}, 3);
    Tensor y = downsample(x, p);
    CHECK(y.dims() == std::vector<int>{6, 16, 16});
}

TEST_CASE("upsample halves channels and quadruples the sides") {
    ParamRegistry reg;
    Rng rng(4);
    auto p = make_upsample(reg, "up", 8, rng);
    Tensor x = random_tensor({8, 16, 16}, 5);
    Tensor y = upsample(x, p);
    CHECK(y.dims() == std::vector<int>{4, 64, 64});
}

TEST_CASE("upsample equals conv followed by the pixel-shuffle index map") {
    ParamRegistry reg;
    Rng rng(6);
    auto p = make_upsample(reg, "up", 4, rng);
    Tensor x = random_tensor({4, 3, 5}, 7);
    Tensor conv = oracle::conv2d(x, p.conv.weight.val(), p.conv.bias.val(), 1, 1, true, 1);
    Tensor want = oracle::pixel_shuffle(conv, 4);
    CHECK(max_abs_diff(upsample(x, p), want) < 1e-12);
}

TEST_CASE("upsample rejects odd channel counts at construction") {
    ParamRegistry reg;
    Rng rng(8);
    CHECK_THROWS_AS(make_upsample(reg, "up", 5, rng), ConfigError);
}

TEST_CASE("stage settings validate the scale arithmetic") {
    StageSettings s = tiny_settings();
    CHECK(s.operating_size() == 32);
    s.n_basis = 5;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = tiny_settings();
    s.basis_depths.clear();
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("basis module: shape arithmetic at the default reduction") {
    StageSettings s;
    s.embed_dim = 4;
    s.n_basis = 16;
    s.basis_depths = {1, 1, 1};  // 64 -> 16 -> 4
    s.abundance_depths = {1, 1};
    s.window_size = 4;
    CHECK(s.operating_size() == 64);
    ParamRegistry reg;
    Rng rng(9);
    auto stage = make_stage(reg, "st", s, rng);
    Tensor f = random_tensor({4, 64, 64}, 10);
    Tensor b = basis_module(f, stage);
    CHECK(b.dims() == std::vector<int>{4, 4, 4});
}

TEST_CASE("basis module: identity blocks and box downsampling keep constants") {
    StageSettings s = tiny_settings();
    ParamRegistry reg;
    Rng rng(11);
    auto stage = make_stage(reg, "st", s, rng);
    make_identity_1x1(stage.basis.proj_in);
    make_identity_1x1(stage.basis.final_conv);
    for (auto& sc : stage.basis.scales)
        for (auto& blk : sc.blocks) neutralize_block(blk);
    for (auto& d : stage.basis.downs) make_box_downsample(d);
    Tensor c = Tensor::full({8, 32, 32}, 0.61);
    Tensor b = basis_module(c, stage);
    CHECK(b.dims() == std::vector<int>{8, 2, 2});
    for (int64_t i = 0; i < b.numel(); ++i) CHECK(b[i] == doctest::Approx(0.61));
}

TEST_CASE("abundance module: U widths double down and halve up, output N_B x H x W") {
    StageSettings s = tiny_settings();
    ParamRegistry reg;
    Rng rng(12);
    auto stage = make_stage(reg, "st", s, rng);
    // constructed widths: level0 = N_B, level1 = 2 N_B, bottleneck = 4 N_B
    REQUIRE(stage.abundance.levels.size() == 2);
    CHECK(stage.abundance.levels[0].width == 4);
    CHECK(stage.abundance.levels[1].width == 8);
    CHECK(stage.abundance.bottleneck[0].cfg.width == 16);
    // decoder blocks mirror encoder widths level by level
    for (const auto& level : stage.abundance.levels) {
        for (const auto& blk : level.enc_blocks) CHECK(blk.cfg.width == level.width);
        for (const auto& blk : level.dec_blocks) CHECK(blk.cfg.width == level.width);
        CHECK(level.up.conv.in_width() == 2 * level.width);
        CHECK(level.merge.out_width() == level.width);
    }
    Tensor f = random_tensor({8, 32, 32}, 13);
    Tensor a = abundance_module(f, stage);
    CHECK(a.dims() == std::vector<int>{4, 32, 32});
}

TEST_CASE("abundance module: zeroed final conv gives exactly zero") {
    StageSettings s = tiny_settings();
    ParamRegistry reg;
    Rng rng(14);
    auto stage = make_stage(reg, "st", s, rng);
    stage.abundance.final_conv.weight.mutable_val().fill(0.0);
    stage.abundance.final_conv.bias.mutable_val().fill(0.0);
    Tensor f = random_tensor({8, 32, 32}, 15);
    Tensor a = abundance_module(f, stage);
    for (int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == 0.0);
}

TEST_CASE("window size clamps to the map at small scales") {
    StageSettings s = tiny_settings();  // bottleneck at 2x2 with M=4
    ParamRegistry reg;
    Rng rng(16);
    auto stage = make_stage(reg, "st", s, rng);
    CHECK(stage.abundance.bottleneck[0].cfg.window_size == 2);
    CHECK(stage.basis.scales.back().blocks[0].cfg.window_size == 2);
    CHECK(stage.basis.scales.front().blocks[0].cfg.window_size == 4);
}

TEST_CASE("stage forward: zeroed basis branch is the identity") {
    StageSettings s = tiny_settings();
    ParamRegistry reg;
    Rng rng(17);
    auto stage = make_stage(reg, "st", s, rng);
    stage.basis.final_conv.weight.mutable_val().fill(0.0);
    stage.basis.final_conv.bias.mutable_val().fill(0.0);
    Tensor f = random_tensor({8, 32, 32}, 18);
    CHECK(max_abs_diff(stage_forward(f, stage), f) == 0.0);
}

TEST_CASE("stage forward matches the explicit low-rank recombination") {
    StageSettings s = tiny_settings();
    ParamRegistry reg;
    Rng rng(19);
    auto stage = make_stage(reg, "st", s, rng);
    Tensor f = random_tensor({8, 32, 32}, 20);
    Tensor b = basis_module(f, stage);       // (8, 2, 2)
    Tensor a = abundance_module(f, stage);   // (4, 32, 32)
    // explicit (E x N_B) x (N_B x HW) scalar product
    Tensor want = f;
    for (int e = 0; e < 8; ++e)
        for (int p = 0; p < 32 * 32; ++p) {
            double acc = 0;
            for (int r = 0; r < 4; ++r) acc += b[e * 4 + r] * a[r * 32 * 32 + p];
            want[e * 32 * 32 + p] += acc;
        }
    CHECK(max_abs_diff(stage_forward(f, stage), want) < 1e-12);
}

TEST_CASE("stage update has rank at most N_B") {
    StageSettings s = tiny_settings();
    ParamRegistry reg;
    Rng rng(21);
    auto stage = make_stage(reg, "st", s, rng);
    for (int trial = 0; trial < 3; ++trial) {
        Tensor f = random_tensor({8, 32, 32}, 22 + static_cast<uint64_t>(trial));
        Tensor out = stage_forward(f, stage);
        Tensor update({8, 32 * 32});
        for (int64_t i = 0; i < update.numel(); ++i) update[i] = out[i] - f[i];
        auto sv = singular_values(update);
        REQUIRE(sv.size() == 8);
        CHECK(sv[4] <= 1e-5 * sv[0]);
    }
}

TEST_CASE("stage forward validates the input shape") {
    StageSettings s = tiny_settings();
    ParamRegistry reg;
    Rng rng(23);
    auto stage = make_stage(reg, "st", s, rng);
    Tensor bad = random_tensor({8, 16, 16}, 24);
    CHECK_THROWS_AS(stage_forward(bad, stage), ConfigError);
}

TEST_CASE("analytic stage parameter count equals the enumerated registry") {
    StageSettings s = tiny_settings();
    ParamRegistry reg;
    Rng rng(25);
    make_stage(reg, "st", s, rng);
    CHECK(stage_param_count(s) == reg.total_elements());

    // and with a different shape of config
    StageSettings s2 = s;
    s2.embed_dim = 6;
    s2.abundance_depths = {2};
    s2.bottleneck_depth = 2;
    s2.basis_depths = {1, 2};
    s2.skip_merge = SkipMerge::Add;
    ParamRegistry reg2;
    Rng rng2(26);
    make_stage(reg2, "st", s2, rng2);
    CHECK(stage_param_count(s2) == reg2.total_elements());
}

TEST_CASE("deep U levels pad to multiples of four and crop back") {
    StageSettings s = tiny_settings();
    s.basis_depths = {1, 1};        // operating size 8
    s.abundance_depths = {1, 1};    // 8 -> 2 -> pad4(2)=4 -> 1
    ParamRegistry reg;
    Rng rng(30);
    auto stage = make_stage(reg, "st", s, rng);
    CHECK(stage.abundance.bottleneck_size == 1);
    Tensor f = random_tensor({8, 8, 8}, 31);
    Tensor a = abundance_module(f, stage);
    CHECK(a.dims() == std::vector<int>{4, 8, 8});
    CHECK(a.all_finite());
    CHECK(stage_param_count(s) == reg.total_elements());
    // instrumented MACs still match the analytic walk through the pad/crop path
    uint64_t measured;
    {
        ops::MacScope scope;
        stage_forward(f, stage);
        measured = ops::mac_counter_value();
    }
    CHECK(measured == stage_mac_count(s));
}

TEST_CASE("factorized stage is cheaper than the dense-width reference") {
    StageSettings paper;
    paper.embed_dim = 172;
    paper.n_basis = 16;
    paper.basis_depths = {1, 1, 1};
    paper.abundance_depths = {1, 1};
    paper.bottleneck_depth = 1;
    paper.window_size = 8;
    CHECK(stage_param_count(paper) < stage_param_count_dense(paper));
    CHECK(stage_mac_count(paper) < stage_mac_count_dense(paper));
}
