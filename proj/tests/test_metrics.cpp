#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "hsir/cube_io.hpp"
#include "hsir/degrade.hpp"
#include "hsir/metrics.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace hsir;
using testutil::random_tensor;

TEST_CASE("mpsnr: identical cubes hit the 100 dB cap") {
    Tensor x = random_tensor({3, 16, 16}, 1, 0.0, 1.0);
    CHECK(mpsnr(x, x) == 100.0);
}

TEST_CASE("mpsnr: constant offset of 0.1 on a single band gives 20 dB") {
    Tensor ref({1, 8, 8});
    Tensor test = Tensor::full({1, 8, 8}, 0.1);
    CHECK(mpsnr(ref, test) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("mpsnr: sigma=50 unclipped noise lands at the analytic value") {
    SyntheticSceneSpec spec;
    spec.seed = 21;
    spec.size = 64;
    spec.bands = 8;
    Tensor clean = synth_scene(spec);
    Tensor noisy = add_gaussian_noise(clean, 50.0, 4242);
    CHECK(std::abs(mpsnr(clean, noisy) - 14.1514) < 0.15);
}

TEST_CASE("mpsnr is symmetric and reports per-band values averaging to the total") {
    Tensor a = random_tensor({4, 16, 16}, 2, 0.0, 1.0);
    Tensor b = random_tensor({4, 16, 16}, 3, 0.0, 1.0);
    std::vector<double> bands;
    double total = mpsnr(a, b, &bands);
    CHECK(mpsnr(b, a) == total);
    REQUIRE(bands.size() == 4);
    double mean = (bands[0] + bands[1] + bands[2] + bands[3]) / 4.0;
    CHECK(total == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("mpsnr strictly decreases as the noise level rises") {
    SyntheticSceneSpec spec;
    spec.seed = 5;
    spec.size = 48;
    spec.bands = 6;
    Tensor clean = synth_scene(spec);
    double prev = 1e9;
    for (double sigma : {10.0, 30.0, 50.0, 70.0}) {
        double acc = 0.0;
        for (uint64_t s = 0; s < 5; ++s)
            acc += mpsnr(clean, add_gaussian_noise(clean, sigma, 100 + s));
        acc /= 5.0;
        CHECK(acc < prev);
        prev = acc;
    }
}

TEST_CASE("mssim: identical cubes give exactly 1") {
    Tensor x = random_tensor({2, 16, 16}, 6, 0.0, 1.0);
    CHECK(mssim(x, x) == 1.0);
}

TEST_CASE("mssim: inverting a non-constant band drops below 1") {
    Tensor x = random_tensor({1, 16, 16}, 7, 0.0, 1.0);
    Tensor inv = x;
    for (int64_t i = 0; i < inv.numel(); ++i) inv[i] = 1.0 - inv[i];
    CHECK(mssim(x, inv) < 1.0);
}

TEST_CASE("mssim matches the direct sliding-window oracle to 1e-8") {
    Tensor a = random_tensor({2, 32, 32}, 8, 0.0, 1.0);
    Tensor b = add_gaussian_noise(a, 25.0, 9);
    std::vector<double> bands;
    mssim(a, b, &bands);
    for (int band = 0; band < 2; ++band) {
        double want = oracle::ssim_direct(a.data() + band * 32 * 32, b.data() + band * 32 * 32, 32, 32);
        CHECK(std::abs(bands[static_cast<size_t>(band)] - want) < 1e-8);
    }
}

TEST_CASE("mssim rejects images smaller than the window") {
    Tensor x = random_tensor({1, 8, 8}, 10, 0.0, 1.0);
    CHECK_THROWS_AS(mssim(x, x), ConfigError);
}

TEST_CASE("sam: identity and power-of-two scaling are exactly zero") {
    Tensor x = random_tensor({6, 8, 8}, 11, 0.1, 1.0);
    CHECK(sam_degrees(x, x) == 0.0);
    Tensor scaled = x;
    for (int64_t i = 0; i < scaled.numel(); ++i) scaled[i] *= 2.0;
    CHECK(sam_degrees(x, scaled) == 0.0);
}

TEST_CASE("sam: general positive rescaling stays numerically at zero") {
    Tensor x = random_tensor({5, 8, 8}, 12, 0.1, 1.0);
    Tensor scaled = x;
    for (int64_t i = 0; i < scaled.numel(); ++i) scaled[i] *= 1.7;
    CHECK(sam_degrees(x, scaled) < 1e-10);
    // per-pixel alpha, beta > 0 as well
    Tensor both = x;
    for (int64_t i = 0; i < both.numel(); ++i) both[i] *= 0.35;
    CHECK(sam_degrees(both, scaled) < 1e-10);
}

TEST_CASE("sam: orthogonal spectra measure ninety degrees") {
    Tensor r({2, 1, 1}), t({2, 1, 1});
    r.at(0, 0, 0) = 1.0;
    t.at(1, 0, 0) = 1.0;
    CHECK(sam_degrees(r, t) == doctest::Approx(90.0).epsilon(1e-12));
}

TEST_CASE("sam: zero spectra contribute zero and the metric is symmetric") {
    Tensor r = random_tensor({4, 4, 4}, 13, 0.1, 1.0);
    Tensor t = random_tensor({4, 4, 4}, 14, 0.1, 1.0);
    CHECK(sam_degrees(r, t) == doctest::Approx(sam_degrees(t, r)).epsilon(1e-12));
    // zero out one pixel's spectrum on both sides; the angle sum must drop
    Tensor r2 = r, t2 = t;
    for (int c = 0; c < 4; ++c) r2.at(c, 0, 0) = 0.0;
    double with_zero = sam_degrees(r2, t2);
    // removing one pixel's contribution: mean over all pixels still counts it as 0
    double full = sam_degrees(r, t);
    CHECK(with_zero < full);
}

TEST_CASE("evaluate_metrics invariants: report aggregates match the fields") {
    Tensor a = random_tensor({3, 16, 16}, 15, 0.0, 1.0);
    Tensor b = add_gaussian_noise(a, 30.0, 16);
    MetricsReport r = evaluate_metrics(a, b);
    REQUIRE(r.per_band_psnr.size() == 3);
    REQUIRE(r.per_band_ssim.size() == 3);
    double pm = 0, sm = 0;
    for (int i = 0; i < 3; ++i) {
        pm += r.per_band_psnr[static_cast<size_t>(i)];
        sm += r.per_band_ssim[static_cast<size_t>(i)];
    }
    CHECK(r.mpsnr == doctest::Approx(pm / 3).epsilon(1e-12));
    CHECK(r.mssim == doctest::Approx(sm / 3).epsilon(1e-12));
    CHECK(r.sam >= 0.0);
    std::string text = report_text(r);
    CHECK(text.find("mpsnr=") != std::string::npos);
    CHECK(text.find("band2.ssim=") != std::string::npos);
    CHECK(report_row(r).find('\t') != std::string::npos);
}

TEST_CASE("metrics reject shape mismatches") {
    Tensor a = random_tensor({2, 16, 16}, 17);
    Tensor b = random_tensor({3, 16, 16}, 18);
    CHECK_THROWS_AS(mpsnr(a, b), ConfigError);
    CHECK_THROWS_AS(mssim(a, b), ConfigError);
    CHECK_THROWS_AS(sam_degrees(a, b), ConfigError);
}
