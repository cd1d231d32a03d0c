#include "lumisplat/metrics.hpp"

#include <cmath>

#include "doctest.h"
#include "lumisplat/rng.hpp"
#include "lumisplat/vec.hpp"

using namespace lumisplat;

TEST_CASE("psnr formula and cap") {
    SUBCASE("identical images hit the cap") {
        Image img(12, 12, 3, 0.5);
        CHECK(psnr(img, img) == 100.0);
    }
    SUBCASE("mse 0.01 gives 20 dB") {
        const Image a(12, 12, 3, 0.45);
        const Image b(12, 12, 3, 0.55);
        CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-4));
    }
    SUBCASE("masked-out differences are invisible") {
        Image a(12, 12, 3, 0.4);
        Image b = a;
        Image mask(12, 12, 1, 1.0);
        for (int c = 0; c < 12; ++c) {
            b.at(3, c, 0) = 1.0;
            mask.at(3, c) = 0.0;
        }
        CHECK(psnr(a, b, &mask) == 100.0);
        CHECK(psnr(a, b) < 100.0);
    }
    SUBCASE("empty mask throws") {
        const Image a(4, 4, 3, 0.4);
        const Image mask(4, 4, 1, 0.0);
        CHECK_THROWS_WITH_AS(psnr(a, a, &mask), doctest::Contains("EmptyMask"), Error);
    }
}

TEST_CASE("psnr is symmetric and decreasing in error") {
    Rng rng(1);
    Image a(16, 16, 3), b(16, 16, 3), c(16, 16, 3);
    for (size_t i = 0; i < a.size(); ++i) {
        a.data()[i] = rng.uniform();
        b.data()[i] = clamp01(a.data()[i] + rng.uniform(-0.05, 0.05));
        c.data()[i] = clamp01(a.data()[i] + rng.uniform(-0.2, 0.2));
    }
    CHECK(psnr(a, b) == psnr(b, a));
    CHECK(psnr(a, b) > psnr(a, c));
}

TEST_CASE("ssim self-similarity is exactly 1") {
    Rng rng(2);
    Image img(16, 20, 3);
    for (size_t i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform();
    CHECK(ssim(img, img) == 1.0);
}

TEST_CASE("ssim of constant 0 vs constant 1") {
    const Image a(16, 16, 1, 0.0);
    const Image b(16, 16, 1, 1.0);
    // (C1 * C2) / ((1 + C1) * C2) = C1 / (1 + C1)
    const double c1 = 1e-4;
    CHECK(ssim(a, b) == doctest::Approx(c1 / (1.0 + c1)).epsilon(1e-9));
}

TEST_CASE("ssim tolerates tiny noise") {
    Rng rng(3);
    Image a(24, 24, 1);
    for (size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(0.2, 0.8);
    Image b = a;
    for (size_t i = 0; i < b.size(); ++i) b.data()[i] += 1e-4 * rng.normal();
    CHECK(ssim(a, b) >= 0.999);
}

TEST_CASE("ssim rejects images below the window size") {
    const Image img(8, 8, 1, 0.5);
    CHECK_THROWS_WITH_AS(ssim(img, img), doctest::Contains("TooSmall"), Error);
}

TEST_CASE("eval report aggregates and serializes") {
    EvalReport report;
    report.add("a.png", 30.0, 0.9);
    report.add("b.png", 20.0, 0.7);
    report.finalize();
    CHECK(report.mean_psnr == doctest::Approx(25.0));
    CHECK(report.mean_ssim == doctest::Approx(0.8));

    const std::string tsv = report.to_tsv();
    CHECK(tsv.find("a.png\t") != std::string::npos);
    CHECK(tsv.find("mean\t") != std::string::npos);
    const std::string json = report.to_json();
    CHECK(json.find("\"mean_psnr\"") != std::string::npos);
}
