#include "lumisplat/illumination.hpp"

#include <cmath>

#include "doctest.h"

using namespace lumisplat;

TEST_CASE("estimate_prior on constant images") {
    SUBCASE("mid gray 0.4") {
        const Image img(20, 20, 3, 0.4);
        const IlluminationPrior p = estimate_prior(img);
        // forward: 0.4/0.4 = 1; reverse: 1 - 0.6/0.6 = 0; prior = 0.5
        CHECK(p.mean_prior == doctest::Approx(0.5));
        CHECK(p.prior.at(7, 3, 1) == doctest::Approx(0.5));
    }
    SUBCASE("saturated white") {
        const Image img(20, 20, 3, 1.0);
        const IlluminationPrior p = estimate_prior(img);
        CHECK(p.mean_prior == doctest::Approx(1.0));
    }
    SUBCASE("black") {
        const Image img(20, 20, 3, 0.0);
        const IlluminationPrior p = estimate_prior(img);
        CHECK(p.mean_prior == doctest::Approx(0.0));
    }
}

TEST_CASE("estimate_prior output stays in [0,1]") {
    Image img(24, 24, 3);
    for (int r = 0; r < 24; ++r)
        for (int c = 0; c < 24; ++c)
            for (int k = 0; k < 3; ++k)
                img.at(r, c, k) = 0.5 + 0.5 * std::sin(0.3 * r + 0.7 * c + k);
    const IlluminationPrior p = estimate_prior(img);
    for (size_t i = 0; i < p.prior.size(); ++i) {
        CHECK(p.prior.data()[i] >= 0.0);
        CHECK(p.prior.data()[i] <= 1.0);
    }
}

TEST_CASE("classify_ic follows the prior comparison") {
    SUBCASE("boundary classifies dark") {
        const Image img(8, 8, 3, 0.37);
        IlluminationPrior p;
        p.mean_prior = img.mean();  // exactly equal
        CHECK(classify_ic(img, p) == ICLabel::Dark);
    }
    SUBCASE("constant 0.4 image is dark via its own prior") {
        const Image img(20, 20, 3, 0.4);
        CHECK(classify_ic(img, estimate_prior(img)) == ICLabel::Dark);
    }
    SUBCASE("constant 0.9 image is bright via its own prior") {
        const Image img(20, 20, 3, 0.9);
        const IlluminationPrior p = estimate_prior(img);
        CHECK(p.mean_prior < 0.9);
        CHECK(classify_ic(img, p) == ICLabel::Bright);
    }
}

TEST_CASE("region_enhance affine arithmetic") {
    // beta = 0.5, gamma = 0.25 on c = 0.5 gives 0.5 exactly; build a net whose
    // output layer is constant.
    Mlp net;
    DenseLayer l;
    l.in = 35;
    l.out = 2;
    l.act = Activation::Sigmoid;
    l.weights.assign(2 * 35, 0.0);
    l.biases = {0.0, logit(0.25)};
    net.layers.push_back(l);

    const std::vector<double> e(32, 0.3);
    const RegionResult res = region_enhance({0.5, 0.5, 0.5}, e, net);
    CHECK(res.beta == doctest::Approx(0.5));
    CHECK(res.gamma == doctest::Approx(0.25));
    for (int k = 0; k < 3; ++k) CHECK(res.c_tone[k] == doctest::Approx(0.5));
}

TEST_CASE("region_enhance zero-initialized output layer gives beta = gamma = 0.5") {
    Rng rng(1);
    Mlp net = Mlp::make({35, 64, 64, 2}, {Activation::Relu, Activation::Relu, Activation::Sigmoid}, rng);
    std::fill(net.layers.back().weights.begin(), net.layers.back().weights.end(), 0.0);
    std::fill(net.layers.back().biases.begin(), net.layers.back().biases.end(), 0.0);

    std::vector<double> e(32);
    for (double& v : e) v = rng.normal();
    const RegionResult res = region_enhance({0.9, 0.1, 0.4}, e, net);
    CHECK(res.beta == 0.5);
    CHECK(res.gamma == 0.5);
}

TEST_CASE("region_enhance output bounds") {
    Rng rng(2);
    const ConcealingNetworks nets = make_concealing_networks(32, 64, rng);
    std::vector<double> e(32);
    for (int trial = 0; trial < 100; ++trial) {
        for (double& v : e) v = rng.normal();
        const Vec3 c{rng.uniform(), rng.uniform(), rng.uniform()};
        const RegionResult res = region_enhance(c, e, trial % 2 ? nets.bright : nets.dark);
        CHECK(res.beta > 0.0);
        CHECK(res.beta < 1.0);
        CHECK(res.gamma > 0.0);
        CHECK(res.gamma < 1.0);
        for (int k = 0; k < 3; ++k) {
            CHECK(res.c_tone[k] > 0.0);
            CHECK(res.c_tone[k] < 2.0);
        }
    }
}

TEST_CASE("region_enhance gradients match finite differences") {
    Rng rng(3);
    Mlp net = Mlp::make({35, 16, 16, 2}, {Activation::Relu, Activation::Relu, Activation::Sigmoid}, rng);
    Vec3 c{0.3, 0.6, 0.8};
    std::vector<double> e(32);
    for (double& v : e) v = rng.normal();
    const Vec3 upstream{1.3, -0.7, 0.4};

    auto loss = [&]() {
        const RegionResult r = region_enhance(c, e, net);
        return upstream.x * r.c_tone.x + upstream.y * r.c_tone.y + upstream.z * r.c_tone.z;
    };

    const RegionResult fwd = region_enhance(c, e, net);
    Vec3 g_c{};
    std::vector<double> g_e(32, 0.0);
    MlpGrads g_net(net);
    region_enhance_backward(c, net, fwd, upstream, g_c, g_e, g_net);

    FdReport report = finite_diff_check(loss, &c.x, &g_c.x, 3);
    CHECK(report.max_rel_err < 1e-3);
    report = finite_diff_check(loss, e.data(), g_e.data(), e.size());
    CHECK(report.max_rel_err < 1e-3);
    for (size_t l = 0; l < net.layers.size(); ++l) {
        report = finite_diff_check(loss, net.layers[l].weights.data(), g_net.weights[l].data(),
                                   net.layers[l].weights.size());
        CHECK(report.max_rel_err < 1e-3);
    }
}

TEST_CASE("spatial_adjust identity with zero delta") {
    Rng rng(4);
    const Mlp net = make_spatial_network(32, 64, rng);  // zeroed output layer
    Image img(6, 6, 3);
    for (size_t i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform();
    const std::vector<double> e(32, 0.7);

    const SpatialResult res = spatial_adjust(img, e, net);
    CHECK(res.delta == 0.0);
    for (size_t i = 0; i < img.size(); ++i) CHECK(res.adjusted.data()[i] == img.data()[i]);
}

TEST_CASE("spatial curve fixed points and arithmetic") {
    // Constant-output net via a single tanh layer with fixed bias.
    auto curve_net = [](double delta) {
        Mlp net;
        DenseLayer l;
        l.in = 32;
        l.out = 1;
        l.act = Activation::Tanh;
        l.weights.assign(32, 0.0);
        l.biases = {std::atanh(delta)};
        net.layers.push_back(l);
        return net;
    };

    const std::vector<double> e(32, 0.0);
    Image img(2, 2, 1);
    img.at(0, 0) = 0.0;
    img.at(0, 1) = 1.0;
    img.at(1, 0) = 0.5;
    img.at(1, 1) = 0.25;

    const Mlp net = curve_net(0.4);
    const SpatialResult res = spatial_adjust(img, e, net);
    CHECK(res.delta == doctest::Approx(0.4));
    CHECK(res.adjusted.at(0, 0) == 0.0);  // curve fixed points
    CHECK(res.adjusted.at(0, 1) == 1.0);
    CHECK(res.adjusted.at(1, 0) == doctest::Approx(0.5 + 0.4 * 0.25));
}

TEST_CASE("spatial curve is monotone and maps [0,1] into [0,1]") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const double delta = rng.uniform(-0.999, 0.999);
        double prev = 0.0 + delta * 0.0;  // value at 0
        for (int i = 1; i <= 64; ++i) {
            const double v = i / 64.0;
            const double mapped = v + delta * v * (1.0 - v);
            CHECK(mapped > prev);
            CHECK(mapped >= 0.0);
            CHECK(mapped <= 1.0);
            prev = mapped;
        }
    }
}

TEST_CASE("spatial_adjust gradients match finite differences") {
    Rng rng(6);
    Mlp net = Mlp::make({32, 16, 16, 1}, {Activation::Relu, Activation::Relu, Activation::Tanh}, rng);
    Image img(5, 4, 3);
    for (size_t i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform();
    std::vector<double> e(32);
    for (double& v : e) v = rng.normal();

    Image upstream(5, 4, 3);
    for (size_t i = 0; i < upstream.size(); ++i) upstream.data()[i] = rng.uniform(-1.0, 1.0);

    auto loss = [&]() {
        const SpatialResult r = spatial_adjust(img, e, net);
        double total = 0.0;
        for (size_t i = 0; i < r.adjusted.size(); ++i) total += upstream.data()[i] * r.adjusted.data()[i];
        return total;
    };

    const SpatialResult fwd = spatial_adjust(img, e, net);
    Image g_img;
    std::vector<double> g_e(32, 0.0);
    MlpGrads g_net(net);
    spatial_adjust_backward(img, net, fwd, upstream, g_img, g_e, g_net);

    FdReport report = finite_diff_check(loss, img.data(), g_img.data(), img.size());
    CHECK(report.max_rel_err < 1e-3);
    report = finite_diff_check(loss, e.data(), g_e.data(), e.size());
    CHECK(report.max_rel_err < 1e-3);
    report = finite_diff_check(loss, net.layers[2].weights.data(), g_net.weights[2].data(),
                               net.layers[2].weights.size());
    CHECK(report.max_rel_err < 1e-3);
}
