#include "lumisplat/illumination.hpp"

#include <algorithm>
#include <cmath>

namespace lumisplat {

namespace {

constexpr int kBoxRadius = 8;  // 17x17 window
constexpr double kIlluminationFloor = 0.05;

// Border-aware box mean of a single-channel image.
Image box_mean(const Image& src, int radius) {
    const int h = src.height(), w = src.width();
    // Summed-area table with a zero border row/column.
    std::vector<double> sat(static_cast<size_t>(h + 1) * (w + 1), 0.0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            sat[(r + 1) * static_cast<size_t>(w + 1) + (c + 1)] =
                src.at(r, c) + sat[r * static_cast<size_t>(w + 1) + (c + 1)] +
                sat[(r + 1) * static_cast<size_t>(w + 1) + c] - sat[r * static_cast<size_t>(w + 1) + c];

    Image out(h, w, 1);
    for (int r = 0; r < h; ++r) {
        const int r0 = std::max(0, r - radius), r1 = std::min(h - 1, r + radius);
        for (int c = 0; c < w; ++c) {
            const int c0 = std::max(0, c - radius), c1 = std::min(w - 1, c + radius);
            const double total = sat[(r1 + 1) * static_cast<size_t>(w + 1) + (c1 + 1)] -
                                 sat[r0 * static_cast<size_t>(w + 1) + (c1 + 1)] -
                                 sat[(r1 + 1) * static_cast<size_t>(w + 1) + c0] +
                                 sat[r0 * static_cast<size_t>(w + 1) + c0];
            out.at(r, c) = total / ((r1 - r0 + 1) * (c1 - c0 + 1));
        }
    }
    return out;
}

Image max_channel(const Image& img, bool inverted) {
    Image out(img.height(), img.width(), 1);
    for (int r = 0; r < img.height(); ++r)
        for (int c = 0; c < img.width(); ++c) {
            double m = 0.0;
            for (int ch = 0; ch < img.channels(); ++ch) {
                const double v = inverted ? 1.0 - img.at(r, c, ch) : img.at(r, c, ch);
                m = std::max(m, v);
            }
            out.at(r, c) = m;
        }
    return out;
}

}  // namespace

IlluminationPrior estimate_prior(const Image& image) {
    const Image light = box_mean(max_channel(image, false), kBoxRadius);
    const Image light_inv = box_mean(max_channel(image, true), kBoxRadius);

    IlluminationPrior prior;
    prior.prior = Image(image.height(), image.width(), image.channels());
    for (int r = 0; r < image.height(); ++r)
        for (int c = 0; c < image.width(); ++c) {
            const double lf = std::max(light.at(r, c), kIlluminationFloor);
            const double lr = std::max(light_inv.at(r, c), kIlluminationFloor);
            for (int ch = 0; ch < image.channels(); ++ch) {
                const double v = image.at(r, c, ch);
                const double forward = clamp01(v / lf);
                const double reverse = 1.0 - clamp01((1.0 - v) / lr);
                prior.prior.at(r, c, ch) = 0.5 * (forward + reverse);
            }
        }
    prior.mean_prior = prior.prior.mean();
    return prior;
}

ICLabel classify_ic(const Image& image, const IlluminationPrior& prior) {
    return image.mean() > prior.mean_prior ? ICLabel::Bright : ICLabel::Dark;
}

ConcealingNetworks make_concealing_networks(int embed_dim, int hidden, Rng& rng) {
    const std::vector<int> dims{3 + embed_dim, hidden, hidden, 2};
    const std::vector<Activation> acts{Activation::Relu, Activation::Relu, Activation::Sigmoid};
    ConcealingNetworks nets{Mlp::make(dims, acts, rng), Mlp::make(dims, acts, rng)};
    // Start near identity: beta ~ 0.88, gamma ~ 0.12.
    for (Mlp* net : {&nets.bright, &nets.dark}) {
        net->layers.back().biases[0] = 2.0;
        net->layers.back().biases[1] = -2.0;
    }
    return nets;
}

Mlp make_spatial_network(int embed_dim, int hidden, Rng& rng) {
    Mlp net = Mlp::make({embed_dim, hidden, hidden, 1}, {Activation::Relu, Activation::Relu, Activation::Tanh}, rng);
    // delta = 0 at start: the curve begins as the identity.
    std::fill(net.layers.back().weights.begin(), net.layers.back().weights.end(), 0.0);
    return net;
}

RegionResult region_enhance(const Vec3& color, std::span<const double> embedding, const Mlp& net) {
    std::vector<double> input;
    input.reserve(3 + embedding.size());
    input.insert(input.end(), {color.x, color.y, color.z});
    input.insert(input.end(), embedding.begin(), embedding.end());

    RegionResult res;
    mlp_forward(net, input, res.trace);
    res.beta = res.trace.output()[0];
    res.gamma = res.trace.output()[1];
    res.c_tone = color * res.beta + Vec3{res.gamma, res.gamma, res.gamma};
    return res;
}

void region_enhance_backward(const Vec3& color, const Mlp& net, const RegionResult& fwd, const Vec3& g_c_tone,
                             Vec3& g_color, std::span<double> g_embedding, MlpGrads& g_net) {
    // Affine path.
    g_color += g_c_tone * fwd.beta;
    const double g_beta = g_c_tone.x * color.x + g_c_tone.y * color.y + g_c_tone.z * color.z;
    const double g_gamma = g_c_tone.x + g_c_tone.y + g_c_tone.z;

    // Network path.
    const double upstream[2] = {g_beta, g_gamma};
    const std::vector<double> g_input = mlp_backward(net, fwd.trace, std::span<const double>(upstream, 2), g_net);
    g_color += Vec3{g_input[0], g_input[1], g_input[2]};
    for (size_t i = 0; i < g_embedding.size(); ++i) g_embedding[i] += g_input[3 + i];
}

SpatialResult spatial_adjust(const Image& c_tone, std::span<const double> embedding, const Mlp& net) {
    SpatialResult res;
    mlp_forward(net, embedding, res.trace);
    res.delta = res.trace.output()[0];

    res.adjusted = c_tone;
    double* out = res.adjusted.data();
    for (size_t i = 0; i < res.adjusted.size(); ++i) {
        const double v = out[i];
        out[i] = v + res.delta * v * (1.0 - v);
    }
    return res;
}

void spatial_adjust_backward(const Image& c_tone, const Mlp& net, const SpatialResult& fwd, const Image& g_adjusted,
                             Image& g_c_tone, std::span<double> g_embedding, MlpGrads& g_net) {
    g_c_tone = Image(c_tone.height(), c_tone.width(), c_tone.channels());
    double g_delta = 0.0;
    const double* v = c_tone.data();
    const double* up = g_adjusted.data();
    double* gv = g_c_tone.data();
    for (size_t i = 0; i < c_tone.size(); ++i) {
        gv[i] = up[i] * (1.0 + fwd.delta * (1.0 - 2.0 * v[i]));
        g_delta += up[i] * v[i] * (1.0 - v[i]);
    }

    const std::vector<double> g_input =
        mlp_backward(net, fwd.trace, std::span<const double>(&g_delta, 1), g_net);
    for (size_t i = 0; i < g_embedding.size(); ++i) g_embedding[i] += g_input[i];
}

}  // namespace lumisplat
