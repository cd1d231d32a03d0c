#pragma once

#include <span>

#include "lumisplat/image.hpp"
#include "lumisplat/nn.hpp"
#include "lumisplat/vec.hpp"

namespace lumisplat {

struct IlluminationPrior {
    Image prior;         // H x W x 3 in [0, 1]
    double mean_prior = 0.0;
};

enum class ICLabel { Bright, Dark };

// Dual illumination estimate: per-pixel max channel smoothed by a 17x17
// border-aware box filter drives a forward enhancement of the image and a
// reverse enhancement of its inversion; the prior is their average.
IlluminationPrior estimate_prior(const Image& image);

// Bright iff mean(image) > mean(prior); the boundary classifies Dark.
ICLabel classify_ic(const Image& image, const IlluminationPrior& prior);

// Networks decoding a view's illumination embedding. The concealing pair maps
// (color, embedding) to (beta, gamma); the spatial net maps the embedding to
// the curve strength delta.
struct ConcealingNetworks {
    Mlp bright;
    Mlp dark;

    const Mlp& select(ICLabel label) const { return label == ICLabel::Bright ? bright : dark; }
    Mlp& select(ICLabel label) { return label == ICLabel::Bright ? bright : dark; }
};

ConcealingNetworks make_concealing_networks(int embed_dim, int hidden, Rng& rng);
Mlp make_spatial_network(int embed_dim, int hidden, Rng& rng);

struct RegionResult {
    double beta = 0.0;
    double gamma = 0.0;
    Vec3 c_tone;
    MlpTrace trace;
};

// c_tone = beta * c + gamma with (beta, gamma) = net(c, e).
RegionResult region_enhance(const Vec3& color, std::span<const double> embedding, const Mlp& net);

// Gradients for both color paths (affine application and network input),
// the embedding and the network weights.
void region_enhance_backward(const Vec3& color, const Mlp& net, const RegionResult& fwd, const Vec3& g_c_tone,
                             Vec3& g_color, std::span<double> g_embedding, MlpGrads& g_net);

struct SpatialResult {
    double delta = 0.0;
    Image adjusted;
    MlpTrace trace;
};

// Per-pixel quadratic curve C + delta * C * (1 - C) with a single delta per
// view, delta = net(e).
SpatialResult spatial_adjust(const Image& c_tone, std::span<const double> embedding, const Mlp& net);

void spatial_adjust_backward(const Image& c_tone, const Mlp& net, const SpatialResult& fwd, const Image& g_adjusted,
                             Image& g_c_tone, std::span<double> g_embedding, MlpGrads& g_net);

}  // namespace lumisplat
