#pragma once

#include <cstdint>
#include <vector>

#include "lumisplat/camera.hpp"
#include "lumisplat/image.hpp"
#include "lumisplat/rng.hpp"
#include "lumisplat/vec.hpp"

namespace lumisplat {

// Optimizable Gaussian scene. All arrays are row-aligned: index i addresses
// the same Gaussian everywhere, including the deformation coefficients.
struct GaussianSet {
    std::vector<double> means;           // N x 3, world space
    std::vector<double> rot_raw;         // N x 4, unnormalized quaternion (w, x, y, z)
    std::vector<double> log_scales;      // N x 3, scale = exp(log_scale)
    std::vector<double> opacity_logits;  // N, opacity = sigmoid(logit)
    std::vector<double> color_logits;    // N x 3, color = sigmoid(logit)

    size_t count() const { return opacity_logits.size(); }
};

// Per-Gaussian temporal Fourier basis over t in [0, 1].
// Coefficient layout per (gaussian, axis): [a_1, c_1, a_2, c_2, ...] where the
// order-b contribution is a_b*sin(2*pi*b*t) + c_b*cos(2*pi*b*t). B = 0 means a
// static scene.
struct DeformationField {
    int order = 0;                      // B
    std::vector<double> mean_coeffs;    // N x 3 x 2B
    std::vector<double> scale_coeffs;   // N x 3 x 2B
    std::vector<double> opacity_coeffs; // N x 2B

    static DeformationField zeros(size_t n, int order);
};

struct DeformedGaussians {
    std::vector<double> means;      // N x 3
    std::vector<double> rotations;  // N x 4, unit quaternions
    std::vector<double> scales;     // N x 3, > 0
    std::vector<double> opacities;  // N, in (0, 1)

    size_t count() const { return opacities.size(); }
};

// Gradients with respect to the deformed values, filled by the render
// backward pass and consumed by deform_backward.
struct DeformedGrads {
    std::vector<double> means;
    std::vector<double> rotations;  // w.r.t. the unit quaternion
    std::vector<double> scales;
    std::vector<double> opacities;

    explicit DeformedGrads(size_t n = 0)
        : means(n * 3, 0.0), rotations(n * 4, 0.0), scales(n * 3, 0.0), opacities(n, 0.0) {}
};

struct SceneGrads {
    std::vector<double> means;
    std::vector<double> rot_raw;
    std::vector<double> log_scales;
    std::vector<double> opacity_logits;
    std::vector<double> color_logits;
    std::vector<double> mean_coeffs;
    std::vector<double> scale_coeffs;
    std::vector<double> opacity_coeffs;

    SceneGrads() = default;
    SceneGrads(size_t n, int order);
};

DeformedGaussians deform(const GaussianSet& set, const DeformationField& field, double t);

// Accumulates into grads; requires the same (set, field, t) as the forward call.
void deform_backward(const GaussianSet& set, const DeformationField& field, double t, const DeformedGrads& up,
                     SceneGrads& grads);

struct FrameGeometry {
    Image image;   // H x W x 3 in [0, 1]
    Image depth;   // H x W, 0 marks invalid
    Image mask;    // H x W, 1 = keep
    Camera camera;
};

// One Gaussian per sampled pixel. Throws Error("EmptyInit") when no pixel
// qualifies.
void init_from_depth(const FrameGeometry& frame, int stride, int fourier_order, GaussianSet& set,
                     DeformationField& field);

struct DensifyConfig {
    double grad_threshold = 2e-4;
    double prune_opacity = 5e-3;
    double split_scale_limit = 0.0;  // max activated scale above which a split replaces a clone
    double split_scale_shrink = 1.6;
};

struct DensifyStats {
    size_t cloned = 0;
    size_t split = 0;
    size_t pruned = 0;
};

// Row edit applied to the set, the field and any optimizer state that must
// stay aligned with them. For each output row, `source[i]` names the row it
// was copied from. Rows below `kept` are survivors (optimizer moments carry
// over); rows at or past `kept` are fresh clones and split children.
struct RowEdit {
    std::vector<uint32_t> source;
    size_t kept = 0;
};

DensifyStats densify_and_prune(GaussianSet& set, DeformationField& field, const std::vector<double>& grads,
                               const DensifyConfig& cfg, Rng& rng, RowEdit* edit = nullptr);

double scene_extent(const GaussianSet& set);

}  // namespace lumisplat
