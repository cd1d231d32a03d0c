#pragma once

#include <span>
#include <vector>

#include "lumisplat/camera.hpp"
#include "lumisplat/image.hpp"
#include "lumisplat/scene.hpp"
#include "lumisplat/vec.hpp"

namespace lumisplat {

struct Splat2D {
    Vec2 mean2d;        // pixels
    Sym2 cov2d;         // pixels^2, after low-pass dilation
    double depth = 0.0; // camera-space z
    Vec3 color_raw;
    Vec3 color_toned;
    double alpha_base = 0.0;  // deformed opacity
};

struct ProjectResult {
    std::vector<Splat2D> splats;
    std::vector<uint32_t> gaussian_index;  // splat -> source gaussian
};

struct RasterConfig {
    double near_clip = 0.01;
    double alpha_clamp = 0.99;
    double alpha_skip = 1.0 / 255.0;
    double transmittance_stop = 1e-4;
    double cov_dilation = 0.3;
    int tile_size = 16;
    int threads = 1;  // <= 0 uses hardware concurrency
};

struct Contribution {
    uint32_t splat;
    double alpha;  // stored post-clamp
};

struct RenderOutput {
    Image color_raw;      // H x W x 3
    Image color_toned;    // H x W x 3
    Image depth;          // H x W
    Image alpha_acc;      // H x W
    Image transmittance;  // H x W, remaining T after the walk

    bool has_workspace = false;
    std::vector<std::vector<Contribution>> contribs;  // per pixel, front-to-back
};

// Per-splat gradients from compositing. cov2d gradients use the full-matrix
// convention: `xy` is dL/dSigma01 for Sigma treated as a full 2x2 matrix
// whose two off-diagonal entries vary together in the forward pass.
struct SplatGrads {
    std::vector<Vec2> mean2d;
    std::vector<Sym2> cov2d;
    std::vector<double> depth;
    std::vector<Vec3> color_raw;
    std::vector<Vec3> color_toned;
    std::vector<double> alpha_base;

    explicit SplatGrads(size_t n = 0)
        : mean2d(n), cov2d(n), depth(n, 0.0), color_raw(n), color_toned(n), alpha_base(n, 0.0) {}
};

// EWA projection of deformed Gaussians to screen space. Gaussians behind the
// near plane are culled, not errors.
ProjectResult project(const DeformedGaussians& g, std::span<const Vec3> colors_raw,
                      std::span<const Vec3> colors_toned, const Camera& cam, const RasterConfig& cfg);

// Front-to-back alpha compositing over 16x16 tiles. Depth ties break by
// ascending splat index. With retain_workspace the output carries per-pixel
// contributor lists for the backward pass.
RenderOutput composite_forward(const std::vector<Splat2D>& splats, const Camera& cam, const RasterConfig& cfg,
                               bool retain_workspace);

// Exact adjoint of composite_forward. Throws Error("WorkspaceMissing") when
// the forward pass ran without workspace retention. Null upstream images are
// treated as zero.
SplatGrads composite_backward(const std::vector<Splat2D>& splats, const RenderOutput& out, const Camera& cam,
                              const RasterConfig& cfg, const Image* dL_dcolor_raw, const Image* dL_dcolor_toned,
                              const Image* dL_ddepth);

// Chains splat gradients back to deformed Gaussian parameters and colors.
void project_backward(const DeformedGaussians& g, const ProjectResult& proj, const Camera& cam,
                      const RasterConfig& cfg, const SplatGrads& sg, DeformedGrads& dg, std::span<Vec3> g_colors_raw,
                      std::span<Vec3> g_colors_toned);

}  // namespace lumisplat
