#pragma once

#include "lumisplat/image.hpp"

namespace lumisplat {

struct LossWeights {
    double lambda_depth = 0.01;
    double lambda_tv = 0.01;
    double exposure_target = 0.6;
    int pool_window = 16;
};

// Anisotropic total variation: mean absolute vertical difference plus mean
// absolute horizontal difference, channels included in each mean. Throws
// Error("TooSmall") when either image side is below 2.
double tv(const Image& image);

// Accumulates weight * d(tv)/d(image) into grad (same shape as image) and
// returns the tv value. Exact ties carry subgradient 0.
double tv_backward(const Image& image, double weight, Image& grad);

struct LossResult {
    double value = 0.0;
    Image grad;  // w.r.t. the predicted image
};

// Masked L1 over {mask=1} pixels and channels, plus lambda_tv * tv(pred).
// Throws Error("EmptyMask") when the mask is all zero.
LossResult color_loss(const Image& pred_tone, const Image& target, const Image& mask, const LossWeights& w);

// lambda_depth * masked L1 of per-image max-normalized depths, plus
// lambda_tv * tv(pred). The maxima are differentiable reductions: gradient
// flows to the (first, row-major) argmax pixel. Throws
// Error("DegenerateDepth") when either max is at or below 1e-8.
LossResult depth_loss(const Image& pred_depth, const Image& target_depth, const Image& mask, const LossWeights& w);

// Squared deviation of pooled gray-level window averages from the exposure
// target, mean over windows. Windows of pool_window pixels tile the
// row-major flattened gray image; a remainder window averages over its
// actual length.
LossResult exposure_loss(const Image& pred_raw, const LossWeights& w);

inline double total_loss(double color, double depth, double exposure, bool use_exposure) {
    return color + depth + (use_exposure ? exposure : 0.0);
}

}  // namespace lumisplat
