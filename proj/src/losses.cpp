#include "lumisplat/losses.hpp"

#include <cmath>
#include <cstddef>

namespace lumisplat {

namespace {

double sign_or_zero(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Pairwise summation; exact for power-of-two runs of equal values, which
// keeps the exposure fixed point at a constant target image exactly zero.
double pairwise_sum(const double* x, size_t n) {
    if (n == 0) return 0.0;
    if (n == 1) return x[0];
    if (n == 2) return x[0] + x[1];
    const size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

size_t mask_count(const Image& mask) {
    size_t n = 0;
    for (int r = 0; r < mask.height(); ++r)
        for (int c = 0; c < mask.width(); ++c)
            if (mask.at(r, c) >= 0.5) ++n;
    return n;
}

}  // namespace

double tv(const Image& image) {
    if (image.height() < 2 || image.width() < 2)
        throw Error("TooSmall", "tv needs at least a 2x2 image");
    const int h = image.height(), w = image.width(), ch = image.channels();
    double vert = 0.0, horiz = 0.0;
    for (int r = 0; r + 1 < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < ch; ++k) vert += std::fabs(image.at(r + 1, c, k) - image.at(r, c, k));
    for (int r = 0; r < h; ++r)
        for (int c = 0; c + 1 < w; ++c)
            for (int k = 0; k < ch; ++k) horiz += std::fabs(image.at(r, c + 1, k) - image.at(r, c, k));
    vert /= static_cast<double>(h - 1) * w * ch;
    horiz /= static_cast<double>(h) * (w - 1) * ch;
    return vert + horiz;
}

double tv_backward(const Image& image, double weight, Image& grad) {
    if (image.height() < 2 || image.width() < 2)
        throw Error("TooSmall", "tv needs at least a 2x2 image");
    const int h = image.height(), w = image.width(), ch = image.channels();
    const double norm_v = weight / (static_cast<double>(h - 1) * w * ch);
    const double norm_h = weight / (static_cast<double>(h) * (w - 1) * ch);

    double vert = 0.0, horiz = 0.0;
    for (int r = 0; r + 1 < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int k = 0; k < ch; ++k) {
                const double d = image.at(r + 1, c, k) - image.at(r, c, k);
                vert += std::fabs(d);
                const double s = sign_or_zero(d);
                grad.at(r + 1, c, k) += s * norm_v;
                grad.at(r, c, k) -= s * norm_v;
            }
    for (int r = 0; r < h; ++r)
        for (int c = 0; c + 1 < w; ++c)
            for (int k = 0; k < ch; ++k) {
                const double d = image.at(r, c + 1, k) - image.at(r, c, k);
                horiz += std::fabs(d);
                const double s = sign_or_zero(d);
                grad.at(r, c + 1, k) += s * norm_h;
                grad.at(r, c, k) -= s * norm_h;
            }
    return vert / (static_cast<double>(h - 1) * w * ch) + horiz / (static_cast<double>(h) * (w - 1) * ch);
}

LossResult color_loss(const Image& pred_tone, const Image& target, const Image& mask, const LossWeights& w) {
    const size_t m = mask_count(mask);
    if (m == 0) throw Error("EmptyMask", "color loss over an all-zero mask");

    LossResult res;
    res.grad = Image(pred_tone.height(), pred_tone.width(), pred_tone.channels());
    const double norm = 1.0 / (static_cast<double>(m) * pred_tone.channels());

    double l1 = 0.0;
    for (int r = 0; r < pred_tone.height(); ++r)
        for (int c = 0; c < pred_tone.width(); ++c) {
            if (mask.at(r, c) < 0.5) continue;
            for (int k = 0; k < pred_tone.channels(); ++k) {
                const double d = pred_tone.at(r, c, k) - target.at(r, c, k);
                l1 += std::fabs(d);
                res.grad.at(r, c, k) += sign_or_zero(d) * norm;
            }
        }
    res.value = l1 * norm + tv_backward(pred_tone, w.lambda_tv, res.grad) * w.lambda_tv;
    return res;
}

LossResult depth_loss(const Image& pred_depth, const Image& target_depth, const Image& mask, const LossWeights& w) {
    const size_t m = mask_count(mask);
    if (m == 0) throw Error("EmptyMask", "depth loss over an all-zero mask");

    const int h = pred_depth.height(), wd = pred_depth.width();
    double pred_max = 0.0, target_max = 0.0;
    int argmax_r = 0, argmax_c = 0;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < wd; ++c) {
            if (pred_depth.at(r, c) > pred_max) {
                pred_max = pred_depth.at(r, c);
                argmax_r = r;
                argmax_c = c;
            }
            target_max = std::max(target_max, target_depth.at(r, c));
        }
    if (pred_max <= 1e-8 || target_max <= 1e-8)
        throw Error("DegenerateDepth", "max depth at or below 1e-8");

    LossResult res;
    res.grad = Image(h, wd, 1);
    const double norm = w.lambda_depth / static_cast<double>(m);

    double l1 = 0.0;
    double sign_dot_pred = 0.0;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < wd; ++c) {
            if (mask.at(r, c) < 0.5) continue;
            const double d = pred_depth.at(r, c) / pred_max - target_depth.at(r, c) / target_max;
            l1 += std::fabs(d);
            const double s = sign_or_zero(d);
            res.grad.at(r, c) += s * norm / pred_max;
            sign_dot_pred += s * pred_depth.at(r, c);
        }
    res.grad.at(argmax_r, argmax_c) -= norm * sign_dot_pred / (pred_max * pred_max);

    res.value = l1 * norm + tv_backward(pred_depth, w.lambda_tv, res.grad) * w.lambda_tv;
    return res;
}

LossResult exposure_loss(const Image& pred_raw, const LossWeights& w) {
    const int h = pred_raw.height(), wd = pred_raw.width(), ch = pred_raw.channels();
    const size_t n = static_cast<size_t>(h) * wd;

    std::vector<double> gray(n);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < wd; ++c) {
            double s = 0.0;
            for (int k = 0; k < ch; ++k) s += pred_raw.at(r, c, k);
            gray[static_cast<size_t>(r) * wd + c] = s / ch;
        }

    const size_t window = static_cast<size_t>(w.pool_window);
    const size_t n_windows = (n + window - 1) / window;

    LossResult res;
    res.grad = Image(h, wd, ch);
    double loss = 0.0;
    for (size_t k = 0; k < n_windows; ++k) {
        const size_t begin = k * window;
        const size_t len = std::min(window, n - begin);
        const double avg = pairwise_sum(gray.data() + begin, len) / static_cast<double>(len);
        const double dev = avg - w.exposure_target;
        loss += dev * dev;

        const double g = 2.0 * dev / (static_cast<double>(n_windows) * static_cast<double>(len) * ch);
        for (size_t i = begin; i < begin + len; ++i) {
            const int r = static_cast<int>(i / wd), c = static_cast<int>(i % wd);
            for (int kk = 0; kk < ch; ++kk) res.grad.at(r, c, kk) += g;
        }
    }
    res.value = loss / static_cast<double>(n_windows);
    return res;
}

}  // namespace lumisplat
