#include "lumisplat/scene.hpp"

#include <algorithm>
#include <cmath>

namespace lumisplat {

DeformationField DeformationField::zeros(size_t n, int order) {
    DeformationField f;
    f.order = order;
    f.mean_coeffs.assign(n * 3 * 2 * order, 0.0);
    f.scale_coeffs.assign(n * 3 * 2 * order, 0.0);
    f.opacity_coeffs.assign(n * 2 * order, 0.0);
    return f;
}

SceneGrads::SceneGrads(size_t n, int order) {
    means.assign(n * 3, 0.0);
    rot_raw.assign(n * 4, 0.0);
    log_scales.assign(n * 3, 0.0);
    opacity_logits.assign(n, 0.0);
    color_logits.assign(n * 3, 0.0);
    mean_coeffs.assign(n * 3 * 2 * order, 0.0);
    scale_coeffs.assign(n * 3 * 2 * order, 0.0);
    opacity_coeffs.assign(n * 2 * order, 0.0);
}

namespace {

// Basis values [sin(2*pi*t), cos(2*pi*t), sin(4*pi*t), cos(4*pi*t), ...].
std::vector<double> fourier_basis(int order, double t) {
    std::vector<double> basis(2 * order);
    for (int b = 1; b <= order; ++b) {
        const double phase = 2.0 * M_PI * b * t;
        basis[2 * (b - 1)] = std::sin(phase);
        basis[2 * (b - 1) + 1] = std::cos(phase);
    }
    return basis;
}

double series(const double* coeffs, const std::vector<double>& basis) {
    double s = 0.0;
    for (size_t k = 0; k < basis.size(); ++k) s += coeffs[k] * basis[k];
    return s;
}

}  // namespace

DeformedGaussians deform(const GaussianSet& set, const DeformationField& field, double t) {
    const size_t n = set.count();
    const int terms = 2 * field.order;
    const std::vector<double> basis = fourier_basis(field.order, t);

    DeformedGaussians out;
    out.means.resize(n * 3);
    out.rotations.resize(n * 4);
    out.scales.resize(n * 3);
    out.opacities.resize(n);

    for (size_t i = 0; i < n; ++i) {
        for (int a = 0; a < 3; ++a) {
            const size_t idx = i * 3 + a;
            double mean = set.means[idx];
            double log_scale = set.log_scales[idx];
            if (terms > 0) {
                mean += series(&field.mean_coeffs[idx * terms], basis);
                log_scale += series(&field.scale_coeffs[idx * terms], basis);
            }
            out.means[idx] = mean;
            out.scales[idx] = std::exp(log_scale);
        }

        double logit = set.opacity_logits[i];
        if (terms > 0) logit += series(&field.opacity_coeffs[i * terms], basis);
        out.opacities[i] = sigmoid(logit);

        const Vec4 q{set.rot_raw[i * 4], set.rot_raw[i * 4 + 1], set.rot_raw[i * 4 + 2], set.rot_raw[i * 4 + 3]};
        const double norm = q.norm();
        for (int k = 0; k < 4; ++k) out.rotations[i * 4 + k] = set.rot_raw[i * 4 + k] / norm;
    }
    return out;
}

void deform_backward(const GaussianSet& set, const DeformationField& field, double t, const DeformedGrads& up,
                     SceneGrads& grads) {
    const size_t n = set.count();
    const int terms = 2 * field.order;
    const std::vector<double> basis = fourier_basis(field.order, t);

    for (size_t i = 0; i < n; ++i) {
        for (int a = 0; a < 3; ++a) {
            const size_t idx = i * 3 + a;

            const double g_mean = up.means[idx];
            grads.means[idx] += g_mean;

            double log_scale = set.log_scales[idx];
            if (terms > 0) log_scale += series(&field.scale_coeffs[idx * terms], basis);
            const double g_log_scale = up.scales[idx] * std::exp(log_scale);
            grads.log_scales[idx] += g_log_scale;

            for (int k = 0; k < terms; ++k) {
                grads.mean_coeffs[idx * terms + k] += g_mean * basis[k];
                grads.scale_coeffs[idx * terms + k] += g_log_scale * basis[k];
            }
        }

        double logit = set.opacity_logits[i];
        if (terms > 0) logit += series(&field.opacity_coeffs[i * terms], basis);
        const double o = sigmoid(logit);
        const double g_logit = up.opacities[i] * o * (1.0 - o);
        grads.opacity_logits[i] += g_logit;
        for (int k = 0; k < terms; ++k) grads.opacity_coeffs[i * terms + k] += g_logit * basis[k];

        // Through q_hat = q / |q|.
        const Vec4 q{set.rot_raw[i * 4], set.rot_raw[i * 4 + 1], set.rot_raw[i * 4 + 2], set.rot_raw[i * 4 + 3]};
        const double norm = q.norm();
        const Vec4 gq{up.rotations[i * 4], up.rotations[i * 4 + 1], up.rotations[i * 4 + 2],
                      up.rotations[i * 4 + 3]};
        double dot = 0.0;
        for (int k = 0; k < 4; ++k) dot += gq[k] * q[k] / norm;
        for (int k = 0; k < 4; ++k) grads.rot_raw[i * 4 + k] += (gq[k] - dot * q[k] / norm) / norm;
    }
}

void init_from_depth(const FrameGeometry& frame, int stride, int fourier_order, GaussianSet& set,
                     DeformationField& field) {
    const Camera& cam = frame.camera;
    set = GaussianSet{};

    for (int r = 0; r < frame.depth.height(); r += stride) {
        for (int c = 0; c < frame.depth.width(); c += stride) {
            const double z = frame.depth.at(r, c);
            if (z <= 0.0 || frame.mask.at(r, c) < 0.5) continue;

            const Vec3 p_cam = cam.unproject(static_cast<double>(c), static_cast<double>(r), z);
            const Vec3 p_world = cam.to_world(p_cam);
            set.means.insert(set.means.end(), {p_world.x, p_world.y, p_world.z});
            set.rot_raw.insert(set.rot_raw.end(), {1.0, 0.0, 0.0, 0.0});

            const double log_scale = std::log(z * stride / cam.fx);
            set.log_scales.insert(set.log_scales.end(), {log_scale, log_scale, log_scale});
            set.opacity_logits.push_back(logit(0.1));
            for (int ch = 0; ch < 3; ++ch) {
                const double v = std::clamp(frame.image.at(r, c, ch), 1e-4, 1.0 - 1e-4);
                set.color_logits.push_back(logit(v));
            }
        }
    }

    if (set.count() == 0) throw Error("EmptyInit", "no masked pixel with positive depth");
    field = DeformationField::zeros(set.count(), fourier_order);
}

namespace {

void copy_rows(const std::vector<double>& src, std::vector<double>& dst, const std::vector<uint32_t>& sources,
               size_t row_len) {
    dst.resize(sources.size() * row_len);
    for (size_t i = 0; i < sources.size(); ++i)
        std::copy_n(src.begin() + sources[i] * row_len, row_len, dst.begin() + i * row_len);
}

}  // namespace

DensifyStats densify_and_prune(GaussianSet& set, DeformationField& field, const std::vector<double>& grads,
                               const DensifyConfig& cfg, Rng& rng, RowEdit* edit) {
    const size_t n = set.count();
    DensifyStats stats;

    std::vector<uint32_t> survivors;
    // (source row, jitter flag) for rows appended after the survivors.
    std::vector<std::pair<uint32_t, bool>> appended;

    for (size_t i = 0; i < n; ++i) {
        const double opacity = sigmoid(set.opacity_logits[i]);
        if (opacity < cfg.prune_opacity) {
            ++stats.pruned;
            continue;
        }
        const double max_scale =
            std::exp(std::max({set.log_scales[i * 3], set.log_scales[i * 3 + 1], set.log_scales[i * 3 + 2]}));
        if (grads[i] > cfg.grad_threshold) {
            if (max_scale > cfg.split_scale_limit) {
                appended.emplace_back(static_cast<uint32_t>(i), true);
                appended.emplace_back(static_cast<uint32_t>(i), true);
                ++stats.split;
                continue;  // parent replaced by its children
            }
            survivors.push_back(static_cast<uint32_t>(i));
            appended.emplace_back(static_cast<uint32_t>(i), false);
            ++stats.cloned;
            continue;
        }
        survivors.push_back(static_cast<uint32_t>(i));
    }

    if (survivors.empty() && appended.empty()) {
        // Pruning never empties the set: keep the most opaque Gaussian.
        size_t best = 0;
        for (size_t i = 1; i < n; ++i)
            if (set.opacity_logits[i] > set.opacity_logits[best]) best = i;
        survivors.push_back(static_cast<uint32_t>(best));
        --stats.pruned;
    }

    std::vector<uint32_t> sources = survivors;
    for (const auto& [src, jitter] : appended) sources.push_back(src);

    GaussianSet next;
    copy_rows(set.means, next.means, sources, 3);
    copy_rows(set.rot_raw, next.rot_raw, sources, 4);
    copy_rows(set.log_scales, next.log_scales, sources, 3);
    copy_rows(set.opacity_logits, next.opacity_logits, sources, 1);
    copy_rows(set.color_logits, next.color_logits, sources, 3);

    DeformationField next_field;
    next_field.order = field.order;
    const size_t terms = 2 * static_cast<size_t>(field.order);
    copy_rows(field.mean_coeffs, next_field.mean_coeffs, sources, 3 * terms);
    copy_rows(field.scale_coeffs, next_field.scale_coeffs, sources, 3 * terms);
    copy_rows(field.opacity_coeffs, next_field.opacity_coeffs, sources, terms);

    // Split children: sample a position inside the parent footprint and shrink.
    for (size_t k = 0; k < appended.size(); ++k) {
        if (!appended[k].second) continue;
        const size_t row = survivors.size() + k;
        const uint32_t src = appended[k].first;

        Vec4 q{set.rot_raw[src * 4], set.rot_raw[src * 4 + 1], set.rot_raw[src * 4 + 2], set.rot_raw[src * 4 + 3]};
        const double norm = q.norm();
        for (int j = 0; j < 4; ++j) q[j] /= norm;
        const Mat3 rot = quat_to_rot(q);

        Vec3 local{rng.normal() * std::exp(set.log_scales[src * 3]),
                   rng.normal() * std::exp(set.log_scales[src * 3 + 1]),
                   rng.normal() * std::exp(set.log_scales[src * 3 + 2])};
        const Vec3 offset = rot * local;
        for (int a = 0; a < 3; ++a) {
            next.means[row * 3 + a] = set.means[src * 3 + a] + offset[a];
            next.log_scales[row * 3 + a] = set.log_scales[src * 3 + a] - std::log(cfg.split_scale_shrink);
        }
    }

    set = std::move(next);
    field = std::move(next_field);
    if (edit) {
        edit->kept = survivors.size();
        edit->source = std::move(sources);
    }
    return stats;
}

double scene_extent(const GaussianSet& set) {
    const size_t n = set.count();
    if (n == 0) return 1.0;
    Vec3 centroid{0, 0, 0};
    for (size_t i = 0; i < n; ++i)
        centroid += Vec3{set.means[i * 3], set.means[i * 3 + 1], set.means[i * 3 + 2]};
    centroid = centroid * (1.0 / static_cast<double>(n));
    double extent = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const Vec3 d = Vec3{set.means[i * 3], set.means[i * 3 + 1], set.means[i * 3 + 2]} - centroid;
        extent = std::max(extent, d.norm());
    }
    return extent > 0.0 ? extent : 1.0;
}

}  // namespace lumisplat
