#include "lumisplat/rasterizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "lumisplat/kernels.hpp"

namespace lumisplat {

namespace {

struct Tiling {
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<uint32_t>> bins;  // splat order within a bin follows the sorted walk
};

struct SplatAux {
    Sym2 conic;      // inverse covariance
    double radius;   // pixel radius beyond which alpha < alpha_skip
    bool usable;
};

// Sorted traversal order: depth ascending, ties by splat index.
std::vector<uint32_t> sorted_order(const std::vector<Splat2D>& splats) {
    std::vector<uint32_t> order(splats.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        if (splats[a].depth != splats[b].depth) return splats[a].depth < splats[b].depth;
        return a < b;
    });
    return order;
}

SplatAux make_aux(const Splat2D& s, const RasterConfig& cfg) {
    SplatAux aux{};
    const double det = s.cov2d.det();
    if (!(det > 1e-12) || s.alpha_base <= cfg.alpha_skip) {
        aux.usable = false;
        return aux;
    }
    aux.conic = s.cov2d.inverse();
    // alpha >= alpha_skip requires mahalanobis^2 <= 2*ln(o/skip); bound the
    // ellipse by the largest eigenvalue and pad a pixel for the box walls.
    const double m_max = 2.0 * std::log(s.alpha_base / cfg.alpha_skip);
    aux.radius = std::sqrt(s.cov2d.max_eigenvalue() * m_max) + 1.0;
    aux.usable = true;
    return aux;
}

Tiling build_tiling(const std::vector<Splat2D>& splats, const std::vector<uint32_t>& order,
                    const std::vector<SplatAux>& aux, const Camera& cam, const RasterConfig& cfg) {
    Tiling t;
    t.tiles_x = (cam.width + cfg.tile_size - 1) / cfg.tile_size;
    t.tiles_y = (cam.height + cfg.tile_size - 1) / cfg.tile_size;
    t.bins.resize(static_cast<size_t>(t.tiles_x) * t.tiles_y);

    for (uint32_t idx : order) {
        if (!aux[idx].usable) continue;
        const Splat2D& s = splats[idx];
        const double r = aux[idx].radius;
        const int x0 = std::max(0, static_cast<int>(std::floor(s.mean2d.x - r)));
        const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(s.mean2d.x + r)));
        const int y0 = std::max(0, static_cast<int>(std::floor(s.mean2d.y - r)));
        const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(s.mean2d.y + r)));
        if (x1 < x0 || y1 < y0) continue;
        for (int ty = y0 / cfg.tile_size; ty <= y1 / cfg.tile_size; ++ty)
            for (int tx = x0 / cfg.tile_size; tx <= x1 / cfg.tile_size; ++tx)
                t.bins[static_cast<size_t>(ty) * t.tiles_x + tx].push_back(idx);
    }
    return t;
}

int resolve_threads(int requested, size_t n_tiles) {
    int n = requested;
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    return static_cast<int>(std::min<size_t>(n, n_tiles));
}

// Runs fn(tile_index) over all tiles; each tile is processed by exactly one
// worker.
template <typename Fn>
void for_each_tile(size_t n_tiles, int threads, Fn&& fn) {
    const int n = resolve_threads(threads, n_tiles);
    if (n <= 1) {
        for (size_t i = 0; i < n_tiles; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (int w = 0; w < n; ++w)
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < n_tiles; i = next.fetch_add(1)) fn(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace

ProjectResult project(const DeformedGaussians& g, std::span<const Vec3> colors_raw,
                      std::span<const Vec3> colors_toned, const Camera& cam, const RasterConfig& cfg) {
    ProjectResult res;
    const size_t n = g.count();
    res.splats.reserve(n);
    res.gaussian_index.reserve(n);

    for (size_t i = 0; i < n; ++i) {
        const Vec3 mean{g.means[i * 3], g.means[i * 3 + 1], g.means[i * 3 + 2]};
        const Vec3 p = cam.to_camera(mean);
        if (p.z <= cfg.near_clip) continue;

        Splat2D s;
        s.mean2d = cam.project(p);
        s.depth = p.z;
        s.color_raw = colors_raw[i];
        s.color_toned = colors_toned[i];
        s.alpha_base = g.opacities[i];

        const Vec4 q{g.rotations[i * 4], g.rotations[i * 4 + 1], g.rotations[i * 4 + 2], g.rotations[i * 4 + 3]};
        const Mat3 rq = quat_to_rot(q);
        const Vec3 scale{g.scales[i * 3], g.scales[i * 3 + 1], g.scales[i * 3 + 2]};

        // Sigma_cam = R_w2c (A A^T) R_w2c^T with A = R_q * diag(s).
        Mat3 a;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) a(r, c) = rq(r, c) * scale[c];
        Mat3 sigma_w;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int k = 0; k < 3; ++k) acc += a(r, k) * a(c, k);
                sigma_w(r, c) = acc;
            }
        const Mat3 sigma_c = cam.rotation * sigma_w * cam.rotation.transposed();

        // Perspective Jacobian rows: d(mean2d)/d(p).
        const double iz = 1.0 / p.z;
        const double j00 = cam.fx * iz, j02 = -cam.fx * p.x * iz * iz;
        const double j11 = cam.fy * iz, j12 = -cam.fy * p.y * iz * iz;

        // V = J Sigma_cam J^T.
        const double t00 = j00 * sigma_c(0, 0) + j02 * sigma_c(2, 0);
        const double t02 = j00 * sigma_c(0, 2) + j02 * sigma_c(2, 2);
        const double t10 = j11 * sigma_c(1, 0) + j12 * sigma_c(2, 0);
        const double t11 = j11 * sigma_c(1, 1) + j12 * sigma_c(2, 1);
        const double t12 = j11 * sigma_c(1, 2) + j12 * sigma_c(2, 2);
        s.cov2d.xx = t00 * j00 + t02 * j02 + cfg.cov_dilation;
        s.cov2d.xy = t10 * j00 + t12 * j02;
        s.cov2d.yy = t11 * j11 + t12 * j12 + cfg.cov_dilation;

        res.splats.push_back(s);
        res.gaussian_index.push_back(static_cast<uint32_t>(i));
    }
    return res;
}

RenderOutput composite_forward(const std::vector<Splat2D>& splats, const Camera& cam, const RasterConfig& cfg,
                               bool retain_workspace) {
    RenderOutput out;
    out.color_raw = Image(cam.height, cam.width, 3);
    out.color_toned = Image(cam.height, cam.width, 3);
    out.depth = Image(cam.height, cam.width, 1);
    out.alpha_acc = Image(cam.height, cam.width, 1);
    out.transmittance = Image(cam.height, cam.width, 1, 1.0);
    out.has_workspace = retain_workspace;
    if (retain_workspace) out.contribs.assign(static_cast<size_t>(cam.height) * cam.width, {});
    if (splats.empty()) return out;

    const std::vector<uint32_t> order = sorted_order(splats);
    std::vector<SplatAux> aux(splats.size());
    for (size_t i = 0; i < splats.size(); ++i) aux[i] = make_aux(splats[i], cfg);
    const Tiling tiling = build_tiling(splats, order, aux, cam, cfg);

    for_each_tile(tiling.bins.size(), cfg.threads, [&](size_t tile) {
        const auto& bin = tiling.bins[tile];
        if (bin.empty()) return;
        const int tx = static_cast<int>(tile) % tiling.tiles_x;
        const int ty = static_cast<int>(tile) / tiling.tiles_x;
        const int px0 = tx * cfg.tile_size, px1 = std::min(cam.width, px0 + cfg.tile_size);
        const int py0 = ty * cfg.tile_size, py1 = std::min(cam.height, py0 + cfg.tile_size);

        std::vector<double> alpha_row(static_cast<size_t>(cfg.tile_size) + 4);

        for (uint32_t idx : bin) {
            const Splat2D& s = splats[idx];
            const SplatAux& ax = aux[idx];
            const int x0 = std::max(px0, static_cast<int>(std::floor(s.mean2d.x - ax.radius)));
            const int x1 = std::min(px1 - 1, static_cast<int>(std::ceil(s.mean2d.x + ax.radius)));
            const int y0 = std::max(py0, static_cast<int>(std::floor(s.mean2d.y - ax.radius)));
            const int y1 = std::min(py1 - 1, static_cast<int>(std::ceil(s.mean2d.y + ax.radius)));
            if (x1 < x0) continue;

            for (int y = y0; y <= y1; ++y) {
                const int n = x1 - x0 + 1;
                kernels::splat_alpha_row(s.mean2d.x, s.mean2d.y, ax.conic.xx, ax.conic.xy, ax.conic.yy,
                                         s.alpha_base, cfg.alpha_clamp, static_cast<double>(x0),
                                         static_cast<double>(y), n, alpha_row.data());
                for (int j = 0; j < n; ++j) {
                    const double a = alpha_row[j];
                    if (a < cfg.alpha_skip) continue;
                    const int x = x0 + j;
                    double& t = out.transmittance.at(y, x);
                    if (t < cfg.transmittance_stop) continue;
                    const double w = a * t;
                    out.color_raw.at(y, x, 0) += w * s.color_raw.x;
                    out.color_raw.at(y, x, 1) += w * s.color_raw.y;
                    out.color_raw.at(y, x, 2) += w * s.color_raw.z;
                    out.color_toned.at(y, x, 0) += w * s.color_toned.x;
                    out.color_toned.at(y, x, 1) += w * s.color_toned.y;
                    out.color_toned.at(y, x, 2) += w * s.color_toned.z;
                    out.depth.at(y, x) += w * s.depth;
                    out.alpha_acc.at(y, x) += w;
                    if (retain_workspace)
                        out.contribs[static_cast<size_t>(y) * cam.width + x].push_back({idx, a});
                    t *= 1.0 - a;
                }
            }
        }
    });
    return out;
}

SplatGrads composite_backward(const std::vector<Splat2D>& splats, const RenderOutput& out, const Camera& cam,
                              const RasterConfig& cfg, const Image* dL_dcolor_raw, const Image* dL_dcolor_toned,
                              const Image* dL_ddepth) {
    if (!out.has_workspace)
        throw Error("WorkspaceMissing", "composite_forward ran without workspace retention");

    SplatGrads grads(splats.size());
    if (splats.empty()) return grads;

    std::vector<SplatAux> aux(splats.size());
    for (size_t i = 0; i < splats.size(); ++i) aux[i] = make_aux(splats[i], cfg);

    const int tiles_x = (cam.width + cfg.tile_size - 1) / cfg.tile_size;
    const int tiles_y = (cam.height + cfg.tile_size - 1) / cfg.tile_size;
    const size_t n_tiles = static_cast<size_t>(tiles_x) * tiles_y;

    // Per-tile partial sums, merged in tile order after the parallel phase.
    std::vector<std::vector<uint32_t>> tile_touched(n_tiles);
    std::vector<SplatGrads> tile_grads;
    tile_grads.reserve(n_tiles);
    for (size_t i = 0; i < n_tiles; ++i) tile_grads.emplace_back(0);

    for_each_tile(n_tiles, cfg.threads, [&](size_t tile) {
        const int tx = static_cast<int>(tile) % tiles_x;
        const int ty = static_cast<int>(tile) / tiles_x;
        const int px0 = tx * cfg.tile_size, px1 = std::min(cam.width, px0 + cfg.tile_size);
        const int py0 = ty * cfg.tile_size, py1 = std::min(cam.height, py0 + cfg.tile_size);

        std::vector<int32_t> slot(splats.size(), -1);
        std::vector<uint32_t>& touched = tile_touched[tile];
        SplatGrads local(0);
        auto local_slot = [&](uint32_t idx) {
            if (slot[idx] < 0) {
                slot[idx] = static_cast<int32_t>(touched.size());
                touched.push_back(idx);
                local.mean2d.emplace_back();
                local.cov2d.emplace_back();
                local.depth.push_back(0.0);
                local.color_raw.emplace_back();
                local.color_toned.emplace_back();
                local.alpha_base.push_back(0.0);
            }
            return static_cast<size_t>(slot[idx]);
        };

        std::vector<double> t_prefix;
        for (int y = py0; y < py1; ++y) {
            for (int x = px0; x < px1; ++x) {
                const auto& list = out.contribs[static_cast<size_t>(y) * cam.width + x];
                if (list.empty()) continue;

                const Vec3 u_raw = dL_dcolor_raw ? Vec3{dL_dcolor_raw->at(y, x, 0), dL_dcolor_raw->at(y, x, 1),
                                                        dL_dcolor_raw->at(y, x, 2)}
                                                 : Vec3{};
                const Vec3 u_tone = dL_dcolor_toned
                                        ? Vec3{dL_dcolor_toned->at(y, x, 0), dL_dcolor_toned->at(y, x, 1),
                                               dL_dcolor_toned->at(y, x, 2)}
                                        : Vec3{};
                const double u_d = dL_ddepth ? dL_ddepth->at(y, x) : 0.0;

                t_prefix.resize(list.size());
                double t = 1.0;
                for (size_t i = 0; i < list.size(); ++i) {
                    t_prefix[i] = t;
                    t *= 1.0 - list[i].alpha;
                }

                Vec3 suffix_raw{}, suffix_tone{};
                double suffix_depth = 0.0;
                for (size_t i = list.size(); i-- > 0;) {
                    const uint32_t idx = list[i].splat;
                    const double a = list[i].alpha;
                    const double ti = t_prefix[i];
                    const double w = a * ti;
                    const Splat2D& s = splats[idx];
                    const size_t ls = local_slot(idx);

                    local.color_raw[ls] += u_raw * w;
                    local.color_toned[ls] += u_tone * w;
                    local.depth[ls] += u_d * w;

                    const double inv_rest = 1.0 / (1.0 - a);
                    double dL_da = u_raw.x * (ti * s.color_raw.x - suffix_raw.x * inv_rest) +
                                   u_raw.y * (ti * s.color_raw.y - suffix_raw.y * inv_rest) +
                                   u_raw.z * (ti * s.color_raw.z - suffix_raw.z * inv_rest) +
                                   u_tone.x * (ti * s.color_toned.x - suffix_tone.x * inv_rest) +
                                   u_tone.y * (ti * s.color_toned.y - suffix_tone.y * inv_rest) +
                                   u_tone.z * (ti * s.color_toned.z - suffix_tone.z * inv_rest) +
                                   u_d * (ti * s.depth - suffix_depth * inv_rest);

                    suffix_raw += s.color_raw * w;
                    suffix_tone += s.color_toned * w;
                    suffix_depth += s.depth * w;

                    if (a >= cfg.alpha_clamp) continue;  // clamp is flat

                    local.alpha_base[ls] += dL_da * (a / s.alpha_base);

                    const Vec2 d{static_cast<double>(x) - s.mean2d.x, static_cast<double>(y) - s.mean2d.y};
                    const Sym2& q = aux[idx].conic;
                    const Vec2 qd{q.xx * d.x + q.xy * d.y, q.xy * d.x + q.yy * d.y};
                    const double g_m = -0.5 * a * dL_da;  // m = d^T conic d

                    local.mean2d[ls] += qd * (dL_da * a);
                    // dL/dSigma (full-matrix) = -g_m * (conic d)(conic d)^T
                    local.cov2d[ls].xx += -g_m * qd.x * qd.x;
                    local.cov2d[ls].xy += -g_m * qd.x * qd.y;
                    local.cov2d[ls].yy += -g_m * qd.y * qd.y;
                }
            }
        }
        tile_grads[tile] = std::move(local);
    });

    for (size_t tile = 0; tile < n_tiles; ++tile) {
        const auto& touched = tile_touched[tile];
        const SplatGrads& local = tile_grads[tile];
        for (size_t k = 0; k < touched.size(); ++k) {
            const uint32_t idx = touched[k];
            grads.mean2d[idx] += local.mean2d[k];
            grads.cov2d[idx].xx += local.cov2d[k].xx;
            grads.cov2d[idx].xy += local.cov2d[k].xy;
            grads.cov2d[idx].yy += local.cov2d[k].yy;
            grads.depth[idx] += local.depth[k];
            grads.color_raw[idx] += local.color_raw[k];
            grads.color_toned[idx] += local.color_toned[k];
            grads.alpha_base[idx] += local.alpha_base[k];
        }
    }
    return grads;
}

void project_backward(const DeformedGaussians& g, const ProjectResult& proj, const Camera& cam,
                      const RasterConfig& cfg, const SplatGrads& sg, DeformedGrads& dg, std::span<Vec3> g_colors_raw,
                      std::span<Vec3> g_colors_toned) {
    (void)cfg;
    for (size_t k = 0; k < proj.splats.size(); ++k) {
        const uint32_t i = proj.gaussian_index[k];

        g_colors_raw[i] += sg.color_raw[k];
        g_colors_toned[i] += sg.color_toned[k];
        dg.opacities[i] += sg.alpha_base[k];

        const Vec3 mean{g.means[i * 3], g.means[i * 3 + 1], g.means[i * 3 + 2]};
        const Vec3 p = cam.to_camera(mean);
        const double iz = 1.0 / p.z;

        Vec3 g_p{};
        g_p.x += sg.mean2d[k].x * cam.fx * iz;
        g_p.y += sg.mean2d[k].y * cam.fy * iz;
        g_p.z += -sg.mean2d[k].x * cam.fx * p.x * iz * iz - sg.mean2d[k].y * cam.fy * p.y * iz * iz;
        g_p.z += sg.depth[k];

        // Recompute the covariance chain.
        const Vec4 q{g.rotations[i * 4], g.rotations[i * 4 + 1], g.rotations[i * 4 + 2], g.rotations[i * 4 + 3]};
        const Mat3 rq = quat_to_rot(q);
        const Vec3 scale{g.scales[i * 3], g.scales[i * 3 + 1], g.scales[i * 3 + 2]};
        Mat3 a;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) a(r, c) = rq(r, c) * scale[c];
        Mat3 sigma_w;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int kk = 0; kk < 3; ++kk) acc += a(r, kk) * a(c, kk);
                sigma_w(r, c) = acc;
            }
        const Mat3 sigma_c = cam.rotation * sigma_w * cam.rotation.transposed();

        const double j00 = cam.fx * iz, j02 = -cam.fx * p.x * iz * iz;
        const double j11 = cam.fy * iz, j12 = -cam.fy * p.y * iz * iz;

        const double gxx = sg.cov2d[k].xx, gxy = sg.cov2d[k].xy, gyy = sg.cov2d[k].yy;

        // g_sigma_c = J^T G J with J rows (j00, 0, j02) and (0, j11, j12).
        Mat3 g_sigma_c;
        g_sigma_c(0, 0) = j00 * gxx * j00;
        g_sigma_c(0, 1) = j00 * gxy * j11;
        g_sigma_c(0, 2) = j00 * (gxx * j02 + gxy * j12);
        g_sigma_c(1, 0) = j11 * gxy * j00;
        g_sigma_c(1, 1) = j11 * gyy * j11;
        g_sigma_c(1, 2) = j11 * (gxy * j02 + gyy * j12);
        g_sigma_c(2, 0) = j02 * gxx * j00 + j12 * gxy * j00;
        g_sigma_c(2, 1) = j02 * gxy * j11 + j12 * gyy * j11;
        g_sigma_c(2, 2) = j02 * (gxx * j02 + gxy * j12) + j12 * (gxy * j02 + gyy * j12);

        // g_J = 2 G J Sigma_c.
        const double js00 = j00 * sigma_c(0, 0) + j02 * sigma_c(2, 0);
        const double js01 = j00 * sigma_c(0, 1) + j02 * sigma_c(2, 1);
        const double js02 = j00 * sigma_c(0, 2) + j02 * sigma_c(2, 2);
        const double js10 = j11 * sigma_c(1, 0) + j12 * sigma_c(2, 0);
        const double js11 = j11 * sigma_c(1, 1) + j12 * sigma_c(2, 1);
        const double js12 = j11 * sigma_c(1, 2) + j12 * sigma_c(2, 2);
        const double gj00 = 2.0 * (gxx * js00 + gxy * js10);
        const double gj02 = 2.0 * (gxx * js02 + gxy * js12);
        const double gj11 = 2.0 * (gxy * js01 + gyy * js11);
        const double gj12 = 2.0 * (gxy * js02 + gyy * js12);

        g_p.x += gj02 * (-cam.fx * iz * iz);
        g_p.y += gj12 * (-cam.fy * iz * iz);
        g_p.z += gj00 * (-cam.fx * iz * iz) + gj02 * (2.0 * cam.fx * p.x * iz * iz * iz) +
                 gj11 * (-cam.fy * iz * iz) + gj12 * (2.0 * cam.fy * p.y * iz * iz * iz);

        const Vec3 g_mean = cam.rotation.transposed_mul(g_p);
        dg.means[i * 3] += g_mean.x;
        dg.means[i * 3 + 1] += g_mean.y;
        dg.means[i * 3 + 2] += g_mean.z;

        const Mat3 g_sigma_w = cam.rotation.transposed() * g_sigma_c * cam.rotation;

        // Sigma_w = A A^T: g_A = (g_sigma_w + g_sigma_w^T) A.
        Mat3 g_a;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int kk = 0; kk < 3; ++kk) acc += (g_sigma_w(r, kk) + g_sigma_w(kk, r)) * a(kk, c);
                g_a(r, c) = acc;
            }

        Mat3 g_rq;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) g_rq(r, c) = g_a(r, c) * scale[c];
        for (int c = 0; c < 3; ++c) {
            double acc = 0.0;
            for (int r = 0; r < 3; ++r) acc += rq(r, c) * g_a(r, c);
            dg.scales[i * 3 + c] += acc;
        }

        const Vec4 g_q = quat_to_rot_backward(q, g_rq);
        for (int c = 0; c < 4; ++c) dg.rotations[i * 4 + c] += g_q[c];
    }
}

}  // namespace lumisplat
