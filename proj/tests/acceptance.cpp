// Acceptance suite. Each criterion prints exactly one [PASS]/[FAIL] line;
// the process exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <vector>

#include "compositing_oracle.hpp"
#include "lumisplat/data_io.hpp"
#include "lumisplat/metrics.hpp"
#include "lumisplat/kernels.hpp"
#include "lumisplat/trainer.hpp"

using namespace lumisplat;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const char* name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, name, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("lumisplat_accept_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---------------------------------------------------------------------------
// Criterion 1: gradient correctness on a seeded 5-Gaussian scene
// ---------------------------------------------------------------------------

struct GradScene {
    ModelState state;
    std::vector<Frame> frames;
    TrainConfig cfg;
};

GradScene make_grad_scene(uint64_t seed) {
    GradScene sc;
    sc.cfg.embed_dim = 32;
    sc.cfg.hidden_dim = 64;
    sc.cfg.fourier_order = 2;
    sc.cfg.threads = 1;
    sc.cfg.ablation = {true, true, true, true};

    Rng rng(seed);

    Camera cam;
    cam.width = cam.height = 16;
    cam.fx = cam.fy = 24.0;
    cam.cx = cam.cy = 7.5;

    ModelState& s = sc.state;
    const size_t n = 5;
    for (size_t i = 0; i < n; ++i) {
        s.set.means.insert(s.set.means.end(),
                           {rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12), 1.7 + 0.21 * static_cast<double>(i)});
        Vec4 q{1.0 + 0.25 * rng.normal(), 0.25 * rng.normal(), 0.25 * rng.normal(), 0.25 * rng.normal()};
        for (int k = 0; k < 4; ++k) s.set.rot_raw.push_back(q[k]);
        for (int k = 0; k < 3; ++k) s.set.log_scales.push_back(rng.uniform(-2.9, -2.5));
        s.set.opacity_logits.push_back(logit(rng.uniform(0.35, 0.6)));
        for (int k = 0; k < 3; ++k) s.set.color_logits.push_back(logit(rng.uniform(0.3, 0.7)));
    }
    s.field = DeformationField::zeros(n, sc.cfg.fourier_order);
    for (double& c : s.field.mean_coeffs) c = 0.01 * rng.normal();
    for (double& c : s.field.scale_coeffs) c = 0.01 * rng.normal();
    for (double& c : s.field.opacity_coeffs) c = 0.02 * rng.normal();

    s.embed_dim = sc.cfg.embed_dim;
    s.embeddings.resize(3 * 32);
    for (double& e : s.embeddings) e = 0.1 * rng.normal();
    Rng net_rng = rng.fork(1);
    s.concealing = make_concealing_networks(32, 64, net_rng);
    s.spatial = make_spatial_network(32, 64, net_rng);
    // Give the spatial net a live output layer so its gradients are nonzero.
    for (double& w : s.spatial.layers.back().weights) w = 0.05 * net_rng.normal();

    const ICLabel labels[3] = {ICLabel::Dark, ICLabel::Bright, ICLabel::Dark};
    for (int f = 0; f < 3; ++f) {
        Frame frame;
        frame.camera = cam;
        frame.time = f / 3.0;
        frame.ic = labels[f];
        frame.mean_prior = 0.5;
        frame.image = Image(16, 16, 3);
        for (size_t i = 0; i < frame.image.size(); ++i) frame.image.data()[i] = rng.uniform(0.1, 0.9);
        frame.depth = Image(16, 16, 1);
        for (size_t i = 0; i < frame.depth.size(); ++i) frame.depth.data()[i] = rng.uniform(1.4, 2.6);
        frame.mask = Image(16, 16, 1, 1.0);
        frame.mask.at(3, 11) = 0.0;  // exercise the masked paths
        sc.frames.push_back(std::move(frame));
    }
    return sc;
}

// Central differences at h = 1e-4 are only meaningful while no probe crosses
// a non-smooth point of the loss: an L1 or tv tie, a ReLU preactivation at
// zero, the alpha clamp/skip thresholds, the transmittance stop, a depth-sort
// tie, or a change of the depth argmax. The scene seed is searched until all
// margins clear the probe step by a wide factor.
bool grad_scene_margins_ok(const GradScene& sc) {
    constexpr double kPair = 1e-3;    // generic value margins
    constexpr double kSkip = 1e-4;    // around the 1/255 alpha skip
    constexpr double kStop = 1e-6;    // around the 1e-4 transmittance stop
    const RasterConfig rcfg = sc.cfg.raster();

    for (int f = 0; f < 3; ++f) {
        const Frame& frame = sc.frames[f];
        const ModelState& s = sc.state;
        const DeformedGaussians dg = deform(s.set, s.field, frame.time);
        const size_t n = dg.count();

        // Depth-sort ties.
        std::vector<double> depths;
        for (size_t i = 0; i < n; ++i) {
            const Vec3 p = frame.camera.to_camera({dg.means[i * 3], dg.means[i * 3 + 1], dg.means[i * 3 + 2]});
            depths.push_back(p.z);
        }
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j)
                if (std::fabs(depths[i] - depths[j]) < kPair) return false;

        // ReLU preactivations of the nets this frame actually uses.
        std::vector<Vec3> colors(n), toned(n);
        const std::span<const double> e = s.embedding_row(f);
        const Mlp& net = s.concealing.select(frame.ic);
        for (size_t i = 0; i < n; ++i) {
            colors[i] = {sigmoid(s.set.color_logits[i * 3]), sigmoid(s.set.color_logits[i * 3 + 1]),
                         sigmoid(s.set.color_logits[i * 3 + 2])};
            const RegionResult rr = region_enhance(colors[i], e, net);
            toned[i] = rr.c_tone;
            for (size_t l = 0; l + 1 < net.layers.size(); ++l)
                for (double z : rr.trace.preact[l])
                    if (std::fabs(z) < kPair) return false;
        }
        {
            MlpTrace trace;
            mlp_forward(s.spatial, e, trace);
            for (size_t l = 0; l + 1 < s.spatial.layers.size(); ++l)
                for (double z : trace.preact[l])
                    if (std::fabs(z) < kPair) return false;
        }

        const ProjectResult proj = project(dg, colors, toned, frame.camera, rcfg);
        RenderOutput out = composite_forward(proj.splats, frame.camera, rcfg, true);

        // Alpha clamp/skip margins, evaluated without bounding boxes.
        for (const Splat2D& sp : proj.splats) {
            const Sym2 q = sp.cov2d.inverse();
            for (int y = 0; y < frame.camera.height; ++y)
                for (int x = 0; x < frame.camera.width; ++x) {
                    const double dx = x - sp.mean2d.x, dy = y - sp.mean2d.y;
                    const double m = q.xx * dx * dx + 2.0 * q.xy * dx * dy + q.yy * dy * dy;
                    const double a = sp.alpha_base * std::exp(-0.5 * m);
                    if (std::fabs(a - rcfg.alpha_clamp) < kPair) return false;
                    if (std::fabs(a - rcfg.alpha_skip) < kSkip) return false;
                }
        }

        // Transmittance-stop margins along every pixel walk.
        for (const auto& list : out.contribs) {
            double t = 1.0;
            for (const Contribution& c : list) {
                t *= 1.0 - c.alpha;
                if (std::fabs(t - rcfg.transmittance_stop) < kStop) return false;
            }
        }

        // Loss-side ties: L1 color residuals, tv neighbor differences of the
        // adjusted image and the depth image, depth residuals, depth argmax.
        const SpatialResult sp = spatial_adjust(out.color_toned, e, s.spatial);
        const Image& adj = sp.adjusted;
        for (int y = 0; y < adj.height(); ++y)
            for (int x = 0; x < adj.width(); ++x) {
                if (frame.mask.at(y, x) < 0.5) continue;
                for (int k = 0; k < 3; ++k)
                    if (std::fabs(adj.at(y, x, k) - frame.image.at(y, x, k)) < kPair) return false;
            }
        auto tv_ok = [&](const Image& img) {
            for (int y = 0; y < img.height(); ++y)
                for (int x = 0; x < img.width(); ++x)
                    for (int k = 0; k < img.channels(); ++k) {
                        if (y + 1 < img.height()) {
                            const double d = img.at(y + 1, x, k) - img.at(y, x, k);
                            if (d != 0.0 && std::fabs(d) < kPair) return false;
                        }
                        if (x + 1 < img.width()) {
                            const double d = img.at(y, x + 1, k) - img.at(y, x, k);
                            if (d != 0.0 && std::fabs(d) < kPair) return false;
                        }
                    }
            return true;
        };
        if (!tv_ok(adj) || !tv_ok(out.depth)) return false;

        double top1 = -1.0, top2 = -1.0, target_max = 0.0;
        for (int y = 0; y < out.depth.height(); ++y)
            for (int x = 0; x < out.depth.width(); ++x) {
                const double v = out.depth.at(y, x);
                if (v > top1) {
                    top2 = top1;
                    top1 = v;
                } else if (v > top2) {
                    top2 = v;
                }
                target_max = std::max(target_max, frame.depth.at(y, x));
            }
        if (top1 - top2 < kPair) return false;
        for (int y = 0; y < out.depth.height(); ++y)
            for (int x = 0; x < out.depth.width(); ++x) {
                if (frame.mask.at(y, x) < 0.5) continue;
                const double r = out.depth.at(y, x) / top1 - frame.depth.at(y, x) / target_max;
                if (std::fabs(r) < kPair) return false;
            }
    }
    return true;
}

void criterion_1() {
    const auto start = std::chrono::steady_clock::now();

    uint64_t seed = 424242;
    GradScene sc = make_grad_scene(seed);
    int tries = 1;
    while (!grad_scene_margins_ok(sc) && tries < 2000) {
        sc = make_grad_scene(++seed);
        ++tries;
    }

    auto loss = [&]() {
        double total = 0.0;
        for (int f = 0; f < 3; ++f) total += evaluate_frame(sc.state, sc.frames[f], f, sc.cfg, nullptr).total;
        return total;
    };

    StepGrads grads = StepGrads::zeros(sc.state);
    for (int f = 0; f < 3; ++f) evaluate_frame(sc.state, sc.frames[f], f, sc.cfg, &grads);

    struct Group {
        const char* name;
        double* params;
        const double* analytic;
        size_t count;
    };
    ModelState& s = sc.state;
    std::vector<Group> groups{
        {"means", s.set.means.data(), grads.scene.means.data(), s.set.means.size()},
        {"rot", s.set.rot_raw.data(), grads.scene.rot_raw.data(), s.set.rot_raw.size()},
        {"scales", s.set.log_scales.data(), grads.scene.log_scales.data(), s.set.log_scales.size()},
        {"opacity", s.set.opacity_logits.data(), grads.scene.opacity_logits.data(), s.set.opacity_logits.size()},
        {"color", s.set.color_logits.data(), grads.scene.color_logits.data(), s.set.color_logits.size()},
        {"mean_coeffs", s.field.mean_coeffs.data(), grads.scene.mean_coeffs.data(), s.field.mean_coeffs.size()},
        {"scale_coeffs", s.field.scale_coeffs.data(), grads.scene.scale_coeffs.data(), s.field.scale_coeffs.size()},
        {"opacity_coeffs", s.field.opacity_coeffs.data(), grads.scene.opacity_coeffs.data(),
         s.field.opacity_coeffs.size()},
        {"embeddings", s.embeddings.data(), grads.embeddings.data(), s.embeddings.size()},
    };
    for (size_t l = 0; l < s.concealing.bright.layers.size(); ++l) {
        groups.push_back({"bright_w", s.concealing.bright.layers[l].weights.data(), grads.bright.weights[l].data(),
                          s.concealing.bright.layers[l].weights.size()});
        groups.push_back({"bright_b", s.concealing.bright.layers[l].biases.data(), grads.bright.biases[l].data(),
                          s.concealing.bright.layers[l].biases.size()});
        groups.push_back({"dark_w", s.concealing.dark.layers[l].weights.data(), grads.dark.weights[l].data(),
                          s.concealing.dark.layers[l].weights.size()});
        groups.push_back({"dark_b", s.concealing.dark.layers[l].biases.data(), grads.dark.biases[l].data(),
                          s.concealing.dark.layers[l].biases.size()});
    }
    for (size_t l = 0; l < s.spatial.layers.size(); ++l) {
        groups.push_back({"spatial_w", s.spatial.layers[l].weights.data(), grads.spatial.weights[l].data(),
                          s.spatial.layers[l].weights.size()});
        groups.push_back({"spatial_b", s.spatial.layers[l].biases.data(), grads.spatial.biases[l].data(),
                          s.spatial.layers[l].biases.size()});
    }

    double worst = 0.0;
    std::string worst_group = "none";
    size_t checked = 0;
    for (const Group& g : groups) {
        const FdReport r = finite_diff_check(loss, g.params, g.analytic, g.count, 1e-4);
        checked += g.count;
        if (r.max_rel_err > worst) {
            worst = r.max_rel_err;
            worst_group = g.name;
        }
    }

    const double elapsed = seconds_since(start);
    char detail[200];
    std::snprintf(detail, sizeof(detail), "max rel err %.3g in %s over %zu params (scene seed %llu, %d tried), %.1f s",
                  worst, worst_group.c_str(), checked, static_cast<unsigned long long>(seed), tries, elapsed);
    report(1, "gradient correctness vs finite differences", worst <= 1e-3 && elapsed < 60.0, detail);
}

// ---------------------------------------------------------------------------
// Criterion 2: compositing oracle on 100 random scenes
// ---------------------------------------------------------------------------

void criterion_2() {
    Rng rng(99);
    double worst_img = 0.0, worst_conservation = 0.0;

    for (int scene = 0; scene < 100; ++scene) {
        Camera cam;
        cam.width = 16 + static_cast<int>(rng.uniform_index(33));
        cam.height = 16 + static_cast<int>(rng.uniform_index(33));
        cam.fx = cam.fy = 50.0;
        cam.cx = (cam.width - 1) / 2.0;
        cam.cy = (cam.height - 1) / 2.0;

        const size_t n = 2 + rng.uniform_index(50);
        std::vector<Splat2D> splats(n);
        for (Splat2D& s : splats) {
            s.mean2d = {rng.uniform(-4.0, cam.width + 4.0), rng.uniform(-4.0, cam.height + 4.0)};
            const double sx = rng.uniform(0.5, 5.0), sy = rng.uniform(0.5, 5.0);
            const double corr = rng.uniform(-0.85, 0.85);
            s.cov2d = {sx * sx + 0.3, corr * sx * sy, sy * sy + 0.3};
            s.depth = rng.uniform(0.3, 9.0);
            s.color_raw = {rng.uniform(), rng.uniform(), rng.uniform()};
            s.color_toned = {rng.uniform(), rng.uniform(), rng.uniform()};
            s.alpha_base = rng.uniform(0.02, 0.98);
        }

        RasterConfig cfg;
        cfg.threads = 1 + static_cast<int>(rng.uniform_index(3));
        const RenderOutput tiled = composite_forward(splats, cam, cfg, false);
        const RenderOutput ref = lumisplat::testing::reference_composite(splats, cam, cfg);

        for (size_t i = 0; i < tiled.color_raw.size(); ++i)
            worst_img = std::max(worst_img, std::fabs(tiled.color_raw.data()[i] - ref.color_raw.data()[i]));
        for (size_t i = 0; i < tiled.depth.size(); ++i) {
            worst_img = std::max(worst_img, std::fabs(tiled.depth.data()[i] - ref.depth.data()[i]));
            worst_img = std::max(worst_img, std::fabs(tiled.alpha_acc.data()[i] - ref.alpha_acc.data()[i]));
            worst_conservation =
                std::max(worst_conservation,
                         std::fabs(tiled.alpha_acc.data()[i] + tiled.transmittance.data()[i] - 1.0));
        }
    }

    char detail[128];
    std::snprintf(detail, sizeof(detail), "max |tiled - brute force| %.3g, max conservation gap %.3g", worst_img,
                  worst_conservation);
    report(2, "tiled compositing equals brute-force evaluation", worst_img <= 1e-6 && worst_conservation <= 1e-6,
           detail);
}

// ---------------------------------------------------------------------------
// Criterion 3: analytic fixed points
// ---------------------------------------------------------------------------

void criterion_3() {
    bool pass = true;
    std::string detail;

    // Spatial curve leaves 0 and 1 invariant for 1000 random deltas.
    Rng rng(5);
    Image endpoints(2, 2, 1);
    endpoints.at(0, 0) = 0.0;
    endpoints.at(0, 1) = 1.0;
    endpoints.at(1, 0) = 0.0;
    endpoints.at(1, 1) = 1.0;
    const std::vector<double> e(32, 0.0);
    for (int i = 0; i < 1000 && pass; ++i) {
        const double delta = rng.uniform(-0.999, 0.999);
        Mlp net;
        DenseLayer l;
        l.in = 32;
        l.out = 1;
        l.act = Activation::Tanh;
        l.weights.assign(32, 0.0);
        l.biases = {std::atanh(delta)};
        net.layers.push_back(l);
        const SpatialResult res = spatial_adjust(endpoints, e, net);
        if (res.adjusted.at(0, 0) != 0.0 || res.adjusted.at(0, 1) != 1.0) {
            pass = false;
            detail = "curve endpoint moved";
        }
    }

    LossWeights w;
    const double at_target = exposure_loss(Image(16, 16, 3, 0.6), w).value;
    if (at_target != 0.0) {
        pass = false;
        detail = "exposure loss nonzero at the target";
    }
    const double at_black = exposure_loss(Image(16, 16, 3, 0.0), w).value;
    if (std::fabs(at_black - 0.36) > 1e-12) {
        pass = false;
        detail = "exposure loss at black != 0.36";
    }

    if (tv(Image(9, 9, 3, 0.123)) != 0.0) {
        pass = false;
        detail = "tv of constant nonzero";
    }

    const Image boundary(8, 8, 3, 0.44);
    IlluminationPrior prior;
    prior.mean_prior = boundary.mean();
    if (classify_ic(boundary, prior) != ICLabel::Dark) {
        pass = false;
        detail = "IC boundary not Dark";
    }

    if (pass)
        detail = "curve endpoints exact for 1000 deltas; exposure 0 at target, 0.36 at black; tv 0; boundary Dark";
    report(3, "analytic fixed points", pass, detail);
}

// ---------------------------------------------------------------------------
// Criterion 4: overfit sanity on one normal-exposure frame
// ---------------------------------------------------------------------------

void criterion_4() {
    const auto start = std::chrono::steady_clock::now();
    TempDir dir("overfit");

    SynthSpec spec;
    spec.frames = 1;
    spec.width = spec.height = 64;
    spec.ev_levels = {0.0};
    spec.ev_jitter = 0.0;
    spec.seed = 4;
    synth_dataset(spec, dir.path);
    const Dataset ds = load_dataset(dir.path);

    TrainConfig cfg;
    cfg.iterations = 2000;
    cfg.ablation = {false, false, false, false};
    cfg.init_stride = 2;
    cfg.threads = 2;
    cfg.val_interval = 0;
    cfg.seed = 4;

    Trainer trainer(ds, cfg);
    trainer.train_loop(nullptr, nullptr);
    const double train_psnr = trainer.split_psnr(false).value_or(0.0);

    const double elapsed = seconds_since(start);
    char detail[128];
    std::snprintf(detail, sizeof(detail), "train PSNR %.2f dB after 2000 iters, %zu gaussians, %.1f s", train_psnr,
                  trainer.state().set.count(), elapsed);
    report(4, "single-frame overfit reaches 30 dB", train_psnr >= 30.0 && elapsed < 300.0, detail);
}

// ---------------------------------------------------------------------------
// Criteria 5 and 6: illumination correction margin and ablation ordering
// ---------------------------------------------------------------------------

struct EcContext {
    TempDir dir{"ec"};
    Dataset ds;
    std::vector<Image> gt;
    TrainConfig base_cfg;
};

double correction_psnr(const EcContext& ctx, const ModelState& state, const TrainConfig& cfg) {
    double total = 0.0;
    for (size_t i = 0; i < ctx.ds.frames.size(); ++i) {
        const Frame& frame = ctx.ds.frames[i];
        const EmbeddingChoice choice =
            select_embedding(EmbeddingMode::Correction, ctx.ds, state, frame.time, cfg.loss.exposure_target);
        const Image img = render_view(state, frame.camera, frame.time, choice.embedding, choice.ic, true, cfg);
        total += psnr(img, ctx.gt[i], &frame.mask);
    }
    return total / static_cast<double>(ctx.ds.frames.size());
}

double train_variant(const EcContext& ctx, const AblationFlags& flags) {
    TrainConfig cfg = ctx.base_cfg;
    cfg.ablation = flags;
    Trainer trainer(ctx.ds, cfg);
    trainer.train_loop(nullptr, nullptr);
    return correction_psnr(ctx, trainer.state(), cfg);
}

void criteria_5_and_6() {
    const auto start = std::chrono::steady_clock::now();

    EcContext ctx;
    SynthSpec spec;
    spec.frames = 21;
    spec.width = spec.height = 64;
    spec.ev_levels = {-2.0, 0.0, 2.0};
    spec.ev_jitter = 0.5;
    spec.seed = 21;
    synth_dataset(spec, ctx.dir.path);
    ctx.ds = load_dataset(ctx.dir.path);
    for (int i = 0; i < spec.frames; ++i) {
        char name[16];
        std::snprintf(name, sizeof(name), "%05d.png", i);
        ctx.gt.push_back(read_png_rgb8(ctx.dir.path / "images_gt" / name));
    }

    ctx.base_cfg.iterations = 2000;
    ctx.base_cfg.threads = 2;
    ctx.base_cfg.val_interval = 0;
    ctx.base_cfg.seed = 9;
    ctx.base_cfg.init_stride = 2;

    const double full = train_variant(ctx, {true, true, true, true});
    const double baseline = train_variant(ctx, {false, false, false, false});

    const double elapsed5 = seconds_since(start);
    char detail5[160];
    std::snprintf(detail5, sizeof(detail5), "full %.2f dB vs baseline %.2f dB (margin %.2f, need >= 2), %.0f s",
                  full, baseline, full - baseline, elapsed5);
    report(5, "illumination correction beats the ablated baseline", full - baseline >= 2.0 && elapsed5 < 1200.0,
           detail5);

    const double no_embed = train_variant(ctx, {false, true, true, true});
    const double no_region = train_variant(ctx, {true, false, true, true});
    const double no_spatial = train_variant(ctx, {true, true, false, true});

    const bool ordering = full >= no_embed && full >= no_region && full >= no_spatial;
    const bool embed_collapse = no_embed < baseline;  // qualitative claim, reported either way
    char detail6[220];
    std::snprintf(detail6, sizeof(detail6),
                  "full %.2f >= {no-embed %.2f, no-region %.2f, no-spatial %.2f}: %s; "
                  "no-embed-with-region below baseline %.2f: %s (directional, non-gating)",
                  full, no_embed, no_region, no_spatial, ordering ? "yes" : "NO", baseline,
                  embed_collapse ? "yes" : "no");
    report(6, "ablation ordering", ordering, detail6);
}

// ---------------------------------------------------------------------------
// Criterion 7: determinism and persistence through the CLI
// ---------------------------------------------------------------------------

void criterion_7() {
    TempDir dir("determinism");
    const std::string bin = LUMISPLAT_BIN;
    const fs::path data = dir.path / "data";

    auto shell = [](const std::string& cmd) { return WEXITSTATUS(std::system(cmd.c_str())); };

    bool pass = true;
    std::string detail;
    if (shell(bin + " synth --out " + data.string() + " --frames 6 --size 32x32 --seed 12 >/dev/null 2>&1") != 0) {
        pass = false;
        detail = "synth failed";
    }

    const std::string train_cmd = " train --data " + data.string() +
                                  " --iterations 150 --seed 5 --set init_stride=2 --set densify_interval=50"
                                  " --set densify_until=1.0 --set warmup_static_iters=40 >/dev/null 2>&1";
    if (pass && shell(bin + train_cmd + " --out " + (dir.path / "a.ckpt").string()) != 0) {
        pass = false;
        detail = "first training failed";
    }
    if (pass && shell(bin + train_cmd + " --out " + (dir.path / "b.ckpt").string()) != 0) {
        pass = false;
        detail = "second training failed";
    }

    if (pass) {
        const auto a = slurp(dir.path / "a.ckpt");
        const auto b = slurp(dir.path / "b.ckpt");
        if (a.empty() || a != b) {
            pass = false;
            detail = "checkpoints differ across identical runs";
        } else {
            const Checkpoint loaded = load_checkpoint(dir.path / "a.ckpt");
            save_checkpoint(loaded, dir.path / "resaved.ckpt");
            const auto c = slurp(dir.path / "resaved.ckpt");
            if (a != c) {
                pass = false;
                detail = "save -> load -> save changed bytes";
            } else {
                char buf[96];
                std::snprintf(buf, sizeof(buf), "two runs byte-identical (%zu bytes); resave byte-identical",
                              a.size());
                detail = buf;
            }
        }
    }
    report(7, "determinism and checkpoint persistence", pass, detail);
}

// ---------------------------------------------------------------------------
// Criterion 8: metrics self-tests
// ---------------------------------------------------------------------------

void criterion_8() {
    bool pass = true;
    std::string detail;

    Rng rng(3);
    Image x(16, 16, 3);
    for (size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
    if (psnr(x, x) != 100.0) {
        pass = false;
        detail = "psnr(x,x) != 100";
    }

    const Image a(16, 16, 3, 0.45), b(16, 16, 3, 0.55);
    const double twenty = psnr(a, b);
    if (std::fabs(twenty - 20.0) > 0.01) {
        pass = false;
        detail = "MSE-0.01 pair not 20 dB";
    }

    if (ssim(x, x) != 1.0) {
        pass = false;
        detail = "ssim(x,x) != 1";
    }

    if (pass) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "psnr cap 100 exact; 0.01-MSE pair %.4f dB; ssim self 1.0 exact", twenty);
        detail = buf;
    }
    report(8, "metrics self-tests", pass, detail);
}

}  // namespace

int main() {
    std::printf("acceptance suite (kernels=%s)\n", kernels::backend_name(kernels::active_backend()).c_str());
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criteria_5_and_6();
    criterion_7();
    criterion_8();
    std::printf("%s: %d criterion failure(s)\n", g_failures == 0 ? "OK" : "FAILED", g_failures);
    return g_failures;
}
