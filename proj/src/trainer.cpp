#include "lumisplat/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "lumisplat/metrics.hpp"

namespace lumisplat {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw Error("BadConfig", "expected bool, got '" + v + "'");
}

double parse_double(const std::string& v) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw Error("BadConfig", "expected number, got '" + v + "'");
    }
}

int parse_int(const std::string& v) { return static_cast<int>(parse_double(v)); }

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void TrainConfig::apply_key_value(const std::string& key, const std::string& value) {
    if (key == "iterations") iterations = parse_int(value);
    else if (key == "lr_means") lr_means = parse_double(value);
    else if (key == "lr_rot") lr_rot = parse_double(value);
    else if (key == "lr_scale") lr_scale = parse_double(value);
    else if (key == "lr_opacity") lr_opacity = parse_double(value);
    else if (key == "lr_color") lr_color = parse_double(value);
    else if (key == "lr_deform") lr_deform = parse_double(value);
    else if (key == "lr_embed") lr_embed = parse_double(value);
    else if (key == "lr_nets") lr_nets = parse_double(value);
    else if (key == "warmup_static_iters") warmup_static_iters = parse_int(value);
    else if (key == "densify_interval") densify_interval = parse_int(value);
    else if (key == "densify_grad_threshold") densify_grad_threshold = parse_double(value);
    else if (key == "prune_opacity") prune_opacity = parse_double(value);
    else if (key == "densify_until") densify_until = parse_double(value);
    else if (key == "percent_dense") percent_dense = parse_double(value);
    else if (key == "seed") seed = static_cast<uint64_t>(std::stoull(value));
    else if (key == "use_embedding") ablation.use_embedding = parse_bool(value);
    else if (key == "use_region") ablation.use_region = parse_bool(value);
    else if (key == "use_spatial") ablation.use_spatial = parse_bool(value);
    else if (key == "use_exposure_loss") ablation.use_exposure_loss = parse_bool(value);
    else if (key == "lambda_depth") loss.lambda_depth = parse_double(value);
    else if (key == "lambda_tv") loss.lambda_tv = parse_double(value);
    else if (key == "exposure_target") loss.exposure_target = parse_double(value);
    else if (key == "pool_window") loss.pool_window = parse_int(value);
    else if (key == "embed_dim") embed_dim = parse_int(value);
    else if (key == "hidden_dim") hidden_dim = parse_int(value);
    else if (key == "fourier_order") fourier_order = parse_int(value);
    else if (key == "init_stride") init_stride = parse_int(value);
    else if (key == "threads") threads = parse_int(value);
    else if (key == "val_interval") val_interval = parse_int(value);
    else if (key == "adam_eps") adam_eps = parse_double(value);
    else if (key == "near_clip") near_clip = parse_double(value);
    else if (key == "tile_size") tile_size = parse_int(value);
    else throw Error("BadConfig", "unknown key '" + key + "'");

    if (iterations < 0 || densify_interval < 1 || embed_dim < 1 || hidden_dim < 1 || fourier_order < 0 ||
        init_stride < 1 || tile_size < 1 || loss.pool_window < 1)
        throw Error("BadConfig", "out-of-range value for '" + key + "'");
}

std::string TrainConfig::to_echo() const {
    std::ostringstream os;
    os << "iterations=" << iterations << "\n";
    os << "lr_means=" << fmt_double(lr_means) << "\n";
    os << "lr_rot=" << fmt_double(lr_rot) << "\n";
    os << "lr_scale=" << fmt_double(lr_scale) << "\n";
    os << "lr_opacity=" << fmt_double(lr_opacity) << "\n";
    os << "lr_color=" << fmt_double(lr_color) << "\n";
    os << "lr_deform=" << fmt_double(lr_deform) << "\n";
    os << "lr_embed=" << fmt_double(lr_embed) << "\n";
    os << "lr_nets=" << fmt_double(lr_nets) << "\n";
    os << "warmup_static_iters=" << warmup_static_iters << "\n";
    os << "densify_interval=" << densify_interval << "\n";
    os << "densify_grad_threshold=" << fmt_double(densify_grad_threshold) << "\n";
    os << "prune_opacity=" << fmt_double(prune_opacity) << "\n";
    os << "densify_until=" << fmt_double(densify_until) << "\n";
    os << "percent_dense=" << fmt_double(percent_dense) << "\n";
    os << "seed=" << seed << "\n";
    os << "use_embedding=" << (ablation.use_embedding ? "true" : "false") << "\n";
    os << "use_region=" << (ablation.use_region ? "true" : "false") << "\n";
    os << "use_spatial=" << (ablation.use_spatial ? "true" : "false") << "\n";
    os << "use_exposure_loss=" << (ablation.use_exposure_loss ? "true" : "false") << "\n";
    os << "lambda_depth=" << fmt_double(loss.lambda_depth) << "\n";
    os << "lambda_tv=" << fmt_double(loss.lambda_tv) << "\n";
    os << "exposure_target=" << fmt_double(loss.exposure_target) << "\n";
    os << "pool_window=" << loss.pool_window << "\n";
    os << "embed_dim=" << embed_dim << "\n";
    os << "hidden_dim=" << hidden_dim << "\n";
    os << "fourier_order=" << fourier_order << "\n";
    os << "init_stride=" << init_stride << "\n";
    os << "threads=" << threads << "\n";
    os << "val_interval=" << val_interval << "\n";
    os << "adam_eps=" << fmt_double(adam_eps) << "\n";
    os << "near_clip=" << fmt_double(near_clip) << "\n";
    os << "tile_size=" << tile_size << "\n";
    return os.str();
}

namespace {

TrainConfig config_from_stream(std::istream& in, const std::string& origin) {
    TrainConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw Error("BadConfig", origin + ":" + std::to_string(lineno) + ": expected key=value");
        std::string key = line.substr(start, eq - start);
        std::string value = line.substr(eq + 1);
        while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
        const size_t vstart = value.find_first_not_of(" \t");
        value = vstart == std::string::npos ? "" : value.substr(vstart);
        while (!value.empty() && (value.back() == ' ' || value.back() == '\t' || value.back() == '\r'))
            value.pop_back();
        cfg.apply_key_value(key, value);
    }
    return cfg;
}

}  // namespace

TrainConfig config_from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("MissingFile", path.string());
    return config_from_stream(in, path.string());
}

TrainConfig config_from_string(const std::string& text) {
    std::istringstream in(text);
    return config_from_stream(in, "<string>");
}

// ---------------------------------------------------------------------------
// Forward / backward of one frame
// ---------------------------------------------------------------------------

StepGrads StepGrads::zeros(const ModelState& state) {
    StepGrads g;
    g.scene = SceneGrads(state.set.count(), state.field.order);
    g.embeddings.assign(state.embeddings.size(), 0.0);
    g.bright = MlpGrads(state.concealing.bright);
    g.dark = MlpGrads(state.concealing.dark);
    g.spatial = MlpGrads(state.spatial);
    return g;
}

LossBreakdown evaluate_frame(const ModelState& state, const Frame& frame, int embed_row, const TrainConfig& cfg,
                             StepGrads* grads, const EvalExtras& extras) {
    const size_t n = state.set.count();
    const RasterConfig rcfg = cfg.raster();
    const AblationFlags& flags = cfg.ablation;

    const std::vector<double> zero_embed(state.embed_dim, 0.0);
    const bool embedded = flags.use_embedding && embed_row >= 0;
    const std::span<const double> e =
        embedded ? state.embedding_row(static_cast<size_t>(embed_row)) : std::span<const double>(zero_embed);

    const DeformedGaussians dg = deform(state.set, state.field, frame.time);

    std::vector<Vec3> colors(n);
    for (size_t i = 0; i < n; ++i)
        colors[i] = {sigmoid(state.set.color_logits[i * 3]), sigmoid(state.set.color_logits[i * 3 + 1]),
                     sigmoid(state.set.color_logits[i * 3 + 2])};

    const Mlp& region_net = state.concealing.select(frame.ic);
    std::vector<RegionResult> region;
    std::vector<Vec3> toned;
    if (flags.use_region) {
        region.resize(n);
        toned.resize(n);
        for (size_t i = 0; i < n; ++i) {
            region[i] = region_enhance(colors[i], e, region_net);
            toned[i] = region[i].c_tone;
        }
    } else {
        toned = colors;
    }

    const ProjectResult proj = project(dg, colors, toned, frame.camera, rcfg);
    RenderOutput out = composite_forward(proj.splats, frame.camera, rcfg, grads != nullptr);

    SpatialResult spatial;
    const Image* final_image = &out.color_toned;
    if (flags.use_spatial) {
        spatial = spatial_adjust(out.color_toned, e, state.spatial);
        final_image = &spatial.adjusted;
    }

    const LossResult lc = color_loss(*final_image, frame.image, frame.mask, cfg.loss);
    const LossResult ld = depth_loss(out.depth, frame.depth, frame.mask, cfg.loss);
    LossResult le;
    if (flags.use_exposure_loss) le = exposure_loss(out.color_raw, cfg.loss);

    LossBreakdown breakdown;
    breakdown.color = lc.value;
    breakdown.depth = ld.value;
    breakdown.exposure = le.value;
    breakdown.total = total_loss(lc.value, ld.value, le.value, flags.use_exposure_loss);

    if (extras.final_image) *extras.final_image = *final_image;

    if (grads) {
        std::vector<double> g_embed(state.embed_dim, 0.0);

        Image g_ctone_image;
        if (flags.use_spatial)
            spatial_adjust_backward(out.color_toned, state.spatial, spatial, lc.grad, g_ctone_image, g_embed,
                                    grads->spatial);
        else
            g_ctone_image = lc.grad;

        const SplatGrads sg =
            composite_backward(proj.splats, out, frame.camera, rcfg,
                               flags.use_exposure_loss ? &le.grad : nullptr, &g_ctone_image, &ld.grad);

        if (extras.mean2d_norms) extras.mean2d_norms->assign(n, 0.0);
        if (extras.visible) extras.visible->assign(n, 0);
        if (extras.mean2d_norms || extras.visible)
            for (size_t k = 0; k < proj.splats.size(); ++k) {
                const uint32_t gi = proj.gaussian_index[k];
                if (extras.mean2d_norms)
                    (*extras.mean2d_norms)[gi] =
                        std::sqrt(sg.mean2d[k].x * sg.mean2d[k].x + sg.mean2d[k].y * sg.mean2d[k].y);
                if (extras.visible) (*extras.visible)[gi] = 1;
            }

        DeformedGrads dgrads(n);
        std::vector<Vec3> g_craw(n), g_ctoned(n);
        project_backward(dg, proj, frame.camera, rcfg, sg, dgrads, g_craw, g_ctoned);

        std::vector<Vec3> g_color = g_craw;  // raw path
        if (flags.use_region) {
            MlpGrads& net_grads = frame.ic == ICLabel::Bright ? grads->bright : grads->dark;
            for (size_t i = 0; i < n; ++i)
                region_enhance_backward(colors[i], region_net, region[i], g_ctoned[i], g_color[i], g_embed,
                                        net_grads);
        } else {
            for (size_t i = 0; i < n; ++i) g_color[i] += g_ctoned[i];
        }

        for (size_t i = 0; i < n; ++i)
            for (int k = 0; k < 3; ++k) {
                const double c = colors[i][k];
                grads->scene.color_logits[i * 3 + k] += g_color[i][k] * c * (1.0 - c);
            }

        deform_backward(state.set, state.field, frame.time, dgrads, grads->scene);

        if (embedded)
            for (int j = 0; j < state.embed_dim; ++j)
                grads->embeddings[static_cast<size_t>(embed_row) * state.embed_dim + j] += g_embed[j];
    }

    if (extras.render) *extras.render = std::move(out);
    return breakdown;
}

Image render_view(const ModelState& state, const Camera& cam, double t, std::span<const double> embedding,
                  ICLabel ic, bool toned, const TrainConfig& cfg) {
    const size_t n = state.set.count();
    const RasterConfig rcfg = cfg.raster();
    const AblationFlags& flags = cfg.ablation;

    const std::vector<double> zero_embed(state.embed_dim, 0.0);
    const std::span<const double> e = flags.use_embedding ? embedding : std::span<const double>(zero_embed);

    const DeformedGaussians dg = deform(state.set, state.field, t);

    std::vector<Vec3> colors(n);
    for (size_t i = 0; i < n; ++i)
        colors[i] = {sigmoid(state.set.color_logits[i * 3]), sigmoid(state.set.color_logits[i * 3 + 1]),
                     sigmoid(state.set.color_logits[i * 3 + 2])};

    std::vector<Vec3> toned_colors = colors;
    if (toned && flags.use_region) {
        const Mlp& net = state.concealing.select(ic);
        for (size_t i = 0; i < n; ++i) toned_colors[i] = region_enhance(colors[i], e, net).c_tone;
    }

    const ProjectResult proj = project(dg, colors, toned_colors, cam, rcfg);
    RenderOutput out = composite_forward(proj.splats, cam, rcfg, false);

    if (!toned) return std::move(out.color_raw);
    if (flags.use_spatial) return spatial_adjust(out.color_toned, e, state.spatial).adjusted;
    return std::move(out.color_toned);
}

// ---------------------------------------------------------------------------
// Embedding selection
// ---------------------------------------------------------------------------

EmbeddingMode embedding_mode_from_string(const std::string& s) {
    if (s == "correction") return EmbeddingMode::Correction;
    if (s == "reconstruction") return EmbeddingMode::Reconstruction;
    if (s == "zero") return EmbeddingMode::Zero;
    throw Error("BadConfig", "unknown embedding mode '" + s + "'");
}

EmbeddingChoice select_embedding(EmbeddingMode mode, const Dataset& ds, const ModelState& state, double query_time,
                                 double exposure_target) {
    EmbeddingChoice choice;
    if (mode == EmbeddingMode::Zero) {
        choice.embedding.assign(state.embed_dim, 0.0);
        return choice;
    }

    const auto& train_idx = ds.manifest.train_idx;
    if (state.embedding_rows() == 0 || train_idx.empty() || state.embedding_rows() != train_idx.size())
        throw Error("NoTrainedEmbeddings", "embedding table does not match the training split");

    int best_pos = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (size_t pos = 0; pos < train_idx.size(); ++pos) {
        const Frame& frame = ds.frames[train_idx[pos]];
        const double cost = mode == EmbeddingMode::Correction ? std::fabs(frame.image.mean() - exposure_target)
                                                              : std::fabs(frame.time - query_time);
        if (cost < best_cost) {
            best_cost = cost;
            best_pos = static_cast<int>(pos);
        }
    }

    choice.train_pos = best_pos;
    choice.frame_index = train_idx[best_pos];
    choice.ic = ds.frames[choice.frame_index].ic;
    const auto row = state.embedding_row(static_cast<size_t>(best_pos));
    choice.embedding.assign(row.begin(), row.end());
    return choice;
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

void Trainer::MlpAdam::init(const Mlp& net) {
    w.clear();
    b.clear();
    for (const DenseLayer& l : net.layers) {
        w.emplace_back(l.weights.size());
        b.emplace_back(l.biases.size());
    }
}

void Trainer::MlpAdam::step(Mlp& net, const MlpGrads& grads, double lr, const AdamParams& hp) {
    for (size_t l = 0; l < net.layers.size(); ++l) {
        w[l].step(net.layers[l].weights, grads.weights[l], lr, hp);
        b[l].step(net.layers[l].biases, grads.biases[l], lr, hp);
    }
}

Trainer::Trainer(const Dataset& ds, const TrainConfig& cfg) : ds_(ds), cfg_(cfg) {
    train_frames_ = ds.manifest.train_idx;
    if (train_frames_.empty()) throw Error("BadManifest", "dataset has no training frames");

    const Frame& first = ds.frames[train_frames_.front()];
    FrameGeometry geo{first.image, first.depth, first.mask, first.camera};
    init_from_depth(geo, cfg_.init_stride, cfg_.fourier_order, state_.set, state_.field);
    extent_ = scene_extent(state_.set);

    state_.embed_dim = cfg_.embed_dim;
    state_.embeddings.assign(train_frames_.size() * static_cast<size_t>(cfg_.embed_dim), 0.0);

    Rng master(cfg_.seed);
    Rng net_rng = master.fork(1);
    shuffle_rng_ = master.fork(2);
    densify_rng_ = master.fork(3);
    state_.concealing = make_concealing_networks(cfg_.embed_dim, cfg_.hidden_dim, net_rng);
    state_.spatial = make_spatial_network(cfg_.embed_dim, cfg_.hidden_dim, net_rng);

    const size_t n = state_.set.count();
    const size_t terms = 2 * static_cast<size_t>(state_.field.order);
    adam_means_ = Adam(n * 3);
    adam_rot_ = Adam(n * 4);
    adam_scales_ = Adam(n * 3);
    adam_opacity_ = Adam(n);
    adam_color_ = Adam(n * 3);
    adam_mean_coeffs_ = Adam(n * 3 * terms);
    adam_scale_coeffs_ = Adam(n * 3 * terms);
    adam_opacity_coeffs_ = Adam(n * terms);
    adam_embed_ = Adam(state_.embeddings.size());
    adam_bright_.init(state_.concealing.bright);
    adam_dark_.init(state_.concealing.dark);
    adam_spatial_.init(state_.spatial);

    grad_accum_.assign(n, 0.0);
    grad_count_.assign(n, 0);
}

LossBreakdown Trainer::train_step(int train_pos) {
    const Frame& frame = ds_.frames[train_frames_[train_pos]];

    StepGrads grads = StepGrads::zeros(state_);
    std::vector<double> norms;
    std::vector<uint8_t> visible;
    EvalExtras extras;
    extras.mean2d_norms = &norms;
    extras.visible = &visible;

    const LossBreakdown breakdown = evaluate_frame(state_, frame, train_pos, cfg_, &grads, extras);

    for (size_t i = 0; i < norms.size(); ++i)
        if (visible[i]) {
            grad_accum_[i] += norms[i];
            ++grad_count_[i];
        }

    adam_steps(grads, train_pos);
    ++iteration_;
    return breakdown;
}

void Trainer::adam_steps(const StepGrads& grads, int train_pos) {
    const AdamParams hp{0.9, 0.999, cfg_.adam_eps};

    adam_means_.step(state_.set.means, grads.scene.means, cfg_.lr_means * extent_, hp);
    adam_rot_.step(state_.set.rot_raw, grads.scene.rot_raw, cfg_.lr_rot, hp);
    adam_scales_.step(state_.set.log_scales, grads.scene.log_scales, cfg_.lr_scale, hp);
    adam_opacity_.step(state_.set.opacity_logits, grads.scene.opacity_logits, cfg_.lr_opacity, hp);
    adam_color_.step(state_.set.color_logits, grads.scene.color_logits, cfg_.lr_color, hp);

    if (iteration_ >= cfg_.warmup_static_iters && state_.field.order > 0) {
        adam_mean_coeffs_.step(state_.field.mean_coeffs, grads.scene.mean_coeffs, cfg_.lr_deform, hp);
        adam_scale_coeffs_.step(state_.field.scale_coeffs, grads.scene.scale_coeffs, cfg_.lr_deform, hp);
        adam_opacity_coeffs_.step(state_.field.opacity_coeffs, grads.scene.opacity_coeffs, cfg_.lr_deform, hp);
    }

    if (cfg_.ablation.use_embedding) adam_embed_.step(state_.embeddings, grads.embeddings, cfg_.lr_embed, hp);

    if (cfg_.ablation.use_region) {
        const Frame& frame = ds_.frames[train_frames_[train_pos]];
        if (frame.ic == ICLabel::Bright)
            adam_bright_.step(state_.concealing.bright, grads.bright, cfg_.lr_nets, hp);
        else
            adam_dark_.step(state_.concealing.dark, grads.dark, cfg_.lr_nets, hp);
    }
    if (cfg_.ablation.use_spatial) adam_spatial_.step(state_.spatial, grads.spatial, cfg_.lr_nets, hp);
}

void Trainer::run_densify() {
    const size_t n = state_.set.count();
    std::vector<double> avg(n, 0.0);
    for (size_t i = 0; i < n; ++i)
        if (grad_count_[i] > 0) avg[i] = grad_accum_[i] / grad_count_[i];

    DensifyConfig dc;
    dc.grad_threshold = cfg_.densify_grad_threshold;
    dc.prune_opacity = cfg_.prune_opacity;
    dc.split_scale_limit = cfg_.percent_dense * extent_;

    RowEdit edit;
    densify_and_prune(state_.set, state_.field, avg, dc, densify_rng_, &edit);

    const size_t terms = 2 * static_cast<size_t>(state_.field.order);
    adam_means_.remap_rows(edit, 3);
    adam_rot_.remap_rows(edit, 4);
    adam_scales_.remap_rows(edit, 3);
    adam_opacity_.remap_rows(edit, 1);
    adam_color_.remap_rows(edit, 3);
    adam_mean_coeffs_.remap_rows(edit, 3 * terms);
    adam_scale_coeffs_.remap_rows(edit, 3 * terms);
    adam_opacity_coeffs_.remap_rows(edit, terms);

    grad_accum_.assign(state_.set.count(), 0.0);
    grad_count_.assign(state_.set.count(), 0);
}

void Trainer::train_loop(std::ostream* train_log, std::ostream* val_log) {
    std::vector<int> order(train_frames_.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle_rng_.shuffle(order);

    const int densify_stop = static_cast<int>(cfg_.densify_until * cfg_.iterations);

    for (int it = 0; it < cfg_.iterations; ++it) {
        const int pos = order[it % order.size()];
        const LossBreakdown lb = train_step(pos);

        if (train_log) {
            char line[160];
            std::snprintf(line, sizeof(line), "%d\t%.8g\t%.8g\t%.8g\t%.8g\n", it, lb.color, lb.depth, lb.exposure,
                          lb.total);
            (*train_log) << line;
        }

        if (iteration_ > 0 && iteration_ % cfg_.densify_interval == 0 && iteration_ < densify_stop)
            run_densify();

        if (val_log && cfg_.val_interval > 0 && iteration_ % cfg_.val_interval == 0) {
            const auto test = split_psnr(true);
            if (test) {
                char line[64];
                std::snprintf(line, sizeof(line), "%d\t%.6f\n", iteration_, *test);
                (*val_log) << line;
            }
        }
    }
}

std::optional<double> Trainer::split_psnr(bool test_split) const {
    const auto& idx = test_split ? ds_.manifest.test_idx : ds_.manifest.train_idx;
    if (idx.empty()) return std::nullopt;

    double total = 0.0;
    for (int fi : idx) {
        const Frame& frame = ds_.frames[fi];
        const EmbeddingChoice choice =
            select_embedding(EmbeddingMode::Reconstruction, ds_, state_, frame.time, cfg_.loss.exposure_target);
        const Image img =
            render_view(state_, frame.camera, frame.time, choice.embedding, choice.ic, true, cfg_);
        total += psnr(img, frame.image, &frame.mask);
    }
    return total / static_cast<double>(idx.size());
}

Checkpoint Trainer::make_checkpoint() const { return Checkpoint{state_, cfg_.to_echo()}; }

}  // namespace lumisplat
