// lumisplat CLI: synthesize datasets, train, render/correct views, evaluate.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lumisplat/data_io.hpp"
#include "lumisplat/kernels.hpp"
#include "lumisplat/metrics.hpp"
#include "lumisplat/trainer.hpp"

namespace fs = std::filesystem;
using namespace lumisplat;

namespace {

struct SynthArgs {
    std::string out;
    int frames = 21;
    std::string size = "64x64";
    uint64_t seed = 1;
    double ev_jitter = 0.5;
    bool tool = false;
};

struct TrainArgs {
    std::string data;
    std::string out;
    std::string config;
    std::string ablate;
    std::vector<std::string> sets;
    uint64_t seed = 0;
    int iterations = -1;
    int threads = -1;
    bool seed_given = false;
};

struct RenderArgs {
    std::string ckpt;
    std::string data;
    std::string out;
    std::string mode;  // empty -> command default
    int frame = -1;
    int threads = -1;
};

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::string mask;
    std::string report;
};

void parse_size(const std::string& s, int& w, int& h) {
    const size_t x = s.find('x');
    if (x == std::string::npos) throw Error("BadSpec", "--size expects WxH, got '" + s + "'");
    w = std::stoi(s.substr(0, x));
    h = std::stoi(s.substr(x + 1));
}

// Returns false (usage error) on an unknown token.
bool apply_ablate(const std::string& list, AblationFlags& flags) {
    size_t begin = 0;
    while (begin <= list.size()) {
        const size_t end = std::min(list.find(',', begin), list.size());
        const std::string token = list.substr(begin, end - begin);
        if (token == "embedding") flags.use_embedding = false;
        else if (token == "region") flags.use_region = false;
        else if (token == "spatial") flags.use_spatial = false;
        else if (token == "exposure") flags.use_exposure_loss = false;
        else if (!token.empty()) {
            std::cerr << "invalid --ablate token '" << token
                      << "' (expected embedding, region, spatial, exposure)\n";
            return false;
        }
        begin = end + 1;
    }
    return true;
}

void log_config(const TrainConfig& cfg) {
    std::cerr << "resolved config (kernels=" << kernels::backend_name(kernels::active_backend()) << "):\n"
              << cfg.to_echo();
}

int run_synth(const SynthArgs& args) {
    SynthSpec spec;
    parse_size(args.size, spec.width, spec.height);
    spec.frames = args.frames;
    spec.seed = args.seed;
    spec.ev_jitter = args.ev_jitter;
    spec.tool = args.tool;

    synth_dataset(spec, args.out);

    const Dataset ds = load_dataset(args.out);
    std::cout << "wrote " << ds.frames.size() << " frames (" << ds.manifest.width << "x" << ds.manifest.height
              << ") to " << args.out << "\n"
              << "train frames: " << ds.manifest.train_idx.size() << ", test frames: " << ds.manifest.test_idx.size()
              << "\n";
    for (size_t i = 0; i < ds.frames.size(); ++i) {
        const auto& rec = ds.manifest.frames[i];
        std::printf("frame %03zu t=%.4f ev=%+.3f ic=%s\n", i, rec.time, rec.ev_true.value_or(0.0),
                    rec.ic->c_str());
    }
    return 0;
}

int run_train(const TrainArgs& args) {
    TrainConfig cfg;
    if (!args.config.empty()) cfg = config_from_file(args.config);
    for (const std::string& kv : args.sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos) throw Error("BadConfig", "--set expects key=value, got '" + kv + "'");
        cfg.apply_key_value(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (args.seed_given) cfg.seed = args.seed;
    if (args.iterations >= 0) cfg.iterations = args.iterations;
    if (args.threads >= 0) cfg.threads = args.threads;
    if (!args.ablate.empty() && !apply_ablate(args.ablate, cfg.ablation)) return 2;
    log_config(cfg);

    const Dataset ds = load_dataset(args.data);
    Trainer trainer(ds, cfg);

    std::ofstream train_log(args.out + ".train.tsv");
    std::ofstream val_log(args.out + ".val.tsv");
    trainer.train_loop(&train_log, &val_log);

    save_checkpoint(trainer.make_checkpoint(), args.out);

    const auto train_psnr = trainer.split_psnr(false);
    const auto test_psnr = trainer.split_psnr(true);
    std::printf("final gaussians=%zu train_psnr=%.4f test_psnr=%s\n", trainer.state().set.count(),
                train_psnr.value_or(0.0), test_psnr ? std::to_string(*test_psnr).c_str() : "n/a");
    return 0;
}

int run_render(const RenderArgs& args, bool correct_command) {
    const Checkpoint ckpt = load_checkpoint(args.ckpt);
    TrainConfig cfg = config_from_string(ckpt.config_echo);
    if (args.threads >= 0) cfg.threads = args.threads;

    const Dataset ds = load_dataset(args.data);
    const std::string mode_str = !args.mode.empty() ? args.mode : (correct_command ? "correction" : "reconstruction");
    const EmbeddingMode mode = embedding_mode_from_string(mode_str);

    fs::create_directories(args.out);

    std::vector<int> frames;
    if (args.frame >= 0) {
        if (args.frame >= static_cast<int>(ds.frames.size()))
            throw Error("BadSpec", "--frame out of range");
        frames.push_back(args.frame);
    } else {
        frames.resize(ds.frames.size());
        std::iota(frames.begin(), frames.end(), 0);
    }

    for (int fi : frames) {
        const Frame& frame = ds.frames[fi];
        Image img;
        if (mode == EmbeddingMode::Zero) {
            const std::vector<double> zero(ckpt.state.embed_dim, 0.0);
            img = render_view(ckpt.state, frame.camera, frame.time, zero, frame.ic, false, cfg);
        } else {
            const EmbeddingChoice choice =
                select_embedding(mode, ds, ckpt.state, frame.time, cfg.loss.exposure_target);
            img = render_view(ckpt.state, frame.camera, frame.time, choice.embedding, choice.ic, true, cfg);
        }
        char name[16];
        std::snprintf(name, sizeof(name), "%05d.png", fi);
        write_png_rgb8(fs::path(args.out) / name, img);
    }
    std::cout << "rendered " << frames.size() << " frame(s) in " << mode_str << " mode to " << args.out << "\n";
    return 0;
}

std::vector<fs::path> png_files(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".png") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

int run_eval(const EvalArgs& args) {
    const auto pred = png_files(args.pred);
    const auto gt = png_files(args.gt);
    if (pred.empty() || pred.size() != gt.size()) {
        std::cerr << "eval: prediction and ground-truth file counts differ (" << pred.size() << " vs " << gt.size()
                  << ")\n";
        return 1;
    }

    EvalReport report;
    report.masked = !args.mask.empty();
    for (size_t i = 0; i < pred.size(); ++i) {
        const Image a = read_png_rgb8(pred[i]);
        const Image b = read_png_rgb8(gt[i]);
        Image mask;
        if (report.masked) mask = read_png_mask(fs::path(args.mask) / pred[i].filename());
        report.add(pred[i].filename().string(), psnr(a, b, report.masked ? &mask : nullptr), ssim(a, b));
    }
    report.finalize();
    std::cout << report.to_tsv();

    const std::string report_path =
        args.report.empty() ? (fs::path(args.pred) / "eval_report.json").string() : args.report;
    std::ofstream out(report_path);
    out << report.to_json() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gaussian-splatting reconstruction with illumination correction"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic exposure-corrupted dataset");
    synth->add_option("--out", synth_args.out, "Output directory")->required();
    synth->add_option("--frames", synth_args.frames, "Frame count");
    synth->add_option("--size", synth_args.size, "Resolution WxH");
    synth->add_option("--seed", synth_args.seed, "RNG seed");
    synth->add_option("--ev-jitter", synth_args.ev_jitter, "EV jitter half-range");
    synth->add_flag("--tool", synth_args.tool, "Mask out a moving tool rectangle");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "Train a scene from a dataset");
    train->add_option("--data", train_args.data, "Dataset directory")->required();
    train->add_option("--out", train_args.out, "Checkpoint output path")->required();
    train->add_option("--config", train_args.config, "key=value config file");
    train->add_option("--ablate", train_args.ablate, "Comma list: embedding,region,spatial,exposure");
    train->add_option("--set", train_args.sets, "Override a config key (key=value)");
    train->add_option("--seed", train_args.seed, "RNG seed");
    train->add_option("--iterations", train_args.iterations, "Iteration count");
    train->add_option("--threads", train_args.threads, "Rasterizer worker threads");

    RenderArgs render_args;
    CLI::App* render = app.add_subcommand("render", "Render dataset views from a checkpoint");
    CLI::App* correct = app.add_subcommand("correct", "Render illumination-corrected views");
    for (CLI::App* cmd : {render, correct}) {
        cmd->add_option("--ckpt", render_args.ckpt, "Checkpoint path")->required();
        cmd->add_option("--data", render_args.data, "Dataset directory")->required();
        cmd->add_option("--out", render_args.out, "Output directory")->required();
        cmd->add_option("--embedding-mode", render_args.mode, "correction|reconstruction|zero");
        cmd->add_option("--frame", render_args.frame, "Render a single frame index");
        cmd->add_option("--threads", render_args.threads, "Rasterizer worker threads");
    }

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "PSNR/SSIM between two image directories");
    eval->add_option("--pred", eval_args.pred, "Prediction directory")->required();
    eval->add_option("--gt", eval_args.gt, "Ground-truth directory")->required();
    eval->add_option("--mask", eval_args.mask, "Mask directory");
    eval->add_option("--report", eval_args.report, "JSON report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    train_args.seed_given = train->count("--seed") > 0;

    try {
        if (app.got_subcommand(synth)) return run_synth(synth_args);
        if (app.got_subcommand(train)) return run_train(train_args);
        if (app.got_subcommand(render)) return run_render(render_args, false);
        if (app.got_subcommand(correct)) return run_render(render_args, true);
        if (app.got_subcommand(eval)) return run_eval(eval_args);
    } catch (const Error& e) {
        if (e.code() == "BadConfig") {
            std::cerr << "usage error: " << e.what() << "\n";
            return 2;
        }
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
