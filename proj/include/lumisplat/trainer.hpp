#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lumisplat/data_io.hpp"
#include "lumisplat/losses.hpp"
#include "lumisplat/model.hpp"
#include "lumisplat/rasterizer.hpp"

namespace lumisplat {

struct AblationFlags {
    bool use_embedding = true;
    bool use_region = true;
    bool use_spatial = true;
    bool use_exposure_loss = true;
};

struct TrainConfig {
    int iterations = 3000;

    // Learning rates; lr_means is scaled by the scene extent at setup.
    double lr_means = 1.6e-4;
    double lr_rot = 1e-3;
    double lr_scale = 5e-3;
    double lr_opacity = 5e-2;
    double lr_color = 2.5e-3;
    double lr_deform = 1.6e-3;
    double lr_embed = 1.6e-3;
    double lr_nets = 1.6e-3;

    int warmup_static_iters = 500;
    int densify_interval = 500;
    double densify_grad_threshold = 2e-4;
    double prune_opacity = 5e-3;
    double densify_until = 0.6;   // fraction of iterations
    double percent_dense = 0.01;  // clone/split size boundary as a fraction of the extent

    uint64_t seed = 1;
    AblationFlags ablation;
    LossWeights loss;

    int embed_dim = 32;
    int hidden_dim = 64;
    int fourier_order = 2;
    int init_stride = 2;
    int threads = 1;
    int val_interval = 100;
    double adam_eps = 1e-8;
    double near_clip = 0.01;
    int tile_size = 16;

    RasterConfig raster() const {
        RasterConfig r;
        r.near_clip = near_clip;
        r.tile_size = tile_size;
        r.threads = threads;
        return r;
    }

    // Flat key=value configuration. Unknown keys are rejected with
    // Error("BadConfig").
    void apply_key_value(const std::string& key, const std::string& value);
    std::string to_echo() const;  // deterministic serialization of every key
};

TrainConfig config_from_file(const std::filesystem::path& path);
TrainConfig config_from_string(const std::string& text);

struct LossBreakdown {
    double color = 0.0;
    double depth = 0.0;
    double exposure = 0.0;
    double total = 0.0;
};

// Gradient sink aligned with a ModelState.
struct StepGrads {
    SceneGrads scene;
    std::vector<double> embeddings;
    MlpGrads bright, dark, spatial;

    static StepGrads zeros(const ModelState& state);
};

struct EvalExtras {
    Image* final_image = nullptr;               // C-tilde after spatial adjustment
    RenderOutput* render = nullptr;             // raw compositing output
    std::vector<double>* mean2d_norms = nullptr;  // per-Gaussian screen gradient norms
    std::vector<uint8_t>* visible = nullptr;      // per-Gaussian visibility
};

// Full loss of Eq-style pipeline on one frame: deform -> region enhance ->
// project/composite -> spatial adjust -> color/depth/exposure losses. With a
// non-null grads sink the exact backward pass runs as well. embed_row indexes
// the embedding table (the frame's position among training frames).
LossBreakdown evaluate_frame(const ModelState& state, const Frame& frame, int embed_row, const TrainConfig& cfg,
                             StepGrads* grads, const EvalExtras& extras = {});

// Forward-only render of an arbitrary view. With toned=false the raw color
// path is returned (the exposure-controlled appearance); otherwise the full
// enhancement chain runs under the config's ablation flags.
Image render_view(const ModelState& state, const Camera& cam, double t, std::span<const double> embedding,
                  ICLabel ic, bool toned, const TrainConfig& cfg);

enum class EmbeddingMode { Correction, Reconstruction, Zero };

EmbeddingMode embedding_mode_from_string(const std::string& s);

struct EmbeddingChoice {
    std::vector<double> embedding;
    int train_pos = -1;     // position among training frames, -1 for zero mode
    int frame_index = -1;   // dataset frame index
    ICLabel ic = ICLabel::Dark;
};

// Correction: the training frame whose mean intensity is closest to the
// exposure target. Reconstruction: the training frame nearest in time to the
// query. Zero: the zero vector. Throws Error("NoTrainedEmbeddings") when the
// table is empty.
EmbeddingChoice select_embedding(EmbeddingMode mode, const Dataset& ds, const ModelState& state, double query_time,
                                 double exposure_target);

class Trainer {
   public:
    Trainer(const Dataset& ds, const TrainConfig& cfg);

    // One optimization step on the train frame at position train_pos.
    LossBreakdown train_step(int train_pos);

    // Full schedule: shuffled frame cycling, warmup freeze, densify/prune,
    // per-iteration loss log and periodic validation PSNR.
    void train_loop(std::ostream* train_log = nullptr, std::ostream* val_log = nullptr);

    const ModelState& state() const { return state_; }
    ModelState& mutable_state() { return state_; }
    const TrainConfig& config() const { return cfg_; }
    int iteration() const { return iteration_; }

    Checkpoint make_checkpoint() const;

    // Mean masked PSNR of the toned reconstruction over a split.
    std::optional<double> split_psnr(bool test_split) const;

   private:
    void adam_steps(const StepGrads& grads, int train_pos);
    void run_densify();

    const Dataset& ds_;
    TrainConfig cfg_;
    ModelState state_;
    std::vector<int> train_frames_;  // dataset indices, position = embedding row

    double extent_ = 1.0;
    int iteration_ = 0;
    Rng shuffle_rng_{1}, densify_rng_{1};

    Adam adam_means_, adam_rot_, adam_scales_, adam_opacity_, adam_color_;
    Adam adam_mean_coeffs_, adam_scale_coeffs_, adam_opacity_coeffs_;
    Adam adam_embed_;
    struct MlpAdam {
        std::vector<Adam> w, b;
        void init(const Mlp& net);
        void step(Mlp& net, const MlpGrads& grads, double lr, const AdamParams& hp);
    };
    MlpAdam adam_bright_, adam_dark_, adam_spatial_;

    std::vector<double> grad_accum_;
    std::vector<uint32_t> grad_count_;
};

}  // namespace lumisplat
