#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lumisplat/rng.hpp"
#include "lumisplat/scene.hpp"

namespace lumisplat {

enum class Activation : uint8_t { None = 0, Relu = 1, Sigmoid = 2, Tanh = 3 };

struct DenseLayer {
    int in = 0, out = 0;
    Activation act = Activation::None;
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> biases;   // out
};

struct Mlp {
    std::vector<DenseLayer> layers;

    int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
    int output_dim() const { return layers.empty() ? 0 : layers.back().out; }
    size_t param_count() const;

    // Xavier-uniform weights, zero biases.
    static Mlp make(const std::vector<int>& dims, const std::vector<Activation>& acts, Rng& rng);
};

struct MlpTrace {
    std::vector<std::vector<double>> inputs;  // inputs[l] feeds layer l; inputs.back() is the output
    std::vector<std::vector<double>> preact;  // pre-activation per layer
    bool valid = false;

    std::span<const double> output() const { return inputs.back(); }
};

struct MlpGrads {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    MlpGrads() = default;
    explicit MlpGrads(const Mlp& net);
    void zero();
};

// Throws Error("DimMismatch") when the input length is wrong.
void mlp_forward(const Mlp& net, std::span<const double> input, MlpTrace& trace);

// Chain-rule gradients; accumulates parameter gradients, returns the input
// gradient. Throws Error("TraceMissing") when the trace was not produced by a
// matching forward call.
std::vector<double> mlp_backward(const Mlp& net, const MlpTrace& trace, std::span<const double> upstream,
                                 MlpGrads& grads);

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Moment buffers for one flat parameter array.
class Adam {
   public:
    Adam() = default;
    explicit Adam(size_t n) : m_(n, 0.0), v_(n, 0.0) {}

    // Throws Error("ShapeMismatch") when grads and state disagree with params.
    void step(std::span<double> params, std::span<const double> grads, double lr, const AdamParams& hp = {});

    // Realigns the moments after a densify/prune row edit.
    void remap_rows(const RowEdit& edit, size_t row_len);

    int64_t step_count() const { return steps_; }
    size_t size() const { return m_.size(); }

   private:
    std::vector<double> m_, v_;
    int64_t steps_ = 0;
};

struct FdReport {
    double max_rel_err = 0.0;
    size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

// Central finite differences of `loss` against `analytic`, perturbing params
// in place. Relative error uses denominator max(|analytic|, |numeric|, 1e-8).
// The caller is responsible for keeping the loss differentiable at the
// evaluation point (kinks such as |x| at 0 are the caller's to exclude).
FdReport finite_diff_check(const std::function<double()>& loss, double* params, const double* analytic, size_t n,
                           double h = 1e-4);

}  // namespace lumisplat
