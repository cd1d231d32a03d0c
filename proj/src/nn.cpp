#include "lumisplat/nn.hpp"

#include <cmath>

#include "lumisplat/image.hpp"
#include "lumisplat/kernels.hpp"

namespace lumisplat {

size_t Mlp::param_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.biases.size();
    return n;
}

Mlp Mlp::make(const std::vector<int>& dims, const std::vector<Activation>& acts, Rng& rng) {
    Mlp net;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer;
        layer.in = dims[l];
        layer.out = dims[l + 1];
        layer.act = acts[l];
        layer.weights.resize(static_cast<size_t>(layer.out) * layer.in);
        layer.biases.assign(layer.out, 0.0);
        const double bound = std::sqrt(6.0 / (layer.in + layer.out));
        for (double& w : layer.weights) w = rng.uniform(-bound, bound);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

MlpGrads::MlpGrads(const Mlp& net) {
    weights.reserve(net.layers.size());
    biases.reserve(net.layers.size());
    for (const auto& l : net.layers) {
        weights.emplace_back(l.weights.size(), 0.0);
        biases.emplace_back(l.biases.size(), 0.0);
    }
}

void MlpGrads::zero() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

namespace {

void apply_activation(Activation act, const std::vector<double>& z, std::vector<double>& out) {
    out.resize(z.size());
    switch (act) {
        case Activation::None:
            out = z;
            break;
        case Activation::Relu:
            for (size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
            break;
        case Activation::Sigmoid:
            for (size_t i = 0; i < z.size(); ++i) out[i] = sigmoid(z[i]);
            break;
        case Activation::Tanh:
            for (size_t i = 0; i < z.size(); ++i) out[i] = std::tanh(z[i]);
            break;
    }
}

}  // namespace

void mlp_forward(const Mlp& net, std::span<const double> input, MlpTrace& trace) {
    if (static_cast<int>(input.size()) != net.input_dim())
        throw Error("DimMismatch", "mlp input length " + std::to_string(input.size()) + ", expected " +
                                       std::to_string(net.input_dim()));

    trace.inputs.assign(net.layers.size() + 1, {});
    trace.preact.assign(net.layers.size(), {});
    trace.inputs[0].assign(input.begin(), input.end());

    for (size_t l = 0; l < net.layers.size(); ++l) {
        const DenseLayer& layer = net.layers[l];
        trace.preact[l].resize(layer.out);
        kernels::gemv(layer.weights.data(), layer.biases.data(), trace.inputs[l].data(), layer.out, layer.in,
                      trace.preact[l].data());
        apply_activation(layer.act, trace.preact[l], trace.inputs[l + 1]);
    }
    trace.valid = true;
}

std::vector<double> mlp_backward(const Mlp& net, const MlpTrace& trace, std::span<const double> upstream,
                                 MlpGrads& grads) {
    if (!trace.valid || trace.inputs.size() != net.layers.size() + 1 ||
        (!net.layers.empty() && trace.inputs[0].size() != static_cast<size_t>(net.input_dim())))
        throw Error("TraceMissing", "backward without a matching forward trace");

    std::vector<double> g(upstream.begin(), upstream.end());
    for (size_t li = net.layers.size(); li-- > 0;) {
        const DenseLayer& layer = net.layers[li];
        const std::vector<double>& z = trace.preact[li];
        const std::vector<double>& activated = trace.inputs[li + 1];

        // dL/dz from dL/da.
        switch (layer.act) {
            case Activation::None:
                break;
            case Activation::Relu:
                for (int i = 0; i < layer.out; ++i)
                    if (z[i] <= 0.0) g[i] = 0.0;
                break;
            case Activation::Sigmoid:
                for (int i = 0; i < layer.out; ++i) g[i] *= activated[i] * (1.0 - activated[i]);
                break;
            case Activation::Tanh:
                for (int i = 0; i < layer.out; ++i) g[i] *= 1.0 - activated[i] * activated[i];
                break;
        }

        kernels::ger_acc(grads.weights[li].data(), g.data(), trace.inputs[li].data(), layer.out, layer.in);
        for (int i = 0; i < layer.out; ++i) grads.biases[li][i] += g[i];

        std::vector<double> gin(layer.in, 0.0);
        kernels::gemv_t_acc(layer.weights.data(), g.data(), layer.out, layer.in, gin.data());
        g = std::move(gin);
    }
    return g;
}

void Adam::step(std::span<double> params, std::span<const double> grads, double lr, const AdamParams& hp) {
    if (m_.size() != params.size() || grads.size() != params.size())
        throw Error("ShapeMismatch", "adam state " + std::to_string(m_.size()) + " vs params " +
                                         std::to_string(params.size()) + " vs grads " + std::to_string(grads.size()));
    ++steps_;
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(steps_));
    kernels::adam_update(params.data(), grads.data(), m_.data(), v_.data(), params.size(), lr, hp.beta1, hp.beta2,
                         hp.eps, bc1, bc2);
}

void Adam::remap_rows(const RowEdit& edit, size_t row_len) {
    std::vector<double> m(edit.source.size() * row_len, 0.0);
    std::vector<double> v(edit.source.size() * row_len, 0.0);
    for (size_t i = 0; i < edit.kept; ++i) {
        const size_t src = edit.source[i];
        std::copy_n(m_.begin() + src * row_len, row_len, m.begin() + i * row_len);
        std::copy_n(v_.begin() + src * row_len, row_len, v.begin() + i * row_len);
    }
    m_ = std::move(m);
    v_ = std::move(v);
}

FdReport finite_diff_check(const std::function<double()>& loss, double* params, const double* analytic, size_t n,
                           double h) {
    FdReport report;
    for (size_t i = 0; i < n; ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        const double up = loss();
        params[i] = saved - h;
        const double down = loss();
        params[i] = saved;

        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-8});
        const double rel = std::fabs(analytic[i] - numeric) / denom;
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_index = i;
            report.analytic_at_worst = analytic[i];
            report.numeric_at_worst = numeric;
        }
    }
    return report;
}

}  // namespace lumisplat
