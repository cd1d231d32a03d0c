#include <cmath>
#include <cstddef>

#include "lumisplat/kernels.hpp"

namespace lumisplat::kernels {
namespace {

void splat_alpha_row_scalar(double mean_x, double mean_y, double qa, double qb, double qc, double opacity,
                            double alpha_clamp, double x0, double y, int n, double* alpha) {
    const double dy = y - mean_y;
    const double cross = 2.0 * qb * dy;
    const double const_term = qc * dy * dy;
    for (int j = 0; j < n; ++j) {
        const double dx = x0 + static_cast<double>(j) - mean_x;
        const double q = qa * dx * dx + cross * dx + const_term;
        double a = opacity * std::exp(-0.5 * q);
        if (a > alpha_clamp) a = alpha_clamp;
        alpha[j] = a;
    }
}

void gemv_scalar(const double* w, const double* b, const double* x, int rows, int cols, double* y) {
    for (int r = 0; r < rows; ++r) {
        const double* wr = w + static_cast<size_t>(r) * cols;
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = b ? acc + b[r] : acc;
    }
}

void gemv_t_acc_scalar(const double* w, const double* g, int rows, int cols, double* xg) {
    for (int r = 0; r < rows; ++r) {
        const double* wr = w + static_cast<size_t>(r) * cols;
        const double gr = g[r];
        for (int c = 0; c < cols; ++c) xg[c] += wr[c] * gr;
    }
}

void ger_acc_scalar(double* wg, const double* g, const double* x, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        double* wr = wg + static_cast<size_t>(r) * cols;
        const double gr = g[r];
        for (int c = 0; c < cols; ++c) wr[c] += gr * x[c];
    }
}

double sum_scalar(const double* x, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

double sum_sq_diff_scalar(const double* a, const double* b, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void adam_update_scalar(double* p, const double* g, double* m, double* v, size_t n, double lr, double beta1,
                        double beta2, double eps, double bias_corr1, double bias_corr2) {
    for (size_t i = 0; i < n; ++i) {
        const double gi = g[i];
        const double mi = beta1 * m[i] + (1.0 - beta1) * gi;
        const double vi = beta2 * v[i] + (1.0 - beta2) * (gi * gi);
        m[i] = mi;
        v[i] = vi;
        const double mhat = mi / bias_corr1;
        const double vhat = vi / bias_corr2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

namespace detail {
const KernelTable& scalar_table() {
    static const KernelTable t{splat_alpha_row_scalar, gemv_scalar,        gemv_t_acc_scalar, ger_acc_scalar,
                               sum_scalar,             sum_sq_diff_scalar, adam_update_scalar};
    return t;
}
}  // namespace detail

}  // namespace lumisplat::kernels
