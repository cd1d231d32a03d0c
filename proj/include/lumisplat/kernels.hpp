#pragma once

#include <cstddef>
#include <string>

namespace lumisplat::kernels {

// Data-parallel inner loops used by the rasterizer, the MLP layer arithmetic,
// the optimizer and the reductions. Every kernel has a scalar reference
// implementation and an AVX2 variant; the active variant is selected at
// runtime from CPU features (overridable via set_backend or the
// LUMISPLAT_KERNELS=scalar|avx2 environment variable). The two variants are
// equivalence-tested against each other in tests/test_kernels.cpp.

enum class Backend { Scalar, Avx2 };

bool avx2_supported();
Backend active_backend();
void set_backend(Backend b);  // throws Error("UnsupportedBackend") if unavailable
std::string backend_name(Backend b);

// Gaussian falloff opacities for one pixel row.
//   alpha[j] = min(alpha_clamp, opacity * exp(-0.5 * q(dx, dy))),
//   q(dx, dy) = qa*dx^2 + 2*qb*dx*dy + qc*dy^2,  dx = x0 + j - mean_x,  dy = y - mean_y
// alpha must have capacity for n rounded up to a multiple of 4; entries past
// n are scratch. Every lane runs the same instruction sequence, so results do
// not depend on how a row is segmented.
void splat_alpha_row(double mean_x, double mean_y, double qa, double qb, double qc, double opacity,
                     double alpha_clamp, double x0, double y, int n, double* alpha);

// y = W x + b with W row-major (rows x cols). b may be null.
void gemv(const double* w, const double* b, const double* x, int rows, int cols, double* y);

// xg += W^T g
void gemv_t_acc(const double* w, const double* g, int rows, int cols, double* xg);

// Wg += g x^T
void ger_acc(double* wg, const double* g, const double* x, int rows, int cols);

double sum(const double* x, size_t n);
double sum_sq_diff(const double* a, const double* b, size_t n);

// Bias-corrected Adam step over a flat parameter array, elementwise:
//   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g^2
//   p -= lr * (m / bc1) / (sqrt(v / bc2) + eps)
void adam_update(double* p, const double* g, double* m, double* v, size_t n, double lr, double beta1, double beta2,
                 double eps, double bias_corr1, double bias_corr2);

// Per-implementation entry points, exposed for equivalence tests.
namespace detail {
struct KernelTable {
    void (*splat_alpha_row)(double, double, double, double, double, double, double, double, double, int, double*);
    void (*gemv)(const double*, const double*, const double*, int, int, double*);
    void (*gemv_t_acc)(const double*, const double*, int, int, double*);
    void (*ger_acc)(double*, const double*, const double*, int, int);
    double (*sum)(const double*, size_t);
    double (*sum_sq_diff)(const double*, const double*, size_t);
    void (*adam_update)(double*, const double*, double*, double*, size_t, double, double, double, double, double,
                        double);
};
const KernelTable& scalar_table();
const KernelTable& avx2_table();  // only valid to call through when avx2_supported()
}  // namespace detail

}  // namespace lumisplat::kernels
