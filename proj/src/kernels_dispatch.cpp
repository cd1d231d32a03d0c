#include <cstdlib>
#include <cstring>

#include "lumisplat/image.hpp"
#include "lumisplat/kernels.hpp"

namespace lumisplat::kernels {
namespace {

Backend pick_initial_backend() {
    if (const char* env = std::getenv("LUMISPLAT_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
        if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Backend::Avx2;
    }
    return avx2_supported() ? Backend::Avx2 : Backend::Scalar;
}

struct State {
    Backend backend = pick_initial_backend();
    const detail::KernelTable* table =
        backend == Backend::Avx2 ? &detail::avx2_table() : &detail::scalar_table();
};

State& state() {
    static State s;
    return s;
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend active_backend() { return state().backend; }

void set_backend(Backend b) {
    if (b == Backend::Avx2 && !avx2_supported())
        throw Error("UnsupportedBackend", "AVX2 not available on this CPU");
    state().backend = b;
    state().table = b == Backend::Avx2 ? &detail::avx2_table() : &detail::scalar_table();
}

std::string backend_name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

void splat_alpha_row(double mean_x, double mean_y, double qa, double qb, double qc, double opacity,
                     double alpha_clamp, double x0, double y, int n, double* alpha) {
    state().table->splat_alpha_row(mean_x, mean_y, qa, qb, qc, opacity, alpha_clamp, x0, y, n, alpha);
}

void gemv(const double* w, const double* b, const double* x, int rows, int cols, double* y) {
    state().table->gemv(w, b, x, rows, cols, y);
}

void gemv_t_acc(const double* w, const double* g, int rows, int cols, double* xg) {
    state().table->gemv_t_acc(w, g, rows, cols, xg);
}

void ger_acc(double* wg, const double* g, const double* x, int rows, int cols) {
    state().table->ger_acc(wg, g, x, rows, cols);
}

double sum(const double* x, size_t n) { return state().table->sum(x, n); }

double sum_sq_diff(const double* a, const double* b, size_t n) { return state().table->sum_sq_diff(a, b, n); }

void adam_update(double* p, const double* g, double* m, double* v, size_t n, double lr, double beta1, double beta2,
                 double eps, double bias_corr1, double bias_corr2) {
    state().table->adam_update(p, g, m, v, n, lr, beta1, beta2, eps, bias_corr1, bias_corr2);
}

}  // namespace lumisplat::kernels
