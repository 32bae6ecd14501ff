#include "bmaml/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bmaml::kernels {

namespace {

std::atomic<int> g_max_threads{0};

int detect_threads() {
    if (const char* env = std::getenv("BMAML_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

int max_threads() {
    int n = g_max_threads.load(std::memory_order_relaxed);
    if (n == 0) {
        n = detect_threads();
        g_max_threads.store(n, std::memory_order_relaxed);
    }
    return n;
}

// n = 0 resets to auto-detect (BMAML_THREADS env, then hardware count).
void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n, std::memory_order_relaxed); }

namespace detail {

void run_parallel(int n, void* ctx, void (*fn)(void*, int)) {
    int threads = std::min(max_threads(), n);
#ifdef _OPENMP
    if (threads > 1 && n > 1) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
        for (int i = 0; i < n; ++i) fn(ctx, i);
        return;
    }
#endif
    (void)threads;
    for (int i = 0; i < n; ++i) fn(ctx, i);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

namespace {

// Row r of op(A): returns stride and base so op'd element (r, k) = base[k * stride].
inline void matmul_rows(int ar, int ac, bool ta, int br, int bc, bool tb, int& m, int& k, int& n) {
    m = ta ? ac : ar;
    k = ta ? ar : ac;
    n = tb ? br : bc;
    (void)bc;
}

inline void matmul_row(const double* a, int ar, int ac, bool ta, const double* b, int br, int bc,
                       bool tb, int i, int k, int n, double* crow) {
    for (int j = 0; j < n; ++j) crow[j] = 0.0;
    for (int p = 0; p < k; ++p) {
        const double av = ta ? a[static_cast<std::size_t>(p) * ac + i]
                             : a[static_cast<std::size_t>(i) * ac + p];
        if (av == 0.0) continue;
        if (!tb) {
            const double* brow = b + static_cast<std::size_t>(p) * bc;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        } else {
            for (int j = 0; j < n; ++j) crow[j] += av * b[static_cast<std::size_t>(j) * bc + p];
        }
    }
    (void)ar;
    (void)br;
}

}  // namespace

void matmul_serial(const double* a, int ar, int ac, bool ta, const double* b, int br, int bc,
                   bool tb, double* c) {
    int m, k, n;
    matmul_rows(ar, ac, ta, br, bc, tb, m, k, n);
    for (int i = 0; i < m; ++i)
        matmul_row(a, ar, ac, ta, b, br, bc, tb, i, k, n, c + static_cast<std::size_t>(i) * n);
}

void matmul_omp(const double* a, int ar, int ac, bool ta, const double* b, int br, int bc, bool tb,
                double* c) {
    int m, k, n;
    matmul_rows(ar, ac, ta, br, bc, tb, m, k, n);
#ifdef _OPENMP
    int threads = std::min(max_threads(), m);
#pragma omp parallel for schedule(static) num_threads(threads)
#endif
    for (int i = 0; i < m; ++i)
        matmul_row(a, ar, ac, ta, b, br, bc, tb, i, k, n, c + static_cast<std::size_t>(i) * n);
}

void matmul(const double* a, int ar, int ac, bool ta, const double* b, int br, int bc, bool tb,
            double* c) {
    int m, k, n;
    matmul_rows(ar, ac, ta, br, bc, tb, m, k, n);
    // Row-partitioned, so both paths produce bit-identical sums per element.
    if (static_cast<long long>(m) * k * n >= 262144 && max_threads() > 1)
        matmul_omp(a, ar, ac, ta, b, br, bc, tb, c);
    else
        matmul_serial(a, ar, ac, ta, b, br, bc, tb, c);
}

// ---------------------------------------------------------------------------
// pairwise squared distances
// ---------------------------------------------------------------------------

namespace {

inline void pairwise_row(const double* particles, int m, int d, int i, double* out) {
    const double* pi = particles + static_cast<std::size_t>(i) * d;
    out[static_cast<std::size_t>(i) * m + i] = 0.0;
    for (int j = 0; j < i; ++j) {
        const double* pj = particles + static_cast<std::size_t>(j) * d;
        double s = 0.0;
        for (int k = 0; k < d; ++k) {
            double diff = pi[k] - pj[k];
            s += diff * diff;
        }
        out[static_cast<std::size_t>(i) * m + j] = s;
        out[static_cast<std::size_t>(j) * m + i] = s;
    }
}

}  // namespace

void pairwise_sq_dists_serial(const double* particles, int m, int d, double* out) {
    for (int i = 0; i < m; ++i) pairwise_row(particles, m, d, i, out);
}

void pairwise_sq_dists_omp(const double* particles, int m, int d, double* out) {
#ifdef _OPENMP
    int threads = std::min(max_threads(), m);
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
#endif
    for (int i = 0; i < m; ++i) pairwise_row(particles, m, d, i, out);
}

void pairwise_sq_dists(const double* particles, int m, int d, double* out) {
    if (static_cast<long long>(m) * m * d >= 65536 && max_threads() > 1)
        pairwise_sq_dists_omp(particles, m, d, out);
    else
        pairwise_sq_dists_serial(particles, m, d, out);
}

// ---------------------------------------------------------------------------
// bulk SVGD update
// ---------------------------------------------------------------------------

namespace {

inline void svgd_row(double* particles, const double* snapshot, const double* scores,
                     const double* sq_dists, int m, int d, double h, double eps, int i) {
    double* ti = particles + static_cast<std::size_t>(i) * d;
    const double* si = snapshot + static_cast<std::size_t>(i) * d;
    for (int j = 0; j < m; ++j) {
        const double k = std::exp(-sq_dists[static_cast<std::size_t>(i) * m + j] / h);
        const double* sj = snapshot + static_cast<std::size_t>(j) * d;
        const double* gj = scores + static_cast<std::size_t>(j) * d;
        const double rep = 2.0 * k / h;
        const double w = eps / m;
        for (int x = 0; x < d; ++x) ti[x] += w * (k * gj[x] + rep * (si[x] - sj[x]));
    }
}

}  // namespace

void svgd_apply_serial(double* particles, const double* scores, const double* sq_dists, int m,
                       int d, double h, double eps) {
    std::vector<double> snapshot(particles, particles + static_cast<std::size_t>(m) * d);
    for (int i = 0; i < m; ++i)
        svgd_row(particles, snapshot.data(), scores, sq_dists, m, d, h, eps, i);
}

void svgd_apply_omp(double* particles, const double* scores, const double* sq_dists, int m, int d,
                    double h, double eps) {
    std::vector<double> snapshot(particles, particles + static_cast<std::size_t>(m) * d);
#ifdef _OPENMP
    int threads = std::min(max_threads(), m);
#pragma omp parallel for schedule(static) num_threads(threads)
#endif
    for (int i = 0; i < m; ++i)
        svgd_row(particles, snapshot.data(), scores, sq_dists, m, d, h, eps, i);
}

void svgd_apply(double* particles, const double* scores, const double* sq_dists, int m, int d,
                double h, double eps) {
    if (static_cast<long long>(m) * m * d >= 65536 && max_threads() > 1)
        svgd_apply_omp(particles, scores, sq_dists, m, d, h, eps);
    else
        svgd_apply_serial(particles, scores, sq_dists, m, d, h, eps);
}

double median_upper_triangle(const std::vector<double>& sq_dists, int m) {
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(m) * (m - 1) / 2);
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j)
            dists.push_back(std::sqrt(sq_dists[static_cast<std::size_t>(i) * m + j]));
    std::sort(dists.begin(), dists.end());
    const std::size_t n = dists.size();
    if (n % 2 == 1) return dists[n / 2];
    return 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
}

}  // namespace bmaml::kernels
