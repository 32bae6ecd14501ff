#pragma once

#include <cstddef>
#include <vector>

namespace bmaml::kernels {

/// Worker-count cap. Resolution order: explicit set_max_threads() call,
/// then the BMAML_THREADS environment variable, then the hardware count.
int max_threads();
void set_max_threads(int n);

/// Run body(i) for i in [0, n). Parallelised with OpenMP when threads() > 1
/// and n is worth splitting; each index is processed exactly once, so any
/// body that only writes to index-owned state is deterministic.
template <typename Body>
void parallel_for(int n, const Body& body);

// ---------------------------------------------------------------------------
// Dense kernels. Each has a serial reference implementation and an OpenMP
// variant; the undecorated name dispatches on problem size and thread cap.
// The *_serial versions are kept callable so tests and the benchmark can
// compare the two paths directly.
// ---------------------------------------------------------------------------

/// C = op(A) * op(B), row-major. A is ar x ac as stored; ta transposes the
/// operand (likewise B/tb). C must hold m x n where m/n are the op'd shapes.
void matmul_serial(const double* a, int ar, int ac, bool ta, const double* b, int br, int bc,
                   bool tb, double* c);
void matmul_omp(const double* a, int ar, int ac, bool ta, const double* b, int br, int bc, bool tb,
                double* c);
void matmul(const double* a, int ar, int ac, bool ta, const double* b, int br, int bc, bool tb,
            double* c);

/// Squared Euclidean distances between all rows of an M x d particle matrix.
/// out is M x M, symmetric with zero diagonal.
void pairwise_sq_dists_serial(const double* particles, int m, int d, double* out);
void pairwise_sq_dists_omp(const double* particles, int m, int d, double* out);
void pairwise_sq_dists(const double* particles, int m, int d, double* out);

/// One synchronous kernelized particle update on raw values:
///   theta_i += eps/M * sum_j [ k_ij * score_j + (2/h) k_ij (theta_i - theta_j) ]
/// with k_ij = exp(-||theta_i - theta_j||^2 / h). All reads come from the
/// pre-step snapshot. sq_dists is the M x M matrix from pairwise_sq_dists.
void svgd_apply_serial(double* particles, const double* scores, const double* sq_dists, int m,
                       int d, double h, double eps);
void svgd_apply_omp(double* particles, const double* scores, const double* sq_dists, int m, int d,
                    double h, double eps);
void svgd_apply(double* particles, const double* scores, const double* sq_dists, int m, int d,
                double h, double eps);

/// Median of the upper-triangle entries of an M x M distance matrix
/// (distances, not squares; even counts average the two middle values).
double median_upper_triangle(const std::vector<double>& sq_dists, int m);

// ---------------------------------------------------------------------------

namespace detail {
void run_parallel(int n, void* ctx, void (*fn)(void*, int));
}

template <typename Body>
void parallel_for(int n, const Body& body) {
    auto trampoline = [](void* ctx, int i) { (*static_cast<const Body*>(ctx))(i); };
    detail::run_parallel(n, const_cast<Body*>(&body), trampoline);
}

}  // namespace bmaml::kernels
