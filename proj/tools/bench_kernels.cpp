// Timing comparison of the serial reference kernels against the OpenMP
// variants, at sizes representative of meta-training and bulk inference.
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "bmaml/kernels.hpp"
#include "bmaml/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(int reps, const std::function<void()>& fn) {
    fn();  // warm up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() / reps;
}

void report(const char* name, double serial_ms, double omp_ms) {
    std::printf("%-28s serial %9.3f ms   omp %9.3f ms   speedup %.2fx\n", name, serial_ms, omp_ms,
                serial_ms / omp_ms);
}

}  // namespace

int main() {
    using namespace bmaml;
    std::printf("threads: %d\n", kernels::max_threads());

    {
        const int m = 256, k = 256, n = 256;
        std::vector<double> a(m * k), b(k * n), c(m * n);
        RngStream rng(1);
        for (auto& v : a) v = rng.normal();
        for (auto& v : b) v = rng.normal();
        report("matmul 256x256x256",
               time_ms(20, [&] { kernels::matmul_serial(a.data(), m, k, false, b.data(), k, n,
                                                        false, c.data()); }),
               time_ms(20, [&] { kernels::matmul_omp(a.data(), m, k, false, b.data(), k, n, false,
                                                     c.data()); }));
    }
    {
        const int m = 64, d = 3500;
        std::vector<double> p(static_cast<std::size_t>(m) * d), sq(static_cast<std::size_t>(m) * m);
        RngStream rng(2);
        for (auto& v : p) v = rng.normal();
        report("pairwise_sq_dists 64x3500",
               time_ms(50, [&] { kernels::pairwise_sq_dists_serial(p.data(), m, d, sq.data()); }),
               time_ms(50, [&] { kernels::pairwise_sq_dists_omp(p.data(), m, d, sq.data()); }));
    }
    {
        const int m = 64, d = 3500;
        std::vector<double> p(static_cast<std::size_t>(m) * d), s(p.size()),
            sq(static_cast<std::size_t>(m) * m);
        RngStream rng(3);
        for (auto& v : p) v = rng.normal();
        for (auto& v : s) v = rng.normal();
        kernels::pairwise_sq_dists_serial(p.data(), m, d, sq.data());
        std::vector<double> work = p;
        report("svgd_apply 64x3500",
               time_ms(50,
                       [&] {
                           work = p;
                           kernels::svgd_apply_serial(work.data(), s.data(), sq.data(), m, d, 1.0,
                                                      0.01);
                       }),
               time_ms(50, [&] {
                   work = p;
                   kernels::svgd_apply_omp(work.data(), s.data(), sq.data(), m, d, 1.0, 0.01);
               }));
    }
    return 0;
}
