#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "bmaml/kernels.hpp"
#include "bmaml/rng.hpp"

using namespace bmaml;

namespace {

std::vector<double> random_vec(std::uint64_t seed, int n) {
    RngStream rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

// Naive triple loop, independent of the kernel implementations.
std::vector<double> matmul_oracle(const std::vector<double>& a, int ar, int ac, bool ta,
                                  const std::vector<double>& b, int br, int bc, bool tb) {
    const int m = ta ? ac : ar, k = ta ? ar : ac, n = tb ? br : bc;
    std::vector<double> c(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) {
                const double av = ta ? a[p * ac + i] : a[i * ac + p];
                const double bv = tb ? b[j * bc + p] : b[p * bc + j];
                s += av * bv;
            }
            c[static_cast<std::size_t>(i) * n + j] = s;
        }
    return c;
}

}  // namespace

TEST_CASE("matmul matches the naive oracle for all transpose combinations") {
    const int ar = 5, ac = 7, br = 7, bc = 4;
    const auto a = random_vec(1, ar * ac);
    for (bool ta : {false, true}) {
        for (bool tb : {false, true}) {
            const int arr = ta ? ac : ar, acc = ta ? ar : ac;
            const int brr = tb ? bc : br, bcc = tb ? br : bc;
            const auto aa = random_vec(2, arr * acc);
            const auto bb = random_vec(3, brr * bcc);
            const auto want = matmul_oracle(aa, arr, acc, ta, bb, brr, bcc, tb);
            std::vector<double> got(want.size());
            kernels::matmul_serial(aa.data(), arr, acc, ta, bb.data(), brr, bcc, tb, got.data());
            for (std::size_t i = 0; i < want.size(); ++i)
                CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
        }
    }
    (void)a;
}

TEST_CASE("omp kernels are bit-identical to the serial references") {
    kernels::set_max_threads(4);
    SUBCASE("matmul") {
        const int m = 33, k = 47, n = 29;
        const auto a = random_vec(10, m * k);
        const auto b = random_vec(11, k * n);
        std::vector<double> c1(static_cast<std::size_t>(m) * n), c2(c1.size());
        kernels::matmul_serial(a.data(), m, k, false, b.data(), k, n, false, c1.data());
        kernels::matmul_omp(a.data(), m, k, false, b.data(), k, n, false, c2.data());
        for (std::size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] == c2[i]);
    }
    SUBCASE("pairwise_sq_dists") {
        const int m = 17, d = 23;
        const auto p = random_vec(12, m * d);
        std::vector<double> s1(static_cast<std::size_t>(m) * m), s2(s1.size());
        kernels::pairwise_sq_dists_serial(p.data(), m, d, s1.data());
        kernels::pairwise_sq_dists_omp(p.data(), m, d, s2.data());
        for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s1[i] == s2[i]);
    }
    SUBCASE("svgd_apply") {
        const int m = 9, d = 15;
        const auto p = random_vec(13, m * d);
        const auto sc = random_vec(14, m * d);
        std::vector<double> sq(static_cast<std::size_t>(m) * m);
        kernels::pairwise_sq_dists_serial(p.data(), m, d, sq.data());
        std::vector<double> p1 = p, p2 = p;
        kernels::svgd_apply_serial(p1.data(), sc.data(), sq.data(), m, d, 0.8, 0.05);
        kernels::svgd_apply_omp(p2.data(), sc.data(), sq.data(), m, d, 0.8, 0.05);
        for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);
    }
    kernels::set_max_threads(0);
}

TEST_CASE("pairwise distances are symmetric with zero diagonal") {
    const int m = 6, d = 4;
    const auto p = random_vec(20, m * d);
    std::vector<double> sq(static_cast<std::size_t>(m) * m);
    kernels::pairwise_sq_dists(p.data(), m, d, sq.data());
    for (int i = 0; i < m; ++i) {
        CHECK(sq[i * m + i] == 0.0);
        for (int j = 0; j < m; ++j) CHECK(sq[i * m + j] == sq[j * m + i]);
    }
}

TEST_CASE("median_upper_triangle handles odd and even counts") {
    // 3 particles -> 3 distances (odd), 4 particles -> 6 distances (even).
    std::vector<double> sq3 = {0, 1, 4, 1, 0, 9, 4, 9, 0};  // dists 1,2,3
    CHECK(kernels::median_upper_triangle(sq3, 3) == doctest::Approx(2.0));
    std::vector<double> sq4(16, 0.0);
    // upper-triangle dists: 1,2,3,4,5,6 -> median 3.5
    double vals[6] = {1, 2, 3, 4, 5, 6};
    int idx = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            sq4[i * 4 + j] = vals[idx] * vals[idx];
            sq4[j * 4 + i] = sq4[i * 4 + j];
            ++idx;
        }
    CHECK(kernels::median_upper_triangle(sq4, 4) == doctest::Approx(3.5));
}

TEST_CASE("BMAML_THREADS caps the worker count") {
    kernels::set_max_threads(3);
    CHECK(kernels::max_threads() == 3);
    kernels::set_max_threads(0);  // back to auto-detect
    CHECK(kernels::max_threads() >= 1);
}
