#include <doctest.h>

#include "wss/kernels/conv.hpp"
#include "wss/reference/reference.hpp"
#include "wss/util/parallel.hpp"
#include "wss/util/rng.hpp"

#include <vector>

using namespace wss;

namespace {

std::vector<double> random_vec(size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = 2.0 * rng.uniform() - 1.0;
    return v;
}

} // namespace

TEST_CASE("conv kernels agree with the naive reference") {
    Rng rng(101);
    const ConvShape shapes[] = {
        {2, 5, 1, 9, 9, 1, 3, 3, 1, 1, 1},   // 2D stride 1
        {3, 4, 1, 10, 7, 1, 3, 3, 1, 2, 2},  // 2D stride 2
        {2, 3, 6, 8, 8, 3, 3, 3, 1, 1, 1},   // 3D stride 1
        {4, 2, 5, 9, 6, 3, 3, 3, 2, 2, 2},   // 3D stride 2
        {6, 3, 1, 5, 5, 1, 1, 1, 1, 1, 1},   // 1x1 head conv
    };
    for (const ConvShape& s : shapes) {
        const auto in = random_vec(static_cast<size_t>(s.in_count()), rng);
        const auto w = random_vec(static_cast<size_t>(s.weight_count()), rng);
        const auto b = random_vec(static_cast<size_t>(s.out_c), rng);

        std::vector<double> out(static_cast<size_t>(s.out_count()));
        std::vector<double> out_ref(out.size());
        conv_forward(s, in.data(), w.data(), b.data(), out.data());
        reference::conv_forward_naive(s, in.data(), w.data(), b.data(), out_ref.data());
        for (size_t i = 0; i < out.size(); ++i)
            CHECK(out[i] == doctest::Approx(out_ref[i]).epsilon(1e-12));

        const auto gout = random_vec(out.size(), rng);
        std::vector<double> gin(in.size()), gw(w.size()), gb(b.size());
        std::vector<double> gin_ref(in.size()), gw_ref(w.size()), gb_ref(b.size());
        conv_backward_input(s, gout.data(), w.data(), gin.data());
        conv_backward_params(s, in.data(), gout.data(), gw.data(), gb.data());
        reference::conv_backward_naive(s, in.data(), gout.data(), w.data(), gin_ref.data(),
                                       gw_ref.data(), gb_ref.data());
        for (size_t i = 0; i < gin.size(); ++i)
            CHECK(gin[i] == doctest::Approx(gin_ref[i]).epsilon(1e-12));
        for (size_t i = 0; i < gw.size(); ++i)
            CHECK(gw[i] == doctest::Approx(gw_ref[i]).epsilon(1e-12));
        for (size_t i = 0; i < gb.size(); ++i)
            CHECK(gb[i] == doctest::Approx(gb_ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("chunked_sum matches naive summation") {
    Rng rng(7);
    const auto v = random_vec(100000, rng);
    const double got = chunked_sum(static_cast<int64_t>(v.size()),
                                   [&](int64_t i) { return v[static_cast<size_t>(i)]; });
    const double want = reference::sum_naive(v.data(), static_cast<long long>(v.size()));
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("chunked_sum is independent of chunk boundaries only up to rounding") {
    // Bitwise determinism matters for a fixed chunk size; different chunk
    // sizes may differ within floating-point tolerance.
    Rng rng(9);
    const auto v = random_vec(40000, rng);
    const double a = chunked_sum(static_cast<int64_t>(v.size()),
                                 [&](int64_t i) { return v[static_cast<size_t>(i)]; });
    const double b = chunked_sum(static_cast<int64_t>(v.size()),
                                 [&](int64_t i) { return v[static_cast<size_t>(i)]; });
    CHECK(a == b);
}
