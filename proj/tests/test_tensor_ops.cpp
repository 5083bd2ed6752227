#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include "deblur/ops.hpp"
#include "deblur/rng.hpp"
#include "deblur/tensor.hpp"
#include "support/oracles.hpp"

using namespace deblur;
using oracle::random_tensor;
using oracle::rel_err;

namespace {

ConvKernelT<double> random_kernel(int kh, int kw, int ic, int oc, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    ConvKernelT<double> k(kh, kw, ic, oc);
    for (double& w : k.weights) w = 2.0 * uniform_unit(eng) - 1.0;
    for (double& b : k.bias) b = 2.0 * uniform_unit(eng) - 1.0;
    return k;
}

} // namespace

TEST_SUITE("tensor") {
    TEST_CASE("constructor validates dims and data length") {
        CHECK_THROWS_AS(Tensor(0, 4, 1), std::invalid_argument);
        CHECK_THROWS_AS(Tensor(4, -1, 1), std::invalid_argument);
        CHECK_THROWS_AS(Tensor(2, 2, 1, std::vector<float>(3)), std::invalid_argument);
        Tensor t(2, 3, 4);
        CHECK(t.size() == 24);
    }

    TEST_CASE("row-major channel-interleaved indexing") {
        Tensor t(2, 2, 2);
        t.at(1, 0, 1) = 7.0f;
        CHECK(t.data()[(1 * 2 + 0) * 2 + 1] == 7.0f);
    }
}

TEST_SUITE("conv2d") {
    TEST_CASE("1x1 identity kernel reproduces the input") {
        auto x = random_tensor(6, 5, 1, 11).cast<float>();
        ConvKernel k(1, 1, 1, 1);
        k.weights[0] = 1.0f;
        const Tensor y = conv2d(x, k);
        REQUIRE(y.same_shape(x));
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
    }

    TEST_CASE("all-zero weights yield the bias everywhere") {
        auto x = random_tensor(5, 7, 2, 12).cast<float>();
        ConvKernel k(3, 3, 2, 3);
        k.bias = {0.25f, -1.5f, 3.0f};
        const Tensor y = conv2d(x, k);
        CHECK(y.channels() == 3);
        for (int yy = 0; yy < y.height(); ++yy)
            for (int xx = 0; xx < y.width(); ++xx)
                for (int c = 0; c < 3; ++c) CHECK(y.at(yy, xx, c) == k.bias[c]);
    }

    TEST_CASE("matches the quadruple-loop oracle on a random case") {
        const auto x = random_tensor(7, 7, 3, 13);
        const auto k = random_kernel(3, 3, 3, 2, 14);
        const auto got = conv2d(x, k);
        const auto want = oracle::direct_conv2d(x, k);
        REQUIRE(got.same_shape(want));
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(rel_err(got.data()[i], want.data()[i], 1e-6) < 1e-6);
    }

    TEST_CASE("same padding keeps spatial dims for larger kernels") {
        const auto x = random_tensor(10, 9, 1, 15);
        const auto k = random_kernel(9, 5, 1, 2, 16);
        const auto y = conv2d(x, k);
        CHECK(y.height() == 10);
        CHECK(y.width() == 9);
        CHECK(y.channels() == 2);
        const auto want = oracle::direct_conv2d(x, k);
        for (std::size_t i = 0; i < y.size(); ++i)
            CHECK(rel_err(y.data()[i], want.data()[i], 1e-6) < 1e-6);
    }

    TEST_CASE("channel mismatch is rejected") {
        const auto x = random_tensor(5, 5, 2, 17).cast<float>();
        ConvKernel k(3, 3, 3, 1);
        CHECK_THROWS_AS(conv2d(x, k), std::invalid_argument);
    }

    TEST_CASE("even kernel dims are rejected") {
        CHECK_THROWS_AS(ConvKernel(2, 3, 1, 1), std::invalid_argument);
        CHECK_THROWS_AS(ConvKernel(3, 4, 1, 1), std::invalid_argument);
    }

    TEST_CASE("linearity: conv(a x + b y) == a conv(x) + b conv(y) + bias") {
        const auto x = random_tensor(8, 8, 2, 18);
        const auto y = random_tensor(8, 8, 2, 19);
        const auto k = random_kernel(5, 3, 2, 2, 20);
        auto k0 = k;
        for (double& b : k0.bias) b = 0.0;

        const double a = 1.7, b = -0.6;
        TensorT<double> mix(8, 8, 2);
        for (std::size_t i = 0; i < mix.size(); ++i)
            mix.data()[i] = a * x.data()[i] + b * y.data()[i];

        const auto lhs = conv2d(mix, k);
        const auto cx = conv2d(x, k0);
        const auto cy = conv2d(y, k0);
        for (int yy = 0; yy < 8; ++yy)
            for (int xx = 0; xx < 8; ++xx)
                for (int c = 0; c < 2; ++c) {
                    const double rhs =
                        a * cx.at(yy, xx, c) + b * cy.at(yy, xx, c) + k.bias[c];
                    CHECK(rel_err(lhs.at(yy, xx, c), rhs, 1e-6) < 1e-6);
                }
    }
}

TEST_SUITE("relu") {
    TEST_CASE("all-negative input maps to zero") {
        Tensor x = Tensor::full(3, 3, 2, -2.5f);
        const Tensor y = relu(x);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.data()[i] == 0.0f);
    }

    TEST_CASE("nonnegative input is unchanged") {
        auto x = random_tensor(4, 4, 1, 21).cast<float>();
        const Tensor y = relu(x);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
    }

    TEST_CASE("sign cases") {
        Tensor x(1, 3, 1, {-1.0f, 0.0f, 2.0f});
        const Tensor y = relu(x);
        CHECK(y.data()[0] == 0.0f);
        CHECK(y.data()[1] == 0.0f);
        CHECK(y.data()[2] == 2.0f);
    }
}

TEST_SUITE("downsample2") {
    TEST_CASE("constant stays constant at half size") {
        const Tensor x = Tensor::full(6, 8, 3, 0.4f);
        const Tensor y = downsample2(x);
        CHECK(y.height() == 3);
        CHECK(y.width() == 4);
        for (std::size_t i = 0; i < y.size(); ++i) CHECK(y.data()[i] == doctest::Approx(0.4f));
    }

    TEST_CASE("2x2 block averages to its mean") {
        Tensor x(2, 2, 1, {1.0f, 2.0f, 3.0f, 4.0f});
        const Tensor y = downsample2(x);
        CHECK(y.size() == 1);
        CHECK(y.data()[0] == doctest::Approx(2.5f));
    }

    TEST_CASE("9x9 input matches the naive pooling oracle, trailing row dropped") {
        const auto x = random_tensor(9, 9, 2, 22);
        const auto y = downsample2(x);
        CHECK(y.height() == 4);
        CHECK(y.width() == 4);
        const auto want = oracle::direct_pool2(x);
        for (std::size_t i = 0; i < y.size(); ++i)
            CHECK(y.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-12));
    }

    TEST_CASE("preserves the global mean when both dims are even") {
        const auto x = random_tensor(12, 10, 3, 23);
        const auto y = downsample2(x);
        CHECK(global_mean(x).data()[0] ==
              doctest::Approx(global_mean(y).data()[0]).epsilon(1e-12));
    }

    TEST_CASE("too-small input is rejected") {
        CHECK_THROWS_AS(downsample2(Tensor(1, 5, 1)), std::invalid_argument);
        CHECK_THROWS_AS(downsample2(Tensor(5, 1, 1)), std::invalid_argument);
    }
}

TEST_SUITE("window_mean") {
    TEST_CASE("gaussian window weights are nonnegative and sum to 1") {
        const auto win = gaussian_window<double>(11, 1.5);
        double sum = 0.0, sum2d = 0.0;
        for (double w : win.w1) {
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        for (int r = 0; r < 11; ++r)
            for (int c = 0; c < 11; ++c) sum2d += win.weight(r, c);
        CHECK(sum2d == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("constant input gives the constant at every valid position") {
        const auto x = TensorT<double>::full(9, 9, 2, 0.37);
        const auto win = gaussian_window<double>(5, 1.5);
        const auto y = window_mean(x, win);
        CHECK(y.height() == 5);
        CHECK(y.width() == 5);
        for (std::size_t i = 0; i < y.size(); ++i)
            CHECK(y.data()[i] == doctest::Approx(0.37).epsilon(1e-12));
    }

    TEST_CASE("separable evaluation equals the direct product-window sum") {
        const auto x = random_tensor(10, 12, 2, 24);
        const auto win = gaussian_window<double>(5, 1.2);
        const auto got = window_mean(x, win);
        for (int wy = 0; wy < got.height(); ++wy)
            for (int wx = 0; wx < got.width(); ++wx)
                for (int c = 0; c < 2; ++c) {
                    double want = 0.0;
                    for (int r = 0; r < 5; ++r)
                        for (int cc = 0; cc < 5; ++cc)
                            want += win.weight(r, cc) * x.at(wy + r, wx + cc, c);
                    CHECK(got.at(wy, wx, c) == doctest::Approx(want).epsilon(1e-12));
                }
    }

    TEST_CASE("input smaller than window is rejected") {
        const auto win = gaussian_window<double>(7, 1.5);
        CHECK_THROWS_AS(window_mean(TensorT<double>(5, 9, 1), win), std::invalid_argument);
    }
}

TEST_SUITE("misc ops") {
    TEST_CASE("global_mean averages every element") {
        Tensor x(1, 4, 1, {1.0f, 2.0f, 3.0f, 6.0f});
        CHECK(global_mean(x).data()[0] == doctest::Approx(3.0f));
    }

    TEST_CASE("crop copies the exact subregion") {
        const auto x = random_tensor(8, 8, 2, 25).cast<float>();
        const Tensor y = crop(x, 2, 3, 4);
        for (int yy = 0; yy < 4; ++yy)
            for (int xx = 0; xx < 4; ++xx)
                for (int c = 0; c < 2; ++c) CHECK(y.at(yy, xx, c) == x.at(2 + yy, 3 + xx, c));
        CHECK_THROWS_AS(crop(x, 6, 6, 4), std::invalid_argument);
    }

    TEST_CASE("clamp01 pins values into the unit interval") {
        Tensor x(1, 3, 1, {-0.5f, 0.25f, 1.75f});
        const Tensor y = clamp01(x);
        CHECK(y.data()[0] == 0.0f);
        CHECK(y.data()[1] == 0.25f);
        CHECK(y.data()[2] == 1.0f);
    }
}
