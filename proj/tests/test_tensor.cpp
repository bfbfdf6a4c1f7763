#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "reconet/gradcheck.hpp"
#include "reconet/tensor.hpp"

#include <random>

using namespace reconet;

namespace {

Tensor<double> random_tensor(std::vector<int> shape, std::mt19937& rng, bool tracked = true,
                             double lo = -1.0, double hi = 1.0) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    std::vector<double> v(n);
    for (auto& x : v) x = lo + (hi - lo) * (static_cast<double>(rng() >> 8) / 16777216.0);
    return Tensor<double>::from_data(std::move(shape), std::move(v), tracked);
}

// Nested-loop convolution with explicit reflection indexing; the independent
// oracle for the GEMM-based implementation.
std::vector<double> conv_oracle(const Tensor<double>& input, const Tensor<double>& weight,
                                const Tensor<double>& bias, int stride) {
    const int c_in = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int c_out = weight.dim(0), k = weight.dim(2), pad = (k - 1) / 2;
    const int ho = h / stride, wo = w / stride;
    std::vector<double> out(static_cast<std::size_t>(c_out) * ho * wo);
    for (int co = 0; co < c_out; ++co)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                double acc = bias.data()[static_cast<std::size_t>(co)];
                for (int ci = 0; ci < c_in; ++ci)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            int iy = detail::reflect_index(oy * stride - pad + ky, h);
                            int ix = detail::reflect_index(ox * stride - pad + kx, w);
                            acc += input.data()[(static_cast<std::size_t>(ci) * h + iy) * w + ix] *
                                   weight.data()[((static_cast<std::size_t>(co) * c_in + ci) * k + ky) * k + kx];
                        }
                out[(static_cast<std::size_t>(co) * ho + oy) * wo + ox] = acc;
            }
    return out;
}

}  // namespace

TEST_CASE("conv2d shape contract for the first encoder layer") {
    std::mt19937 rng(1);
    // full 640x360 is exercised in the acceptance gate; a 4x-scaled-down
    // stand-in keeps the unit suite fast while checking the same arithmetic
    auto input = random_tensor({3, 160, 90}, rng, false);
    auto weight = random_tensor({48, 3, 9, 9}, rng, false);
    auto bias = random_tensor({48}, rng, false);
    Tensor<double> out = conv2d(input, weight, bias, 1);
    CHECK(out.shape() == std::vector<int>{48, 160, 90});
}

TEST_CASE("conv2d identity kernel") {
    auto input = Tensor<double>::from_data({1, 1, 1}, {3.75});
    auto weight = Tensor<double>::from_data({1, 1, 1, 1}, {1.0});
    auto bias = Tensor<double>::zeros({1});
    Tensor<double> out = conv2d(input, weight, bias, 1);
    CHECK(out.data()[0] == 3.75);
}

TEST_CASE("conv2d matches the nested-loop reflection oracle") {
    std::mt19937 rng(7);
    SUBCASE("1x4x4 input, 3x3 kernel, stride 2") {
        auto input = random_tensor({1, 4, 4}, rng, false);
        auto weight = random_tensor({1, 1, 3, 3}, rng, false);
        auto bias = random_tensor({1}, rng, false);
        Tensor<double> out = conv2d(input, weight, bias, 2);
        auto expect = conv_oracle(input, weight, bias, 2);
        REQUIRE(out.count() == expect.size());
        for (std::size_t i = 0; i < expect.size(); ++i)
            CHECK(out.data()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
    SUBCASE("multi-channel stride 1 and 2") {
        for (int stride : {1, 2}) {
            auto input = random_tensor({3, 6, 8}, rng, false);
            auto weight = random_tensor({4, 3, 3, 3}, rng, false);
            auto bias = random_tensor({4}, rng, false);
            Tensor<double> out = conv2d(input, weight, bias, stride);
            auto expect = conv_oracle(input, weight, bias, stride);
            REQUIRE(out.count() == expect.size());
            for (std::size_t i = 0; i < expect.size(); ++i)
                CHECK(out.data()[i] == doctest::Approx(expect[i]).epsilon(1e-10));
        }
    }
    SUBCASE("9x9 kernel exercises deep reflection") {
        auto input = random_tensor({2, 12, 10}, rng, false);
        auto weight = random_tensor({3, 2, 9, 9}, rng, false);
        auto bias = random_tensor({3}, rng, false);
        Tensor<double> out = conv2d(input, weight, bias, 1);
        auto expect = conv_oracle(input, weight, bias, 1);
        for (std::size_t i = 0; i < expect.size(); ++i)
            CHECK(out.data()[i] == doctest::Approx(expect[i]).epsilon(1e-10));
    }
}

TEST_CASE("conv2d rejects malformed configurations") {
    std::mt19937 rng(3);
    auto input = random_tensor({3, 4, 4}, rng, false);
    auto bias = random_tensor({2}, rng, false);
    CHECK_THROWS_AS(conv2d(input, random_tensor({2, 3, 2, 2}, rng, false), bias, 1),
                    std::invalid_argument);  // even kernel
    CHECK_THROWS_AS(conv2d(input, random_tensor({2, 4, 3, 3}, rng, false), bias, 1),
                    std::invalid_argument);  // channel mismatch
    CHECK_THROWS_AS(conv2d(input, random_tensor({2, 3, 3, 3}, rng, false), bias, 3),
                    std::invalid_argument);  // unsupported stride
    CHECK_THROWS_AS(conv2d(input, random_tensor({3, 3, 3, 3}, rng, false), bias, 1),
                    std::invalid_argument);  // bias mismatch
}

TEST_CASE("conv2d gradients w.r.t. input, weight and bias") {
    std::mt19937 rng(11);
    auto input = random_tensor({2, 6, 4}, rng);
    auto weight = random_tensor({3, 2, 3, 3}, rng);
    auto bias = random_tensor({3}, rng);
    for (int stride : {1, 2}) {
        auto f_in = [&](const Tensor<double>& x) { return sum(square(conv2d(x, weight, bias, stride))); };
        auto f_w = [&](const Tensor<double>& w) { return sum(square(conv2d(input, w, bias, stride))); };
        auto f_b = [&](const Tensor<double>& b) { return sum(square(conv2d(input, weight, b, stride))); };
        CHECK(finite_diff_check(f_in, input, 1e-5) < 1e-4);
        CHECK(finite_diff_check(f_w, weight, 1e-5) < 1e-4);
        CHECK(finite_diff_check(f_b, bias, 1e-5) < 1e-4);
    }
}

TEST_CASE("instance_norm on a constant channel collapses to zero") {
    auto input = Tensor<double>::full({2, 3, 3}, 5.0);
    auto scale = Tensor<double>::full({2}, 1.0);
    auto shift = Tensor<double>::zeros({2});
    Tensor<double> out = instance_norm(input, scale, shift, 1e-5);
    for (std::size_t i = 0; i < out.count(); ++i) CHECK(out.data()[i] == doctest::Approx(0.0));
}

TEST_CASE("instance_norm of an already-normalized channel is near-identity") {
    auto input = Tensor<double>::from_data({1, 1, 2}, {-1.0, 1.0});
    auto scale = Tensor<double>::full({1}, 1.0);
    auto shift = Tensor<double>::zeros({1});
    Tensor<double> out = instance_norm(input, scale, shift, 1e-12);
    CHECK(out.data()[0] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(out.data()[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("instance_norm matches the per-channel mean/variance formula") {
    std::mt19937 rng(5);
    auto input = random_tensor({2, 3, 3}, rng, false);
    auto scale = random_tensor({2}, rng, false, 0.5, 1.5);
    auto shift = random_tensor({2}, rng, false);
    const double eps = 1e-5;
    Tensor<double> out = instance_norm(input, scale, shift, eps);
    for (int c = 0; c < 2; ++c) {
        double mean = 0;
        for (int i = 0; i < 9; ++i) mean += input.data()[static_cast<std::size_t>(c) * 9 + i];
        mean /= 9.0;
        double var = 0;
        for (int i = 0; i < 9; ++i) {
            double d = input.data()[static_cast<std::size_t>(c) * 9 + i] - mean;
            var += d * d;
        }
        var /= 9.0;  // biased
        for (int i = 0; i < 9; ++i) {
            double expect = (input.data()[static_cast<std::size_t>(c) * 9 + i] - mean) /
                                std::sqrt(var + eps) * scale.data()[static_cast<std::size_t>(c)] +
                            shift.data()[static_cast<std::size_t>(c)];
            CHECK(std::fabs(out.data()[static_cast<std::size_t>(c) * 9 + i] - expect) < 1e-5);
        }
    }
}

TEST_CASE("instance_norm gradients") {
    std::mt19937 rng(13);
    auto input = random_tensor({2, 3, 4}, rng);
    auto scale = random_tensor({2}, rng, true, 0.5, 1.5);
    auto shift = random_tensor({2}, rng);
    auto f_in = [&](const Tensor<double>& x) { return sum(square(instance_norm(x, scale, shift, 1e-5))); };
    auto f_s = [&](const Tensor<double>& s) { return sum(square(instance_norm(input, s, shift, 1e-5))); };
    auto f_b = [&](const Tensor<double>& b) { return sum(square(instance_norm(input, scale, b, 1e-5))); };
    CHECK(finite_diff_check(f_in, input, 1e-5) < 1e-4);
    CHECK(finite_diff_check(f_s, scale, 1e-5) < 1e-4);
    CHECK(finite_diff_check(f_b, shift, 1e-5) < 1e-4);
}

TEST_CASE("relu and tanh basics") {
    auto x = Tensor<double>::from_data({3}, {-2.0, 0.0, 3.0});
    Tensor<double> r = relu(x);
    CHECK(r.data() == std::vector<double>{0.0, 0.0, 3.0});
    CHECK(tanh_op(Tensor<double>::from_data({1}, {0.0})).data()[0] == 0.0);
}

TEST_CASE("tanh gradient matches central finite differences") {
    std::mt19937 rng(17);
    auto x = random_tensor({12}, rng, true, -1.5, 1.5);
    auto f = [](const Tensor<double>& t) { return sum(square(tanh_op(t))); };
    CHECK(finite_diff_check(f, x, 1e-6) < 1e-4);
}

TEST_CASE("relu gradient away from the kink; subgradient at 0 is 0") {
    std::mt19937 rng(19);
    // keep samples away from 0 so central differences are valid
    auto x = random_tensor({10}, rng, true, 0.2, 1.0);
    for (std::size_t i = 0; i < x.count(); i += 2) x.data()[i] = -x.data()[i];
    auto f = [](const Tensor<double>& t) { return sum(square(relu(t))); };
    CHECK(finite_diff_check(f, x, 1e-6) < 1e-4);

    auto z = Tensor<double>::from_data({1}, {0.0}, true);
    {
        Tape<double> tape;
        Tensor<double> loss = sum(relu(z));
        tape.backward(loss);
    }
    CHECK(z.grad()[0] == 0.0);
}

TEST_CASE("upsample_nearest2x block replication and gradient") {
    auto x = Tensor<double>::from_data({1, 2, 2}, {1, 2, 3, 4}, true);
    Tensor<double> up;
    {
        Tape<double> tape;
        up = upsample_nearest2x(x);
        Tensor<double> loss = sum(up);
        tape.backward(loss);
    }
    CHECK(up.shape() == std::vector<int>{1, 4, 4});
    const std::vector<double> expect = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    CHECK(up.data() == expect);
    for (double g : x.grad()) CHECK(g == 4.0);  // each pixel copied 4 times

    Tensor<double> big = upsample_nearest2x(Tensor<double>::zeros({192, 160, 90}));
    CHECK(big.shape() == std::vector<int>{192, 320, 180});
}

TEST_CASE("maxpool2x2 values and gradient") {
    auto x = Tensor<double>::from_data({1, 2, 4}, {1, 5, 2, 0, 3, 4, 8, 7}, true);
    Tensor<double> p;
    {
        Tape<double> tape;
        p = maxpool2x2(x);
        Tensor<double> loss = sum(p);
        tape.backward(loss);
    }
    CHECK(p.shape() == std::vector<int>{1, 1, 2});
    CHECK(p.data() == std::vector<double>{5, 8});
    CHECK(x.grad() == std::vector<double>{0, 1, 0, 0, 0, 0, 1, 0});

    std::mt19937 rng(23);
    auto y = random_tensor({2, 4, 4}, rng);
    auto f = [](const Tensor<double>& t) { return sum(square(maxpool2x2(t))); };
    CHECK(finite_diff_check(f, y, 1e-6) < 1e-4);
}

TEST_CASE("elementwise and reduction suite") {
    auto x = Tensor<double>::from_data({3}, {1, 2, 3});
    CHECK(sum(x).item() == 6.0);
    CHECK(mean(x).item() == 2.0);

    std::mt19937 rng(29);
    auto y = random_tensor({2, 3, 3}, rng, false);
    auto ones = Tensor<double>::full(y.shape(), 1.0);
    CHECK(masked_mean(y, ones).item() == doctest::Approx(mean(y).item()).epsilon(1e-12));

    auto a = Tensor<double>::from_data({2}, {1, 2});
    auto b = Tensor<double>::from_data({2}, {10, 20});
    CHECK(add(a, b).data() == std::vector<double>{11, 22});
    CHECK(sub(a, b).data() == std::vector<double>{-9, -18});
    CHECK(mul(a, b).data() == std::vector<double>{10, 40});
    CHECK(mul_scalar(a, 3.0).data() == std::vector<double>{3, 6});
    CHECK(square(b).data() == std::vector<double>{100, 400});
    CHECK_THROWS_AS(add(a, Tensor<double>::zeros({3})), std::invalid_argument);
}

TEST_CASE("masked_mean gradient") {
    std::mt19937 rng(31);
    auto x = random_tensor({2, 3, 3}, rng);
    std::vector<double> mv(x.count());
    for (auto& v : mv) v = (rng() & 1) ? 1.0 : 0.0;
    auto mask = Tensor<double>::from_data(x.shape(), std::move(mv));
    auto f = [&](const Tensor<double>& t) { return masked_mean(square(t), mask); };
    CHECK(finite_diff_check(f, x, 1e-6) < 1e-4);
}

TEST_CASE("gram gradient and elementwise gradients") {
    std::mt19937 rng(37);
    auto x = random_tensor({3, 4, 4}, rng);
    auto f = [](const Tensor<double>& t) { return sum(square(gram(t))); };
    CHECK(finite_diff_check(f, x, 1e-6) < 1e-4);

    auto y = random_tensor({6}, rng);
    auto g = [](const Tensor<double>& t) { return mean(square(t)); };
    CHECK(finite_diff_check(g, y, 1e-6) < 1e-4);
}

TEST_CASE("channel ops gradients") {
    std::mt19937 rng(41);
    auto x = random_tensor({3, 3, 3}, rng);
    auto f = [](const Tensor<double>& t) {
        return sum(square(channel_matrix(t, {0.2, 0.5, 0.3, 0.1, 0.8, 0.1, 0.3, 0.3, 0.4}, 3)));
    };
    CHECK(finite_diff_check(f, x, 1e-6) < 1e-4);

    auto g = [](const Tensor<double>& t) { return sum(square(tile_channel(select_channel(t, 1), 2))); };
    CHECK(finite_diff_check(g, x, 1e-6) < 1e-4);

    auto h = [](const Tensor<double>& t) {
        return sum(square(channel_standardize(t, {0.4, 0.5, 0.6}, {0.2, 0.25, 0.3})));
    };
    CHECK(finite_diff_check(h, x, 1e-6) < 1e-4);

    auto k = [](const Tensor<double>& t) { return sum(square(affine(t, 0.5, 0.5))); };
    CHECK(finite_diff_check(k, x, 1e-6) < 1e-4);
}

TEST_CASE("backward populates gradients and enforces the tape contract") {
    auto x = Tensor<double>::from_data({4}, {1, 2, 3, 4}, true);
    {
        Tape<double> tape;
        Tensor<double> loss = sum(x);
        tape.backward(loss);
    }
    for (double g : x.grad()) CHECK(g == 1.0);

    x.zero_grad();
    {
        Tape<double> tape;
        Tensor<double> loss = sum(mul(x, x));
        tape.backward(loss);
    }
    for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == 2.0 * x.data()[i]);

    {
        Tape<double> tape;
        Tensor<double> vec = mul_scalar(x, 2.0);
        CHECK_THROWS_AS(tape.backward(vec), std::invalid_argument);  // non-scalar
        Tensor<double> loss = sum(vec);
        tape.backward(loss);
        CHECK_THROWS_AS(tape.backward(loss), std::logic_error);  // consumed
        tape.reset();
        Tensor<double> loss2 = sum(mul_scalar(x, 2.0));
        tape.backward(loss2);  // fine after reset
    }
}

TEST_CASE("backward of a sum of losses equals summed separate passes") {
    std::mt19937 rng(43);
    auto x = random_tensor({3, 4, 4}, rng);

    x.zero_grad();
    {
        Tape<double> tape;
        Tensor<double> loss = add(sum(square(x)), mean(mul(x, x)));
        tape.backward(loss);
    }
    std::vector<double> combined = x.grad();

    x.zero_grad();
    {
        Tape<double> tape;
        Tensor<double> l1 = sum(square(x));
        tape.backward(l1);
    }
    std::vector<double> g1 = x.grad();
    x.zero_grad();
    {
        Tape<double> tape;
        Tensor<double> l2 = mean(mul(x, x));
        tape.backward(l2);
    }
    std::vector<double> g2 = x.grad();

    for (std::size_t i = 0; i < combined.size(); ++i)
        CHECK(std::fabs(combined[i] - (g1[i] + g2[i])) < 1e-6);
}

TEST_CASE("finite_diff_check harness sanity") {
    std::mt19937 rng(47);
    auto x = random_tensor({8}, rng);

    // f = sum: derivative is exactly 1 everywhere
    auto f_sum = [](const Tensor<double>& t) { return sum(t); };
    CHECK(finite_diff_check(f_sum, x, 0.25) == 0.0);

    auto f_ms = [](const Tensor<double>& t) { return mean(square(t)); };
    CHECK(finite_diff_check(f_ms, x, 1e-4) < 1e-6);

    auto w = random_tensor({2, 3, 3, 3}, rng, false);
    auto b = random_tensor({2}, rng, false);
    auto img = random_tensor({3, 5, 5}, rng);
    auto f_conv = [&](const Tensor<double>& t) { return sum(relu(conv2d(t, w, b, 1))); };
    CHECK(finite_diff_check(f_conv, img, 1e-5) < 1e-4);
}

TEST_CASE("tensor construction errors") {
    CHECK_THROWS_AS(Tensor<double>::from_data({2, 2}, {1.0, 2.0}), std::invalid_argument);
    auto untracked = Tensor<double>::zeros({2});
    CHECK_THROWS_AS(untracked.grad(), std::logic_error);
}
