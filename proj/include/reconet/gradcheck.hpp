#pragma once

// Central finite-difference harness for verifying autodiff gradients,
// intended for 64-bit scalars.

#include "reconet/tensor.hpp"

#include <functional>
#include <random>

namespace reconet {

// Max relative error between the autodiff gradient of f at x and central
// finite differences with step h, over every element of x. f must be
// deterministic and must build its value from x through tracked ops.
template <typename S, typename F>
double finite_diff_check(F f, Tensor<S> x, S h) {
    if (!x.tracked()) throw std::invalid_argument("finite_diff_check: x must be tracked");
    x.zero_grad();
    {
        Tape<S> tape;
        Tensor<S> loss = f(x);
        tape.backward(loss);
    }
    std::vector<S> g = x.grad();

    double max_rel = 0;
    for (std::size_t i = 0; i < x.count(); ++i) {
        const S saved = x.data()[i];
        x.data()[i] = saved + h;
        const double fp = static_cast<double>(f(x).item());
        x.data()[i] = saved - h;
        const double fm = static_cast<double>(f(x).item());
        x.data()[i] = saved;
        const double fd = (fp - fm) / (2.0 * static_cast<double>(h));
        const double ad = static_cast<double>(g[i]);
        const double denom = std::max({std::fabs(fd), std::fabs(ad), 1e-8});
        const double rel = std::fabs(fd - ad) / denom;
        if (rel > max_rel) max_rel = rel;
    }
    return max_rel;
}

// Same check restricted to up to max_coords randomly chosen elements; used
// for composite problems whose parameter tensors are too large to sweep.
template <typename S, typename F>
double finite_diff_check_sampled(F f, Tensor<S> x, S h, std::size_t max_coords,
                                 std::mt19937& rng) {
    if (!x.tracked()) throw std::invalid_argument("finite_diff_check: x must be tracked");
    x.zero_grad();
    {
        Tape<S> tape;
        Tensor<S> loss = f(x);
        tape.backward(loss);
    }
    std::vector<S> g = x.grad();

    std::vector<std::size_t> coords(x.count());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    // partial Fisher-Yates over the raw generator keeps draws portable
    const std::size_t n = std::min(max_coords, coords.size());
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng()) % (coords.size() - i);
        std::swap(coords[i], coords[j]);
    }

    double max_rel = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = coords[k];
        const S saved = x.data()[i];
        x.data()[i] = saved + h;
        const double fp = static_cast<double>(f(x).item());
        x.data()[i] = saved - h;
        const double fm = static_cast<double>(f(x).item());
        x.data()[i] = saved;
        const double fd = (fp - fm) / (2.0 * static_cast<double>(h));
        const double ad = static_cast<double>(g[i]);
        const double denom = std::max({std::fabs(fd), std::fabs(ad), 1e-8});
        const double rel = std::fabs(fd - ad) / denom;
        if (rel > max_rel) max_rel = rel;
    }
    return max_rel;
}

}  // namespace reconet
