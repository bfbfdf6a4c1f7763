#pragma once

// Stylization encoder/decoder and the pluggable perceptual-loss backbone.
//
// Encoder: 9x9/48 s1, 3x3/96 s2, 3x3/192 s2, then four 192-channel residual
// blocks; instance norm + relu after every convolution, reflection padding
// throughout. Decoder: nearest 2x upsample + 3x3/96, upsample + 3x3/48, then
// 9x9/3 + tanh mapped to [0,1].

#include "reconet/tensor.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace reconet {

namespace detail {

// Portable uniform in [-bound, bound] from raw mt19937 draws; keeps weight
// init bit-identical across standard libraries.
inline double uniform_pm(std::mt19937& rng, double bound) {
    double u = static_cast<double>(rng() >> 8) * (1.0 / 16777216.0);  // [0,1)
    return (2.0 * u - 1.0) * bound;
}

}  // namespace detail

template <typename S>
struct ConvParams {
    Tensor<S> weight;  // [Cout,Cin,k,k]
    Tensor<S> bias;    // [Cout]

    static ConvParams random(int c_out, int c_in, int k, std::mt19937& rng, bool tracked) {
        ConvParams p;
        const int fan_in = c_in * k * k;
        const double bound = std::sqrt(6.0 / fan_in);
        std::vector<S> w(static_cast<std::size_t>(c_out) * c_in * k * k);
        for (auto& v : w) v = static_cast<S>(detail::uniform_pm(rng, bound));
        p.weight = Tensor<S>::from_data({c_out, c_in, k, k}, std::move(w), tracked);
        p.bias = Tensor<S>::zeros({c_out}, tracked);
        return p;
    }
};

// Convolution followed by instance norm (affine, initialized to scale 1 shift 0).
template <typename S>
struct NormConvParams {
    ConvParams<S> conv;
    Tensor<S> in_scale;
    Tensor<S> in_shift;
    int stride = 1;

    static NormConvParams random(int c_out, int c_in, int k, int stride, std::mt19937& rng,
                                 bool tracked) {
        NormConvParams p;
        p.conv = ConvParams<S>::random(c_out, c_in, k, rng, tracked);
        p.in_scale = Tensor<S>::full({c_out}, S(1), tracked);
        p.in_shift = Tensor<S>::zeros({c_out}, tracked);
        p.stride = stride;
        return p;
    }

    Tensor<S> apply(const Tensor<S>& x, S eps) const {
        return instance_norm(conv2d(x, conv.weight, conv.bias, stride), in_scale, in_shift, eps);
    }
};

template <typename S>
struct ResidualBlockParams {
    NormConvParams<S> conv1;
    NormConvParams<S> conv2;
};

template <typename S>
struct StyleNet {
    // encoder
    NormConvParams<S> conv1, conv2, conv3;
    ResidualBlockParams<S> res[4];
    // decoder
    NormConvParams<S> dconv1, dconv2;
    ConvParams<S> dconv3;

    S in_eps = S(1e-5);

    static StyleNet random(std::uint32_t seed, bool tracked = true) {
        std::mt19937 rng(seed);
        StyleNet net;
        net.conv1 = NormConvParams<S>::random(48, 3, 9, 1, rng, tracked);
        net.conv2 = NormConvParams<S>::random(96, 48, 3, 2, rng, tracked);
        net.conv3 = NormConvParams<S>::random(192, 96, 3, 2, rng, tracked);
        for (auto& r : net.res) {
            r.conv1 = NormConvParams<S>::random(192, 192, 3, 1, rng, tracked);
            r.conv2 = NormConvParams<S>::random(192, 192, 3, 1, rng, tracked);
        }
        net.dconv1 = NormConvParams<S>::random(96, 192, 3, 1, rng, tracked);
        net.dconv2 = NormConvParams<S>::random(48, 96, 3, 1, rng, tracked);
        net.dconv3 = ConvParams<S>::random(3, 48, 9, rng, tracked);
        return net;
    }

    Tensor<S> encode(const Tensor<S>& frame) const {
        if (frame.rank() != 3 || frame.dim(0) != 3)
            throw std::invalid_argument("encode: frame must be [3,H,W], got " +
                                        shape_str(frame.shape()));
        if (frame.dim(1) % 4 != 0 || frame.dim(2) % 4 != 0)
            throw std::invalid_argument("encode: spatial size " + std::to_string(frame.dim(1)) + "x" +
                                        std::to_string(frame.dim(2)) + " not divisible by 4");
        Tensor<S> x = relu(conv1.apply(frame, in_eps));
        x = relu(conv2.apply(x, in_eps));
        x = relu(conv3.apply(x, in_eps));
        for (const auto& r : res) {
            Tensor<S> y = relu(r.conv1.apply(x, in_eps));
            y = r.conv2.apply(y, in_eps);
            x = relu(add(y, x));
        }
        return x;
    }

    Tensor<S> decode(const Tensor<S>& features) const {
        Tensor<S> x = upsample_nearest2x(features);
        x = relu(dconv1.apply(x, in_eps));
        x = upsample_nearest2x(x);
        x = relu(dconv2.apply(x, in_eps));
        x = tanh_op(conv2d(x, dconv3.weight, dconv3.bias, 1));
        return affine(x, S(0.5), S(0.5));  // tanh range to [0,1]
    }

    Tensor<S> stylize(const Tensor<S>& frame) const { return decode(encode(frame)); }

    std::vector<std::pair<std::string, Tensor<S>>> parameters() {
        std::vector<std::pair<std::string, Tensor<S>>> out;
        auto push_conv = [&](const std::string& prefix, ConvParams<S>& c) {
            out.emplace_back(prefix + ".weight", c.weight);
            out.emplace_back(prefix + ".bias", c.bias);
        };
        auto push_norm = [&](const std::string& prefix, NormConvParams<S>& c) {
            push_conv(prefix, c.conv);
            out.emplace_back(prefix + ".in_scale", c.in_scale);
            out.emplace_back(prefix + ".in_shift", c.in_shift);
        };
        push_norm("encoder.conv1", conv1);
        push_norm("encoder.conv2", conv2);
        push_norm("encoder.conv3", conv3);
        for (int i = 0; i < 4; ++i) {
            std::string p = "encoder.res" + std::to_string(i + 1);
            push_norm(p + ".conv1", res[i].conv1);
            push_norm(p + ".conv2", res[i].conv2);
        }
        push_norm("decoder.conv1", dconv1);
        push_norm("decoder.conv2", dconv2);
        push_conv("decoder.conv3", dconv3);
        return out;
    }

    void zero_grad() {
        for (auto& [name, t] : parameters()) t.zero_grad();
    }

    template <typename T>
    StyleNet<T> cast(bool tracked = true) const {
        auto ct = [&](const Tensor<S>& t) {
            Tensor<T> v = t.template cast<T>();
            return Tensor<T>::from_data(v.shape(), v.data(), tracked);
        };
        auto cc = [&](const ConvParams<S>& c) {
            ConvParams<T> o;
            o.weight = ct(c.weight);
            o.bias = ct(c.bias);
            return o;
        };
        auto cn = [&](const NormConvParams<S>& c) {
            NormConvParams<T> o;
            o.conv = cc(c.conv);
            o.in_scale = ct(c.in_scale);
            o.in_shift = ct(c.in_shift);
            o.stride = c.stride;
            return o;
        };
        StyleNet<T> out;
        out.conv1 = cn(conv1);
        out.conv2 = cn(conv2);
        out.conv3 = cn(conv3);
        for (int i = 0; i < 4; ++i) {
            out.res[i].conv1 = cn(res[i].conv1);
            out.res[i].conv2 = cn(res[i].conv2);
        }
        out.dconv1 = cn(dconv1);
        out.dconv2 = cn(dconv2);
        out.dconv3 = cc(dconv3);
        out.in_eps = static_cast<T>(in_eps);
        return out;
    }
};

// The fixed layer manifest implied by the architecture table.
std::vector<std::pair<std::string, std::vector<int>>> stylenet_manifest();

// Total trainable parameter count implied by the manifest.
std::size_t stylenet_parameter_count();

}  // namespace reconet
