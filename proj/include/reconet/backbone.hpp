#pragma once

// Pluggable perceptual-loss backbone: four style taps at downsample factors
// 1, 2, 4, 8; the content tap coincides with the third style tap. Weights are
// frozen (never tracked), so gradients flow into the image argument only.

#include "reconet/stylenet.hpp"
#include "reconet/tensor.hpp"

#include <map>
#include <string>
#include <vector>

namespace reconet {

struct BackboneTap {
    std::string name;
    int downsample = 1;
    int channels = 0;
};

template <typename S>
struct Backbone {
    struct Stage {
        std::vector<ConvParams<S>> convs;
        std::string tap_name;
        bool pool_after = false;
    };

    std::string profile;
    std::vector<Stage> stages;       // exactly 4
    std::vector<S> input_mean;       // empty = no standardization
    std::vector<S> input_std;

    // "test": single 3x3 conv per stage, channels 8/16/32/64, no normalization.
    // "vgg16": conv stack 2/2/3/3, channels 64/128/256/512, per-channel
    // standardization; weights are seeded random unless loaded from a file.
    static Backbone make_profile(const std::string& name, std::uint32_t seed) {
        Backbone b;
        b.profile = name;
        std::mt19937 rng(seed);
        std::vector<int> channels, depth;
        if (name == "test") {
            channels = {8, 16, 32, 64};
            depth = {1, 1, 1, 1};
        } else if (name == "vgg16") {
            channels = {64, 128, 256, 512};
            depth = {2, 2, 3, 3};
            b.input_mean = {S(0.485), S(0.456), S(0.406)};
            b.input_std = {S(0.229), S(0.224), S(0.225)};
        } else {
            throw std::invalid_argument("backbone: unknown profile '" + name + "'");
        }
        const char* taps[4] = {"relu1_2", "relu2_2", "relu3_3", "relu4_3"};
        int c_in = 3;
        for (int s = 0; s < 4; ++s) {
            Stage stage;
            for (int d = 0; d < depth[static_cast<std::size_t>(s)]; ++d) {
                int c_out = channels[static_cast<std::size_t>(s)];
                stage.convs.push_back(ConvParams<S>::random(c_out, c_in, 3, rng, /*tracked=*/false));
                c_in = c_out;
            }
            stage.tap_name = taps[s];
            stage.pool_after = s < 3;
            b.stages.push_back(std::move(stage));
        }
        return b;
    }

    std::string content_tap() const { return stages[2].tap_name; }

    std::vector<BackboneTap> taps() const {
        std::vector<BackboneTap> out;
        int factor = 1;
        for (const auto& stage : stages) {
            out.push_back({stage.tap_name, factor, stage.convs.back().weight.dim(0)});
            if (stage.pool_after) factor *= 2;
        }
        return out;
    }

    std::map<std::string, Tensor<S>> features(const Tensor<S>& image) const {
        if (image.rank() != 3 || image.dim(0) != 3)
            throw std::invalid_argument("backbone: image must be [3,H,W], got " +
                                        shape_str(image.shape()));
        if (image.dim(1) % 8 != 0 || image.dim(2) % 8 != 0)
            throw std::invalid_argument("backbone: spatial size " + std::to_string(image.dim(1)) +
                                        "x" + std::to_string(image.dim(2)) + " not divisible by 8");
        Tensor<S> x = image;
        if (!input_mean.empty()) x = channel_standardize(x, input_mean, input_std);
        std::map<std::string, Tensor<S>> out;
        for (const auto& stage : stages) {
            for (const auto& conv : stage.convs) x = relu(conv2d(x, conv.weight, conv.bias, 1));
            out[stage.tap_name] = x;
            if (stage.pool_after) x = maxpool2x2(x);
        }
        return out;
    }

    std::vector<std::pair<std::string, Tensor<S>>> named_weights() {
        std::vector<std::pair<std::string, Tensor<S>>> out;
        for (std::size_t s = 0; s < stages.size(); ++s)
            for (std::size_t c = 0; c < stages[s].convs.size(); ++c) {
                std::string p = "stage" + std::to_string(s + 1) + ".conv" + std::to_string(c + 1);
                out.emplace_back(p + ".weight", stages[s].convs[c].weight);
                out.emplace_back(p + ".bias", stages[s].convs[c].bias);
            }
        return out;
    }
};

}  // namespace reconet
