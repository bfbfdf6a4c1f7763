#pragma once

// Training configuration: UTF-8 key=value lines, '#' comments, unknown keys
// rejected. Defaults follow the reference training protocol.

#include "reconet/losses.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace reconet {

struct TrainConfig {
    LossWeights weights;
    double learning_rate = 1e-3;
    int batch_size = 2;
    int steps = 30000;
    std::uint32_t seed = 1;
    int width = 640;
    int height = 360;
    double hflip_prob = 0.5;
    int checkpoint_every = 1000;
    std::string style_image;
    std::string dataset;
    std::string backbone = "vgg16";
    std::string backbone_weights;  // optional; seeded random when empty
    std::string luminance_variant = "rgb_lum";
    std::string temporal_losses = "both";  // both | feature | output | none
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
    bool use_feature_temporal() const;
    bool use_output_temporal() const;

    // Applies one "key=value" assignment; unknown keys throw.
    void set(const std::string& key, const std::string& value);

    // Resolved config as canonical key=value lines (manifest / metadata form).
    std::vector<std::pair<std::string, std::string>> items() const;
    std::string to_text() const;
    std::string config_hash() const;  // FNV-1a of to_text()

    static TrainConfig from_file(const std::string& path);
    static TrainConfig from_text(const std::string& text);
};

}  // namespace reconet
