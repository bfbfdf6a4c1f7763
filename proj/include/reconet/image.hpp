#pragma once

// 8-bit PNG/PGM image I/O mapped linearly to [0,1] float planes.

#include "reconet/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace reconet {

struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 (gray) or 3 (RGB)
    std::vector<float> data;  // channels-first planes, values in [0,1]

    static Image zeros(int width, int height, int channels);
    std::size_t plane() const { return static_cast<std::size_t>(width) * height; }

    float& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }

    template <typename S>
    Tensor<S> as_tensor() const {
        std::vector<S> v(data.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<S>(data[i]);
        return Tensor<S>::from_data({channels, height, width}, std::move(v));
    }

    template <typename S>
    static Image from_tensor(const Tensor<S>& t) {
        if (t.rank() != 3) throw std::invalid_argument("image: tensor must be [C,H,W]");
        Image im = zeros(t.dim(2), t.dim(1), t.dim(0));
        for (std::size_t i = 0; i < im.data.size(); ++i) im.data[i] = static_cast<float>(t.data()[i]);
        return im;
    }
};

// PNG: 8-bit gray/RGB (alpha stripped, 16-bit narrowed on read).
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& image);

// PGM (binary P5), 8-bit single channel.
Image read_pgm(const std::string& path);
void write_pgm(const std::string& path, const Image& image);

// Dispatches on extension (.png / .pgm).
Image read_image(const std::string& path);
void write_image(const std::string& path, const Image& image);

Image resize_bilinear(const Image& image, int new_width, int new_height);

}  // namespace reconet
