#include "reconet/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace reconet {

Image Image::zeros(int width, int height, int channels) {
    Image im;
    im.width = width;
    im.height = height;
    im.channels = channels;
    im.data.assign(static_cast<std::size_t>(width) * height * channels, 0.0f);
    return im;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(float v) {
    float s = v * 255.0f + 0.5f;
    if (s < 0) s = 0;
    if (s > 255) s = 255;
    return static_cast<std::uint8_t>(s);
}

}  // namespace

Image read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png: allocation failure");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png: allocation failure");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: failed to read " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    png_byte color = png_get_color_type(png, info);
    png_byte depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: unsupported channel count in " + path);
    }

    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * channels);
    Image im = Image::zeros(static_cast<int>(w), static_cast<int>(h), channels);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                im.at(c, static_cast<int>(y), static_cast<int>(x)) =
                    static_cast<float>(row[x * channels + c]) / 255.0f;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return im;
}

void write_png(const std::string& path, const Image& image) {
    if (image.channels != 1 && image.channels != 3)
        throw std::runtime_error("png: only 1 or 3 channels supported");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("png: cannot open " + path + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png: allocation failure");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png: allocation failure");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png: failed to write " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
                 static_cast<png_uint_32>(image.height), 8,
                 image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width) * image.channels);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c)
                row[static_cast<std::size_t>(x) * image.channels + c] = to_byte(image.at(c, y, x));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("pgm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error("pgm: not a binary PGM: " + path);
    int w, h, maxval;
    in >> w >> h >> maxval;
    if (!in || w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("pgm: unsupported header in " + path);
    in.get();  // single whitespace after maxval
    std::vector<char> buf(static_cast<std::size_t>(w) * h);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!in) throw std::runtime_error("pgm: unexpected end of data in " + path);
    Image im = Image::zeros(w, h, 1);
    for (std::size_t i = 0; i < buf.size(); ++i)
        im.data[i] = static_cast<float>(static_cast<std::uint8_t>(buf[i])) / 255.0f;
    return im;
}

void write_pgm(const std::string& path, const Image& image) {
    if (image.channels != 1) throw std::runtime_error("pgm: single-channel only");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pgm: cannot open " + path + " for writing");
    out << "P5\n" << image.width << " " << image.height << "\n255\n";
    std::vector<char> buf(image.plane());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<char>(to_byte(image.data[i]));
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

namespace {
bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}
}  // namespace

Image read_image(const std::string& path) {
    if (ends_with(path, ".pgm")) return read_pgm(path);
    return read_png(path);
}

void write_image(const std::string& path, const Image& image) {
    if (ends_with(path, ".pgm"))
        write_pgm(path, image);
    else
        write_png(path, image);
}

Image resize_bilinear(const Image& image, int new_width, int new_height) {
    if (new_width == image.width && new_height == image.height) return image;
    Image out = Image::zeros(new_width, new_height, image.channels);
    const float sx = static_cast<float>(image.width) / new_width;
    const float sy = static_cast<float>(image.height) / new_height;
    for (int c = 0; c < image.channels; ++c)
        for (int y = 0; y < new_height; ++y)
            for (int x = 0; x < new_width; ++x) {
                float fx = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
                float fy = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
                if (fx < 0) fx = 0;
                if (fy < 0) fy = 0;
                int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
                int x1 = x0 + 1 < image.width ? x0 + 1 : image.width - 1;
                int y1 = y0 + 1 < image.height ? y0 + 1 : image.height - 1;
                float ax = fx - x0, ay = fy - y0;
                out.at(c, y, x) = (1 - ax) * (1 - ay) * image.at(c, y0, x0) +
                                  ax * (1 - ay) * image.at(c, y0, x1) +
                                  (1 - ax) * ay * image.at(c, y1, x0) +
                                  ax * ay * image.at(c, y1, x1);
            }
    return out;
}

}  // namespace reconet
