#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace reconet;

namespace fixtures {

namespace {

// Low-frequency periodic texture quantized to 8-bit so PNG roundtrips are
// exact and integer rolls stay bit-identical.
Image base_texture(int width, int height, unsigned seed) {
    std::mt19937 rng(seed);
    Image im = Image::zeros(width, height, 3);
    for (int c = 0; c < 3; ++c) {
        const int kx = 1 + static_cast<int>(rng() % 3);
        const int ky = 1 + static_cast<int>(rng() % 3);
        const double px = static_cast<double>(rng() % 628) / 100.0;
        const double py = static_cast<double>(rng() % 628) / 100.0;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                double v = 0.5 + 0.25 * std::sin(2.0 * M_PI * kx * x / width + px) +
                           0.25 * std::sin(2.0 * M_PI * ky * y / height + py);
                int q = static_cast<int>(std::lround(v * 255.0));
                if (q < 0) q = 0;
                if (q > 255) q = 255;
                im.at(c, y, x) = static_cast<float>(q) / 255.0f;
            }
    }
    return im;
}

Image roll(const Image& im, int dx, int dy) {
    Image out = Image::zeros(im.width, im.height, im.channels);
    for (int c = 0; c < im.channels; ++c)
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x) {
                int sx = ((x + dx) % im.width + im.width) % im.width;
                int sy = ((y + dy) % im.height + im.height) % im.height;
                out.at(c, y, x) = im.at(c, sy, sx);
            }
    return out;
}

}  // namespace

Scene make_translating_scene(int n_frames, int width, int height, int shift_x, int shift_y,
                             unsigned seed) {
    Scene scene;
    scene.shift_x = shift_x;
    scene.shift_y = shift_y;
    Image base = base_texture(width, height, seed);
    for (int t = 0; t < n_frames; ++t) scene.frames.push_back(roll(base, t * shift_x, t * shift_y));
    for (int t = 1; t < n_frames; ++t) {
        scene.flows.push_back(FlowField::constant(width, height,
                                                  static_cast<float>(shift_x),
                                                  static_cast<float>(shift_y)));
        // clamp breaks correspondence where p + shift leaves the frame
        OcclusionMask mask = OcclusionMask::filled(width, height, 1);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const int sx = x + shift_x, sy = y + shift_y;
                if (sx < 0 || sx > width - 1 || sy < 0 || sy > height - 1)
                    mask.values[static_cast<std::size_t>(y) * width + x] = 0;
            }
        scene.masks.push_back(std::move(mask));
    }
    return scene;
}

void write_scene_dataset(const std::string& root, const std::vector<Scene>& scenes) {
    fs::create_directories(root);
    std::ofstream manifest(fs::path(root) / "manifest.txt");
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        char name[32];
        std::snprintf(name, sizeof(name), "scene_%02zu", s);
        manifest << name << "\n";
        const Scene& scene = scenes[s];
        fs::path dir = fs::path(root) / name;
        fs::create_directories(dir / "flow");
        fs::create_directories(dir / "mask");
        for (std::size_t t = 0; t < scene.frames.size(); ++t) {
            char frame[32];
            std::snprintf(frame, sizeof(frame), "frame_%04zu", t);
            write_png((dir / (std::string(frame) + ".png")).string(), scene.frames[t]);
            if (t > 0) {
                // stored files hold the forward push-flow; the loader negates it
                write_flo_file((dir / "flow" / (std::string(frame) + ".flo")).string(),
                               scene.flows[t - 1].negated());
                Image m = Image::zeros(scene.masks[t - 1].width, scene.masks[t - 1].height, 1);
                for (std::size_t i = 0; i < m.data.size(); ++i)
                    m.data[i] = scene.masks[t - 1].values[i] ? 1.0f : 0.0f;
                write_png((dir / "mask" / (std::string(frame) + ".png")).string(), m);
            }
        }
    }
}

std::vector<FramePairSample> scene_samples(const Scene& scene) {
    std::vector<FramePairSample> out;
    for (std::size_t t = 1; t < scene.frames.size(); ++t) {
        FramePairSample s;
        s.i_prev = scene.frames[t - 1];
        s.i_cur = scene.frames[t];
        s.flow = scene.flows[t - 1];
        s.mask = scene.masks[t - 1];
        s.build_downscale_cache();
        out.push_back(std::move(s));
    }
    return out;
}

SceneSequence scene_sequence(const Scene& scene) {
    SceneSequence seq;
    for (const auto& f : scene.frames) seq.frames.push_back(f.as_tensor<float>());
    seq.flows = scene.flows;
    seq.masks = scene.masks;
    return seq;
}

Image random_image(int width, int height, unsigned seed) {
    std::mt19937 rng(seed);
    Image im = Image::zeros(width, height, 3);
    for (auto& v : im.data)
        v = static_cast<float>(rng() % 256) / 255.0f;
    return im;
}

std::string fresh_temp_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    fs::path dir = fs::temp_directory_path() /
                   ("reconet_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter.fetch_add(1)));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

}  // namespace fixtures
