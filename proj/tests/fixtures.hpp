#pragma once

// Shared synthetic fixtures: a translating periodic texture with exactly
// known integer flows, plus helpers to materialize it as an on-disk dataset
// or as in-memory training samples / evaluation sequences.

#include "reconet/evaluation.hpp"
#include "reconet/training.hpp"

#include <random>
#include <string>
#include <vector>

namespace fixtures {

struct Scene {
    std::vector<reconet::Image> frames;        // [0,1], 8-bit quantized
    std::vector<reconet::FlowField> flows;     // sampling convention, index t-1
    std::vector<reconet::OcclusionMask> masks; // border band zeroed
    int shift_x = 0, shift_y = 0;
};

// Frame t is the base texture rolled by (t*sx, t*sy); with the pull-flow
// (sx, sy) every in-bounds pixel of frame t matches frame t-1 exactly.
Scene make_translating_scene(int n_frames, int width, int height, int shift_x, int shift_y,
                             unsigned seed);

// Writes scenes as a dataset: manifest.txt + per-scene frame_%04d.png with
// sibling flow/ (forward push-flow .flo) and mask/ directories.
void write_scene_dataset(const std::string& root, const std::vector<Scene>& scenes);

std::vector<reconet::FramePairSample> scene_samples(const Scene& scene);

reconet::SceneSequence scene_sequence(const Scene& scene);

reconet::Image random_image(int width, int height, unsigned seed);

// Temp directory fresh for this call, under the system temp root.
std::string fresh_temp_dir(const std::string& tag);

}  // namespace fixtures
