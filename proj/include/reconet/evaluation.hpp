#pragma once

// Temporal-stability metric, warp-error histograms, per-transition error
// maps, and the per-frame throughput benchmark.

#include "reconet/flow.hpp"
#include "reconet/image.hpp"
#include "reconet/stylenet.hpp"

#include <string>
#include <vector>

namespace reconet {

// Ordered frames with per-transition flow/mask: flows[t-1]/masks[t-1] relate
// frames[t-1] -> frames[t] in the pull-sampling convention.
struct SceneSequence {
    std::vector<Tensor<float>> frames;
    std::vector<FlowField> flows;
    std::vector<OcclusionMask> masks;

    void validate() const;
};

// Root-mean masked warping error over a whole scene: the residual is summed
// over channels, normalized per transition by D = H*W, averaged over the
// T-1 transitions, then square-rooted.
double e_stab(const SceneSequence& seq);

struct HistogramReport {
    std::string colorspace;          // "RGB" or "XYZ"
    std::vector<double> bin_edges;   // bins+1 entries
    std::vector<std::vector<std::uint64_t>> counts;  // [3][bins]
    std::uint64_t masked_pixels = 0; // summed over transitions

    std::string to_csv() const;      // bin_lo,bin_hi,count_R,count_G,count_B
};

// Masked per-channel |I_t - W(I_{t-1})| binned uniformly over [0,1];
// out-of-range magnitudes land in the last bin.
HistogramReport warp_error_histogram(const SceneSequence& seq, const std::string& colorspace,
                                     int bins = 64);

struct ErrorMapPair {
    Image total;      // masked |dO| summed over RGB
    Image luminance;  // masked |dO_Y - dI_Y|
};

// One map pair per transition; values scaled by 255/err_scale and clamped.
std::vector<ErrorMapPair> temporal_error_maps(const SceneSequence& outputs,
                                              const SceneSequence& inputs,
                                              double err_scale = 0.5);

struct FpsReport {
    int width = 0, height = 0;
    int warmup_iters = 0, timed_iters = 0;
    std::string hardware;
    double mean_ms = 0, median_ms = 0, fps = 0;
    std::vector<double> samples_ms;

    std::string to_text() const;  // key=value lines
};

FpsReport fps_benchmark(const StyleNet<float>& net, int width, int height, int warmup_iters,
                        int timed_iters);

}  // namespace reconet
