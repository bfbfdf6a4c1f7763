#pragma once

// Optical flow fields, occlusion masks, .flo I/O and the pull-warp used by
// the temporal losses.
//
// Flow convention: a FlowField is defined in destination-frame coordinates.
// For each current-frame pixel p, p + flow(p) is its location in the source
// (previous) frame, in pixel units. Dataset files that store push-flows are
// converted on ingest (see dataset loading).

#include "reconet/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace reconet {

struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<float> dx;  // height*width, row-major
    std::vector<float> dy;

    static FlowField constant(int width, int height, float cdx, float cdy);
    std::size_t count() const { return static_cast<std::size_t>(width) * height; }

    // Sanity bound from ingest: |dx| <= width, |dy| <= height, all finite.
    void validate() const;
    FlowField negated() const;
};

struct OcclusionMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;  // exactly 0 (untraceable) or 1 (traceable)

    static OcclusionMask filled(int width, int height, std::uint8_t v);
    std::size_t count() const { return static_cast<std::size_t>(width) * height; }

    template <typename S>
    Tensor<S> as_tensor() const {
        std::vector<S> v(count());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<S>(values[i]);
        return Tensor<S>::from_data({1, height, width}, std::move(v));
    }
};

// Middlebury .flo container: float32 202021.25, int32 width, int32 height,
// then interleaved (dx, dy) float32 pairs, all little-endian.
FlowField read_flo(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> write_flo(const FlowField& flow);
FlowField read_flo_file(const std::string& path);
void write_flo_file(const std::string& path, const FlowField& flow);

struct OcclusionParams {
    // Forward-backward consistency: occluded when
    //   |w_b + w_f~|^2 > c1 * (|w_b|^2 + |w_f~|^2) + c2
    // with w_f~ the forward flow sampled bilinearly at p + w_b(p).
    float c1 = 0.01f;
    float c2 = 0.5f;
    // Optional motion-boundary rejection: |grad w_b|^2 > b1 * |w_b|^2 + b2.
    bool motion_boundaries = false;
    float b1 = 0.01f;
    float b2 = 0.002f;
};

// flow_fwd maps frame t-1 -> t, flow_bwd maps t -> t-1; the mask is for frame t.
OcclusionMask occlusion_mask(const FlowField& flow_fwd, const FlowField& flow_bwd,
                             const OcclusionParams& params = {});

// Average-pools flow over factor x factor blocks and rescales vectors by
// 1/factor; min-pools the mask (a block is traceable only if all members are).
std::pair<FlowField, OcclusionMask> downscale_flow(const FlowField& flow,
                                                   const OcclusionMask& mask, int factor);

FlowField flip_horizontal(const FlowField& flow);
OcclusionMask flip_horizontal(const OcclusionMask& mask);

template <typename S>
Tensor<S> flip_horizontal(const Tensor<S>& image) {
    if (image.rank() != 3) throw std::invalid_argument("flip_horizontal: image must be [C,H,W]");
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    Tensor<S> out = Tensor<S>::zeros(image.shape());
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y) {
            const S* src = image.data().data() + (static_cast<std::size_t>(ci) * h + y) * w;
            S* dst = out.data().data() + (static_cast<std::size_t>(ci) * h + y) * w;
            for (int x = 0; x < w; ++x) dst[x] = src[w - 1 - x];
        }
    return out;
}

// Bilinear pull-sampling: out(p) = source(p + flow(p)), interpolating up to 4
// neighbors, clamping out-of-bounds locations to the border. Differentiable
// w.r.t. source only; the coordinates are constants.
template <typename S>
Tensor<S> bilinear_sample(const Tensor<S>& source, const FlowField& flow) {
    if (source.rank() != 3)
        throw std::invalid_argument("bilinear_sample: source must be [C,H,W]");
    const int c = source.dim(0), h = source.dim(1), w = source.dim(2);
    if (flow.width != w || flow.height != h)
        throw std::invalid_argument("bilinear_sample: flow size " + std::to_string(flow.width) + "x" +
                                    std::to_string(flow.height) + " != source " + std::to_string(w) +
                                    "x" + std::to_string(h));
    const long n = static_cast<long>(h) * w;

    // Per-pixel corner indices and weights, shared by forward and backward.
    auto corner = std::make_shared<std::vector<int>>(static_cast<std::size_t>(n) * 4);
    auto weight = std::make_shared<std::vector<S>>(static_cast<std::size_t>(n) * 4);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const long p = static_cast<long>(y) * w + x;
            double sx = x + static_cast<double>(flow.dx[static_cast<std::size_t>(p)]);
            double sy = y + static_cast<double>(flow.dy[static_cast<std::size_t>(p)]);
            if (sx < 0) sx = 0;
            if (sx > w - 1) sx = w - 1;
            if (sy < 0) sy = 0;
            if (sy > h - 1) sy = h - 1;
            int x0 = static_cast<int>(std::floor(sx));
            int y0 = static_cast<int>(std::floor(sy));
            int x1 = x0 + 1 < w ? x0 + 1 : w - 1;
            int y1 = y0 + 1 < h ? y0 + 1 : h - 1;
            const S fx = static_cast<S>(sx - x0);
            const S fy = static_cast<S>(sy - y0);
            int* ci = corner->data() + p * 4;
            S* wi = weight->data() + p * 4;
            ci[0] = y0 * w + x0;
            ci[1] = y0 * w + x1;
            ci[2] = y1 * w + x0;
            ci[3] = y1 * w + x1;
            wi[0] = (S(1) - fx) * (S(1) - fy);
            wi[1] = fx * (S(1) - fy);
            wi[2] = (S(1) - fx) * fy;
            wi[3] = fx * fy;
        }

    bool rec = detail::recording<S>({source.tracked()});
    Tensor<S> out = Tensor<S>::zeros(source.shape(), rec);
    for (int ch = 0; ch < c; ++ch) {
        const S* src = source.data().data() + static_cast<std::size_t>(ch) * n;
        S* dst = out.data().data() + static_cast<std::size_t>(ch) * n;
        for (long p = 0; p < n; ++p) {
            const int* ci = corner->data() + p * 4;
            const S* wi = weight->data() + p * 4;
            // Integer offsets hit grid points exactly; keep them bit-exact.
            if (wi[0] == S(1))
                dst[p] = src[ci[0]];
            else
                dst[p] = wi[0] * src[ci[0]] + wi[1] * src[ci[1]] + wi[2] * src[ci[2]] +
                         wi[3] * src[ci[3]];
        }
    }
    if (rec)
        Tape<S>::active()->record([source, out, corner, weight, c, n]() mutable {
            for (int ch = 0; ch < c; ++ch) {
                S* gsrc = source.grad().data() + static_cast<std::size_t>(ch) * n;
                const S* gdst = out.grad().data() + static_cast<std::size_t>(ch) * n;
                for (long p = 0; p < n; ++p) {
                    const int* ci = corner->data() + p * 4;
                    const S* wi = weight->data() + p * 4;
                    gsrc[ci[0]] += wi[0] * gdst[p];
                    gsrc[ci[1]] += wi[1] * gdst[p];
                    gsrc[ci[2]] += wi[2] * gdst[p];
                    gsrc[ci[3]] += wi[3] * gdst[p];
                }
            }
        });
    detail::check_finite(out, "bilinear_sample");
    return out;
}

// Pull-warp of a previous frame/feature map into current-frame coordinates.
template <typename S>
Tensor<S> warp(const Tensor<S>& source, const FlowField& flow) {
    return bilinear_sample(source, flow);
}

}  // namespace reconet
