#pragma once

// Temporal and perceptual loss terms for two-frame synergic training, plus
// the luminance-constraint ablation variants and color-space helpers.
//
// All losses consume images in [0,1]. Luminance coefficients are applied to
// raw frame differences without gamma linearization.

#include "reconet/flow.hpp"
#include "reconet/tensor.hpp"

#include <map>
#include <string>

namespace reconet {

enum class TemporalVariant { kRgbLum, kXyzLum, kNone };

inline TemporalVariant parse_temporal_variant(const std::string& s) {
    if (s == "rgb_lum") return TemporalVariant::kRgbLum;
    if (s == "xyz_lum") return TemporalVariant::kXyzLum;
    if (s == "none") return TemporalVariant::kNone;
    throw std::invalid_argument("unknown temporal loss variant '" + s + "'");
}

struct LossWeights {
    double alpha = 1.0;       // content
    double beta = 10.0;       // style
    double gamma = 1e-3;      // total variation
    double lambda_f = 1e7;    // feature-map-level temporal
    double lambda_o = 2e3;    // output-level temporal

    void validate() const {
        if (alpha < 0 || beta < 0 || gamma < 0 || lambda_f < 0 || lambda_o < 0)
            throw std::invalid_argument("loss weights must be nonnegative");
    }
};

struct LossBreakdown {
    double content = 0;   // summed over the two frames
    double style = 0;
    double tv = 0;
    double temporal_feature = 0;
    double temporal_output = 0;
    double total = 0;
};

// Y = 0.2126 R + 0.7152 G + 0.0722 B (the Y row of the RGB->XYZ map).
template <typename S>
Tensor<S> relative_luminance(const Tensor<S>& image) {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw std::invalid_argument("relative_luminance: image must be [3,H,W], got " +
                                    shape_str(image.shape()));
    return channel_matrix(image, {S(0.2126), S(0.7152), S(0.0722)}, 1);
}

template <typename S>
Tensor<S> rgb_to_xyz(const Tensor<S>& image) {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw std::invalid_argument("rgb_to_xyz: image must be [3,H,W]");
    return channel_matrix(image,
                          {S(0.4124), S(0.3576), S(0.1805),   //
                           S(0.2126), S(0.7152), S(0.0722),   //
                           S(0.0193), S(0.1192), S(0.9505)},
                          3);
}

// Output-level temporal loss between a stylized frame pair, normalized by
// D = H*W per channel. Differentiable w.r.t. the stylized frames only; the
// input frames are expected to be untracked constants.
template <typename S>
Tensor<S> output_temporal_loss(const Tensor<S>& o_prev, const Tensor<S>& o_cur,
                               const Tensor<S>& i_prev, const Tensor<S>& i_cur,
                               const FlowField& flow, const OcclusionMask& mask,
                               TemporalVariant variant) {
    require_same_shape(o_prev, o_cur, "output_temporal_loss");
    require_same_shape(i_prev, i_cur, "output_temporal_loss");
    require_same_shape(o_cur, i_cur, "output_temporal_loss");
    if (o_cur.dim(0) != 3) throw std::invalid_argument("output_temporal_loss: frames must be [3,H,W]");
    const int h = o_cur.dim(1), w = o_cur.dim(2);
    if (mask.width != w || mask.height != h)
        throw std::invalid_argument("output_temporal_loss: mask size mismatch");
    const S inv_d = S(1) / (static_cast<S>(h) * static_cast<S>(w));

    Tensor<S> delta_o = sub(o_cur, warp(o_prev, flow));
    Tensor<S> mask3 = tile_channel(mask.as_tensor<S>(), 3);

    Tensor<S> resid;
    switch (variant) {
        case TemporalVariant::kRgbLum: {
            Tensor<S> delta_i_y = relative_luminance(sub(i_cur, warp(i_prev, flow)));
            resid = sub(delta_o, tile_channel(delta_i_y, 3));
            break;
        }
        case TemporalVariant::kXyzLum: {
            // The map is linear, so converting the difference tensors equals
            // differencing the conversions. Y is pulled toward the input's
            // luminance change; X and Z are penalized toward zero.
            Tensor<S> delta_o_xyz = rgb_to_xyz(delta_o);
            Tensor<S> delta_i_y = relative_luminance(sub(i_cur, warp(i_prev, flow)));
            Tensor<S> target = channel_matrix(delta_i_y, {S(0), S(1), S(0)}, 3);
            resid = sub(delta_o_xyz, target);
            break;
        }
        case TemporalVariant::kNone:
            resid = delta_o;
            break;
    }
    // sum over channels of (1/D) * sum_p mask * resid^2
    return mul_scalar(sum(mul(square(resid), mask3)), inv_d);
}

// Feature-map-level temporal loss, normalized by D = C*h*w. The flow and mask
// must already be downscaled to the feature resolution.
template <typename S>
Tensor<S> feature_temporal_loss(const Tensor<S>& f_prev, const Tensor<S>& f_cur,
                                const FlowField& flow_ds, const OcclusionMask& mask_ds) {
    require_same_shape(f_prev, f_cur, "feature_temporal_loss");
    const int c = f_cur.dim(0), h = f_cur.dim(1), w = f_cur.dim(2);
    if (mask_ds.width != w || mask_ds.height != h)
        throw std::invalid_argument("feature_temporal_loss: mask size mismatch");
    Tensor<S> resid = sub(f_cur, warp(f_prev, flow_ds));
    Tensor<S> mask_c = tile_channel(mask_ds.as_tensor<S>(), c);
    return masked_mean(square(resid), mask_c);
}

// Squared L2 at the content tap divided by that tap's element count.
template <typename S>
Tensor<S> content_loss(const std::map<std::string, Tensor<S>>& out_feats,
                       const std::map<std::string, Tensor<S>>& in_feats,
                       const std::string& content_tap) {
    auto o = out_feats.find(content_tap);
    auto i = in_feats.find(content_tap);
    if (o == out_feats.end() || i == in_feats.end())
        throw std::invalid_argument("content_loss: missing tap '" + content_tap + "'");
    return mean(square(sub(o->second, i->second)));
}

// Sum over taps of the squared Frobenius distance between Gram matrices.
template <typename S>
Tensor<S> style_loss(const std::map<std::string, Tensor<S>>& out_feats,
                     const std::map<std::string, Tensor<S>>& style_grams) {
    Tensor<S> acc;
    for (const auto& [name, g_style] : style_grams) {
        auto o = out_feats.find(name);
        if (o == out_feats.end()) throw std::invalid_argument("style_loss: missing tap '" + name + "'");
        Tensor<S> d = sum(square(sub(gram(o->second), g_style)));
        acc = acc.valid() ? add(acc, d) : d;
    }
    if (!acc.valid()) throw std::invalid_argument("style_loss: no style grams given");
    return acc;
}

template <typename S>
std::map<std::string, Tensor<S>> style_grams_from_features(
    const std::map<std::string, Tensor<S>>& feats) {
    std::map<std::string, Tensor<S>> out;
    for (const auto& [name, f] : feats) out[name] = gram(f);
    return out;
}

// Anisotropic squared total variation, normalized by element count.
template <typename S>
Tensor<S> tv_loss(const Tensor<S>& image) {
    if (image.rank() != 3) throw std::invalid_argument("tv_loss: image must be [C,H,W]");
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    if (h < 2 || w < 2) throw std::invalid_argument("tv_loss: needs H,W >= 2");
    bool rec = detail::recording<S>({image.tracked()});
    S acc = S(0);
    for (int ci = 0; ci < c; ++ci) {
        const S* p = image.data().data() + static_cast<std::size_t>(ci) * h * w;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                S v = p[y * w + x];
                if (y + 1 < h) {
                    S d = p[(y + 1) * w + x] - v;
                    acc += d * d;
                }
                if (x + 1 < w) {
                    S d = p[y * w + x + 1] - v;
                    acc += d * d;
                }
            }
    }
    const S norm = S(1) / static_cast<S>(image.count());
    Tensor<S> out = Tensor<S>::from_data({1}, {acc * norm}, rec);
    if (rec)
        Tape<S>::active()->record([image, out, c, h, w, norm]() mutable {
            const S g = out.grad()[0] * norm * S(2);
            for (int ci = 0; ci < c; ++ci) {
                const S* p = image.data().data() + static_cast<std::size_t>(ci) * h * w;
                S* gp = image.grad().data() + static_cast<std::size_t>(ci) * h * w;
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        S v = p[y * w + x];
                        if (y + 1 < h) {
                            S d = p[(y + 1) * w + x] - v;
                            gp[(y + 1) * w + x] += g * d;
                            gp[y * w + x] -= g * d;
                        }
                        if (x + 1 < w) {
                            S d = p[y * w + x + 1] - v;
                            gp[y * w + x + 1] += g * d;
                            gp[y * w + x] -= g * d;
                        }
                    }
            }
        });
    return out;
}

// Everything one two-frame training step needs to assemble the combined loss.
template <typename S>
struct TwoFrameBundle {
    Tensor<S> i_prev, i_cur;  // input frames (untracked)
    Tensor<S> o_prev, o_cur;  // stylized outputs
    Tensor<S> f_prev, f_cur;  // encoder feature maps
    std::map<std::string, Tensor<S>> o_prev_feats, o_cur_feats;  // backbone taps of outputs
    std::map<std::string, Tensor<S>> i_prev_feats, i_cur_feats;  // backbone taps of inputs
    const std::map<std::string, Tensor<S>>* style_grams = nullptr;
    std::string content_tap;
    FlowField flow;           // full resolution, sampling convention
    OcclusionMask mask;
    FlowField flow_ds;        // feature resolution
    OcclusionMask mask_ds;
    TemporalVariant variant = TemporalVariant::kRgbLum;
    bool use_feature_temporal = true;
    bool use_output_temporal = true;
};

template <typename S>
struct TotalLoss {
    Tensor<S> total;
    LossBreakdown breakdown;
};

// Combined two-frame loss: perceptual terms summed over both frames, temporal
// terms computed once between them.
template <typename S>
TotalLoss<S> total_loss(const TwoFrameBundle<S>& bundle, const LossWeights& weights) {
    weights.validate();
    if (!bundle.style_grams) throw std::invalid_argument("total_loss: style grams missing");

    Tensor<S> content = add(content_loss(bundle.o_prev_feats, bundle.i_prev_feats, bundle.content_tap),
                            content_loss(bundle.o_cur_feats, bundle.i_cur_feats, bundle.content_tap));
    Tensor<S> style = add(style_loss(bundle.o_prev_feats, *bundle.style_grams),
                          style_loss(bundle.o_cur_feats, *bundle.style_grams));
    Tensor<S> tv = add(tv_loss(bundle.o_prev), tv_loss(bundle.o_cur));
    Tensor<S> temp_f = bundle.use_feature_temporal
                           ? feature_temporal_loss(bundle.f_prev, bundle.f_cur, bundle.flow_ds,
                                                   bundle.mask_ds)
                           : Tensor<S>::scalar(S(0));
    Tensor<S> temp_o = bundle.use_output_temporal
                           ? output_temporal_loss(bundle.o_prev, bundle.o_cur, bundle.i_prev,
                                                  bundle.i_cur, bundle.flow, bundle.mask,
                                                  bundle.variant)
                           : Tensor<S>::scalar(S(0));

    Tensor<S> total = mul_scalar(content, static_cast<S>(weights.alpha));
    total = add(total, mul_scalar(style, static_cast<S>(weights.beta)));
    total = add(total, mul_scalar(tv, static_cast<S>(weights.gamma)));
    total = add(total, mul_scalar(temp_f, static_cast<S>(weights.lambda_f)));
    total = add(total, mul_scalar(temp_o, static_cast<S>(weights.lambda_o)));

    TotalLoss<S> out;
    out.total = total;
    out.breakdown.content = static_cast<double>(content.item());
    out.breakdown.style = static_cast<double>(style.item());
    out.breakdown.tv = static_cast<double>(tv.item());
    out.breakdown.temporal_feature = static_cast<double>(temp_f.item());
    out.breakdown.temporal_output = static_cast<double>(temp_o.item());
    out.breakdown.total = static_cast<double>(total.item());
    return out;
}

}  // namespace reconet
