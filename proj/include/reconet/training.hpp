#pragma once

// Dataset ingestion, augmentation, Adam, and the two-frame training loop.
//
// Dataset layout: <root>/manifest.txt lists one scene directory per line.
// Each scene holds frame_%04d.png plus sibling flow/ (.flo, forward flow
// indexed by the later frame) and mask/ (8-bit PNG/PGM, 0 = untraceable).
// An optional flow_bwd/ directory supplies backward flows which are used
// directly as the pull-sampling field; otherwise the negated forward flow is
// used as an approximation.

#include "reconet/backbone.hpp"
#include "reconet/checkpoint.hpp"
#include "reconet/config.hpp"
#include "reconet/flow.hpp"
#include "reconet/image.hpp"
#include "reconet/losses.hpp"
#include "reconet/stylenet.hpp"

#include <map>
#include <random>
#include <string>
#include <vector>

namespace reconet {

// Raised when training hits a non-finite loss term; mapped to exit code 2.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FramePairSample {
    Image i_prev, i_cur;     // [0,1] frames
    FlowField flow;          // sampling convention, full resolution
    OcclusionMask mask;
    FlowField flow_ds;       // factor-4 cache at feature resolution
    OcclusionMask mask_ds;
    bool approximate_flow = false;

    void build_downscale_cache() {
        auto [f, m] = downscale_flow(flow, mask, 4);
        flow_ds = std::move(f);
        mask_ds = std::move(m);
    }
};

std::vector<FramePairSample> load_dataset(const std::string& root, int width, int height);

// Joint horizontal flip of frames, flow (dx negated) and masks when the
// uniform draw falls below hflip_prob.
FramePairSample augment(const FramePairSample& sample, double draw, double hflip_prob);

// Portable uniform in [0,1) from a raw mt19937 draw.
inline double uniform01(std::mt19937& rng) {
    return static_cast<double>(rng() >> 8) * (1.0 / 16777216.0);
}

template <typename S>
struct AdamState {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long step = 0;
    std::map<std::string, std::pair<std::vector<S>, std::vector<S>>> moments;  // name -> (m, v)
};

// Standard bias-corrected Adam update over a named parameter list.
template <typename S>
void adam_step(std::vector<std::pair<std::string, Tensor<S>>>& params, AdamState<S>& state,
               double lr) {
    ++state.step;
    const double b1 = state.beta1, b2 = state.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (auto& [name, p] : params) {
        auto& [m, v] = state.moments[name];
        if (m.size() != p.count()) {
            if (!m.empty())
                throw std::invalid_argument("adam: moment shape mismatch for " + name);
            m.assign(p.count(), S(0));
            v.assign(p.count(), S(0));
        }
        const auto& g = p.grad();
        auto& d = p.data();
        for (std::size_t i = 0; i < d.size(); ++i) {
            double gi = static_cast<double>(g[i]);
            double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
            double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
            m[i] = static_cast<S>(mi);
            v[i] = static_cast<S>(vi);
            d[i] = static_cast<S>(static_cast<double>(d[i]) -
                                  lr * (mi / corr1) / (std::sqrt(vi / corr2) + state.eps));
        }
    }
}

// Forward both frames, assemble the combined loss and run backward,
// accumulating into parameter gradients. Does not touch the optimizer.
LossBreakdown accumulate_gradients(StyleNet<float>& net, const Backbone<float>& backbone,
                                   const std::map<std::string, Tensor<float>>& style_grams,
                                   const FramePairSample& sample, const TrainConfig& config);

// Single-sample convenience: zero grads, accumulate, Adam update.
LossBreakdown train_step(StyleNet<float>& net, const Backbone<float>& backbone,
                         const std::map<std::string, Tensor<float>>& style_grams,
                         const FramePairSample& sample, const TrainConfig& config,
                         AdamState<float>& adam);

struct TrainResult {
    std::string final_checkpoint;
    std::string loss_log;
    LossBreakdown first_step;
    LossBreakdown last_step;
};

class Trainer {
public:
    explicit Trainer(TrainConfig config);

    // Builds everything from in-memory inputs (tests, fixtures).
    Trainer(TrainConfig config, std::vector<FramePairSample> samples, const Image& style_image);

    LossBreakdown step();  // one optimizer step (batch_size accumulated samples)
    TrainResult run(const std::string& out_dir);

    void save_state(const std::string& model_path, const std::string& state_path);
    void load_state(const std::string& model_path, const std::string& state_path);

    StyleNet<float>& net() { return net_; }
    const Backbone<float>& backbone() const { return backbone_; }
    const std::map<std::string, Tensor<float>>& style_grams() const { return style_grams_; }
    long current_step() const { return adam_.step; }

private:
    void init_model(const Image& style_image);
    const FramePairSample& next_index();

    TrainConfig config_;
    std::vector<FramePairSample> samples_;
    StyleNet<float> net_;
    Backbone<float> backbone_;
    std::map<std::string, Tensor<float>> style_grams_;
    AdamState<float> adam_;
    std::mt19937 rng_;
    std::vector<int> order_;
    std::size_t cursor_ = 0;
    FramePairSample scratch_;
};

}  // namespace reconet
