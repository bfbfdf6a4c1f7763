#include "reconet/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace reconet {

namespace {

constexpr std::uint32_t kBackboneSeed = 7391;

std::string frame_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d", index);
    return buf;
}

// Bilinear flow resize; vectors rescale with resolution.
FlowField resize_flow(const FlowField& flow, int new_w, int new_h) {
    if (new_w == flow.width && new_h == flow.height) return flow;
    FlowField out;
    out.width = new_w;
    out.height = new_h;
    out.dx.resize(out.count());
    out.dy.resize(out.count());
    const float sx = static_cast<float>(flow.width) / new_w;
    const float sy = static_cast<float>(flow.height) / new_h;
    const float kx = static_cast<float>(new_w) / flow.width;
    const float ky = static_cast<float>(new_h) / flow.height;
    for (int y = 0; y < new_h; ++y)
        for (int x = 0; x < new_w; ++x) {
            float fx = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
            float fy = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
            if (fx < 0) fx = 0;
            if (fy < 0) fy = 0;
            if (fx > static_cast<float>(flow.width - 1)) fx = static_cast<float>(flow.width - 1);
            if (fy > static_cast<float>(flow.height - 1)) fy = static_cast<float>(flow.height - 1);
            int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
            int x1 = x0 + 1 < flow.width ? x0 + 1 : flow.width - 1;
            int y1 = y0 + 1 < flow.height ? y0 + 1 : flow.height - 1;
            float ax = fx - x0, ay = fy - y0;
            auto lerp = [&](const std::vector<float>& v) {
                auto at = [&](int yy, int xx) {
                    return v[static_cast<std::size_t>(yy) * flow.width + xx];
                };
                return (1 - ax) * (1 - ay) * at(y0, x0) + ax * (1 - ay) * at(y0, x1) +
                       (1 - ax) * ay * at(y1, x0) + ax * ay * at(y1, x1);
            };
            std::size_t q = static_cast<std::size_t>(y) * new_w + x;
            out.dx[q] = lerp(flow.dx) * kx;
            out.dy[q] = lerp(flow.dy) * ky;
        }
    return out;
}

OcclusionMask resize_mask_nearest(const OcclusionMask& mask, int new_w, int new_h) {
    if (new_w == mask.width && new_h == mask.height) return mask;
    OcclusionMask out = OcclusionMask::filled(new_w, new_h, 1);
    for (int y = 0; y < new_h; ++y)
        for (int x = 0; x < new_w; ++x) {
            int sx = x * mask.width / new_w;
            int sy = y * mask.height / new_h;
            out.values[static_cast<std::size_t>(y) * new_w + x] =
                mask.values[static_cast<std::size_t>(sy) * mask.width + sx];
        }
    return out;
}

OcclusionMask mask_from_image(const Image& im) {
    OcclusionMask m = OcclusionMask::filled(im.width, im.height, 0);
    for (std::size_t i = 0; i < m.count(); ++i) m.values[i] = im.data[i] >= 0.5f ? 1 : 0;
    return m;
}

std::string find_mask_file(const fs::path& dir, const std::string& stem) {
    for (const char* ext : {".png", ".pgm"}) {
        fs::path p = dir / (stem + ext);
        if (fs::exists(p)) return p.string();
    }
    return "";
}

}  // namespace

std::vector<FramePairSample> load_dataset(const std::string& root, int width, int height) {
    fs::path root_path(root);
    std::ifstream manifest(root_path / "manifest.txt");
    if (!manifest) throw std::runtime_error("dataset: cannot open " + (root_path / "manifest.txt").string());

    std::vector<FramePairSample> samples;
    bool warned_approximate = false;
    std::string scene;
    while (std::getline(manifest, scene)) {
        if (!scene.empty() && scene.back() == '\r') scene.pop_back();
        if (scene.empty() || scene[0] == '#') continue;
        fs::path scene_dir = root_path / scene;

        std::vector<std::string> frames;
        for (int i = 0;; ++i) {
            fs::path p = scene_dir / (frame_name(i) + ".png");
            if (!fs::exists(p)) break;
            frames.push_back(p.string());
        }
        if (frames.size() < 2) {
            std::cerr << "warning: scene '" << scene << "' has fewer than 2 frames, skipped\n";
            continue;
        }
        for (std::size_t t = 1; t < frames.size(); ++t) {
            fs::path flo_path = scene_dir / "flow" / (frame_name(static_cast<int>(t)) + ".flo");
            std::string mask_path =
                find_mask_file(scene_dir / "mask", frame_name(static_cast<int>(t)));
            if (!fs::exists(flo_path) || mask_path.empty()) {
                std::cerr << "warning: missing flow or mask for " << scene << "/"
                          << frame_name(static_cast<int>(t)) << ", pair skipped\n";
                continue;
            }
            FramePairSample s;
            s.i_prev = read_png(frames[t - 1]);
            s.i_cur = read_png(frames[t]);

            FlowField flow;
            fs::path bwd_path = scene_dir / "flow_bwd" / (frame_name(static_cast<int>(t)) + ".flo");
            if (fs::exists(bwd_path)) {
                // backward flow is already the pull-sampling field
                flow = read_flo_file(bwd_path.string());
            } else {
                flow = read_flo_file(flo_path.string()).negated();
                s.approximate_flow = true;
                if (!warned_approximate) {
                    std::cerr << "note: no flow_bwd/ present; using negated forward flow as the "
                                 "sampling field (approximate)\n";
                    warned_approximate = true;
                }
            }
            flow.validate();
            OcclusionMask mask = mask_from_image(read_image(mask_path));
            if (mask.width != flow.width || mask.height != flow.height)
                throw std::runtime_error("dataset: mask/flow size mismatch for " + scene + "/" +
                                         frame_name(static_cast<int>(t)));

            if (s.i_prev.width != width || s.i_prev.height != height) {
                s.i_prev = resize_bilinear(s.i_prev, width, height);
                s.i_cur = resize_bilinear(s.i_cur, width, height);
            }
            s.flow = resize_flow(flow, width, height);
            s.mask = resize_mask_nearest(mask, width, height);
            s.build_downscale_cache();
            samples.push_back(std::move(s));
        }
    }
    if (samples.empty()) throw std::runtime_error("dataset: no usable frame pairs under " + root);
    return samples;
}

FramePairSample augment(const FramePairSample& sample, double draw, double hflip_prob) {
    if (draw >= hflip_prob) return sample;
    FramePairSample out;
    out.i_prev = Image::from_tensor(flip_horizontal(sample.i_prev.as_tensor<float>()));
    out.i_cur = Image::from_tensor(flip_horizontal(sample.i_cur.as_tensor<float>()));
    out.flow = flip_horizontal(sample.flow);
    out.mask = flip_horizontal(sample.mask);
    out.flow_ds = flip_horizontal(sample.flow_ds);
    out.mask_ds = flip_horizontal(sample.mask_ds);
    out.approximate_flow = sample.approximate_flow;
    return out;
}

LossBreakdown accumulate_gradients(StyleNet<float>& net, const Backbone<float>& backbone,
                                   const std::map<std::string, Tensor<float>>& style_grams,
                                   const FramePairSample& sample, const TrainConfig& config) {
    Tape<float> tape;
    TwoFrameBundle<float> bundle;
    bundle.i_prev = sample.i_prev.as_tensor<float>();
    bundle.i_cur = sample.i_cur.as_tensor<float>();
    bundle.f_prev = net.encode(bundle.i_prev);
    bundle.o_prev = net.decode(bundle.f_prev);
    bundle.f_cur = net.encode(bundle.i_cur);
    bundle.o_cur = net.decode(bundle.f_cur);
    bundle.o_prev_feats = backbone.features(bundle.o_prev);
    bundle.o_cur_feats = backbone.features(bundle.o_cur);
    bundle.i_prev_feats = backbone.features(bundle.i_prev);
    bundle.i_cur_feats = backbone.features(bundle.i_cur);
    bundle.style_grams = &style_grams;
    bundle.content_tap = backbone.content_tap();
    bundle.flow = sample.flow;
    bundle.mask = sample.mask;
    bundle.flow_ds = sample.flow_ds;
    bundle.mask_ds = sample.mask_ds;
    bundle.variant = parse_temporal_variant(config.luminance_variant);
    bundle.use_feature_temporal = config.use_feature_temporal();
    bundle.use_output_temporal = config.use_output_temporal();

    TotalLoss<float> loss = total_loss(bundle, config.weights);
    const std::pair<const char*, double> terms[] = {
        {"content", loss.breakdown.content},         {"style", loss.breakdown.style},
        {"tv", loss.breakdown.tv},                   {"temp_f", loss.breakdown.temporal_feature},
        {"temp_o", loss.breakdown.temporal_output},  {"total", loss.breakdown.total},
    };
    for (const auto& [name, value] : terms)
        if (!std::isfinite(value))
            throw NumericError(std::string("non-finite loss term '") + name + "'");
    tape.backward(loss.total);
    return loss.breakdown;
}

LossBreakdown train_step(StyleNet<float>& net, const Backbone<float>& backbone,
                         const std::map<std::string, Tensor<float>>& style_grams,
                         const FramePairSample& sample, const TrainConfig& config,
                         AdamState<float>& adam) {
    net.zero_grad();
    LossBreakdown breakdown = accumulate_gradients(net, backbone, style_grams, sample, config);
    auto params = net.parameters();
    adam_step(params, adam, config.learning_rate);
    return breakdown;
}

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
    config_.validate();
    if (config_.style_image.empty() || !fs::exists(config_.style_image))
        throw std::runtime_error("trainer: style image not found: '" + config_.style_image + "'");
    if (config_.dataset.empty())
        throw std::runtime_error("trainer: no dataset configured");
    samples_ = load_dataset(config_.dataset, config_.width, config_.height);
    init_model(read_image(config_.style_image));
}

Trainer::Trainer(TrainConfig config, std::vector<FramePairSample> samples, const Image& style_image)
    : config_(std::move(config)), samples_(std::move(samples)) {
    config_.validate();
    if (samples_.empty()) throw std::runtime_error("trainer: empty sample set");
    init_model(style_image);
}

void Trainer::init_model(const Image& style_image) {
    net_ = StyleNet<float>::random(config_.seed);
    backbone_ = Backbone<float>::make_profile(config_.backbone, kBackboneSeed);
    if (!config_.backbone_weights.empty()) {
        Checkpoint ckpt = read_checkpoint_file(config_.backbone_weights);
        for (auto& [name, t] : backbone_.named_weights()) {
            const CheckpointEntry* e = ckpt.find(name);
            if (!e) throw std::runtime_error("backbone weights: missing layer '" + name + "'");
            if (e->shape != t.shape())
                throw std::runtime_error("backbone weights: layer '" + name + "' has shape " +
                                         shape_str(e->shape) + ", expected " + shape_str(t.shape()));
            t.data() = e->data;
        }
    }
    Image style = resize_bilinear(style_image, config_.width, config_.height);
    auto style_feats = backbone_.features(style.as_tensor<float>());
    style_grams_ = style_grams_from_features(style_feats);

    adam_.beta1 = config_.adam_beta1;
    adam_.beta2 = config_.adam_beta2;
    adam_.eps = config_.adam_eps;
    rng_.seed(config_.seed);
    order_.resize(samples_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    cursor_ = order_.size();  // force a shuffle before the first draw
}

const FramePairSample& Trainer::next_index() {
    if (cursor_ >= order_.size()) {
        // Fisher-Yates with explicit draws; std::shuffle is not portable.
        for (std::size_t i = order_.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(rng_() % i);
            std::swap(order_[i - 1], order_[j]);
        }
        cursor_ = 0;
    }
    const FramePairSample& base = samples_[static_cast<std::size_t>(order_[cursor_++])];
    double draw = uniform01(rng_);
    scratch_ = augment(base, draw, config_.hflip_prob);
    return scratch_;
}

LossBreakdown Trainer::step() {
    net_.zero_grad();
    LossBreakdown mean{};
    for (int b = 0; b < config_.batch_size; ++b) {
        LossBreakdown d = accumulate_gradients(net_, backbone_, style_grams_, next_index(), config_);
        mean.content += d.content;
        mean.style += d.style;
        mean.tv += d.tv;
        mean.temporal_feature += d.temporal_feature;
        mean.temporal_output += d.temporal_output;
        mean.total += d.total;
    }
    const double inv = 1.0 / config_.batch_size;
    mean.content *= inv;
    mean.style *= inv;
    mean.tv *= inv;
    mean.temporal_feature *= inv;
    mean.temporal_output *= inv;
    mean.total *= inv;
    auto params = net_.parameters();
    if (config_.batch_size > 1) {
        const float scale = static_cast<float>(inv);
        for (auto& [name, p] : params)
            for (auto& g : p.grad()) g *= scale;
    }
    adam_step(params, adam_, config_.learning_rate);
    return mean;
}

void Trainer::save_state(const std::string& model_path, const std::string& state_path) {
    std::vector<std::pair<std::string, std::string>> meta = config_.items();
    meta.emplace_back("step", std::to_string(adam_.step));
    meta.emplace_back("config_hash", config_.config_hash());
    write_checkpoint_file(model_path, save_model(net_, meta));

    Checkpoint state;
    for (auto& [name, mv] : adam_.moments) {
        CheckpointEntry m{"adam.m." + name, {static_cast<int>(mv.first.size())}, mv.first};
        CheckpointEntry v{"adam.v." + name, {static_cast<int>(mv.second.size())}, mv.second};
        state.layers.push_back(std::move(m));
        state.layers.push_back(std::move(v));
    }
    state.set_meta("format", "reconet-train-state");
    state.set_meta("step", std::to_string(adam_.step));
    std::ostringstream rng_os;
    rng_os << rng_;
    state.set_meta("rng", rng_os.str());
    state.set_meta("cursor", std::to_string(cursor_));
    std::ostringstream order_os;
    for (std::size_t i = 0; i < order_.size(); ++i) order_os << (i ? " " : "") << order_[i];
    state.set_meta("order", order_os.str());
    write_checkpoint_file(state_path, state);
}

void Trainer::load_state(const std::string& model_path, const std::string& state_path) {
    StyleNet<float> loaded = load_model(read_checkpoint_file(model_path));
    auto src = loaded.parameters();
    auto dst = net_.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i].second.data() = src[i].second.data();

    Checkpoint state = read_checkpoint_file(state_path);
    if (state.meta("format") != "reconet-train-state")
        throw std::runtime_error("trainer: '" + state_path + "' is not a training state file");
    adam_.step = std::stol(state.meta("step", "0"));
    adam_.moments.clear();
    for (const auto& l : state.layers) {
        if (l.name.rfind("adam.m.", 0) == 0) adam_.moments[l.name.substr(7)].first = l.data;
        else if (l.name.rfind("adam.v.", 0) == 0) adam_.moments[l.name.substr(7)].second = l.data;
    }
    std::istringstream rng_is(state.meta("rng"));
    rng_is >> rng_;
    cursor_ = static_cast<std::size_t>(std::stol(state.meta("cursor", "0")));
    std::istringstream order_is(state.meta("order"));
    order_.clear();
    int idx;
    while (order_is >> idx) order_.push_back(idx);
    if (order_.size() != samples_.size())
        throw std::runtime_error("trainer: state order does not match dataset size");
}

TrainResult Trainer::run(const std::string& out_dir) {
    fs::create_directories(out_dir);
    fs::path dir(out_dir);
    std::string csv_path = (dir / "loss.csv").string();
    std::ofstream csv(csv_path);
    csv << "step,content,style,tv,temp_f,temp_o,total\n";
    csv.precision(9);

    TrainResult result;
    result.loss_log = csv_path;
    std::string last_model;
    auto checkpoint_name = [&](long s) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "checkpoint_%06ld", s);
        return std::string(buf);
    };
    while (adam_.step < config_.steps) {
        LossBreakdown d = step();
        if (adam_.step == 1) result.first_step = d;
        result.last_step = d;
        csv << adam_.step << "," << d.content << "," << d.style << "," << d.tv << ","
            << d.temporal_feature << "," << d.temporal_output << "," << d.total << "\n";
        csv.flush();
        if (adam_.step % config_.checkpoint_every == 0 || adam_.step == config_.steps) {
            std::string base = (dir / checkpoint_name(adam_.step)).string();
            save_state(base + ".rcnt", base + ".state.rcnt");
            last_model = base + ".rcnt";
        }
    }
    if (last_model.empty()) {
        std::string base = (dir / checkpoint_name(adam_.step)).string();
        save_state(base + ".rcnt", base + ".state.rcnt");
        last_model = base + ".rcnt";
    }
    result.final_checkpoint = last_model;
    return result;
}

}  // namespace reconet
