#include "reconet/evaluation.hpp"

#include "reconet/losses.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace reconet {

void SceneSequence::validate() const {
    if (frames.size() < 2) throw std::invalid_argument("scene: needs at least 2 frames");
    if (flows.size() != frames.size() - 1 || masks.size() != frames.size() - 1)
        throw std::invalid_argument("scene: " + std::to_string(frames.size()) + " frames need " +
                                    std::to_string(frames.size() - 1) + " flows/masks, got " +
                                    std::to_string(flows.size()) + "/" + std::to_string(masks.size()));
    const auto& shape = frames[0].shape();
    for (const auto& f : frames)
        if (f.shape() != shape)
            throw std::invalid_argument("scene: frame resolution mismatch");
    for (std::size_t i = 0; i < flows.size(); ++i)
        if (flows[i].width != shape[2] || flows[i].height != shape[1] ||
            masks[i].width != shape[2] || masks[i].height != shape[1])
            throw std::invalid_argument("scene: flow/mask resolution mismatch at transition " +
                                        std::to_string(i));
}

double e_stab(const SceneSequence& seq) {
    seq.validate();
    const int c = seq.frames[0].dim(0), h = seq.frames[0].dim(1), w = seq.frames[0].dim(2);
    const double inv_d = 1.0 / (static_cast<double>(h) * w);
    double acc = 0;
    for (std::size_t t = 1; t < seq.frames.size(); ++t) {
        Tensor<float> warped = warp(seq.frames[t - 1], seq.flows[t - 1]);
        const auto& mask = seq.masks[t - 1];
        double term = 0;
        for (int ci = 0; ci < c; ++ci) {
            const float* cur = seq.frames[t].data().data() + static_cast<std::size_t>(ci) * h * w;
            const float* prev = warped.data().data() + static_cast<std::size_t>(ci) * h * w;
            for (std::size_t p = 0; p < static_cast<std::size_t>(h) * w; ++p)
                if (mask.values[p]) {
                    double d = static_cast<double>(cur[p]) - prev[p];
                    term += d * d;
                }
        }
        acc += term * inv_d;
    }
    return std::sqrt(acc / static_cast<double>(seq.frames.size() - 1));
}

HistogramReport warp_error_histogram(const SceneSequence& seq, const std::string& colorspace,
                                     int bins) {
    seq.validate();
    if (bins < 1) throw std::invalid_argument("histogram: bins must be >= 1");
    if (colorspace != "RGB" && colorspace != "XYZ")
        throw std::invalid_argument("histogram: colorspace must be RGB or XYZ");
    if (seq.frames[0].dim(0) != 3) throw std::invalid_argument("histogram: frames must be [3,H,W]");

    HistogramReport report;
    report.colorspace = colorspace;
    report.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i)
        report.bin_edges[static_cast<std::size_t>(i)] = static_cast<double>(i) / bins;
    report.counts.assign(3, std::vector<std::uint64_t>(static_cast<std::size_t>(bins), 0));

    const int h = seq.frames[0].dim(1), w = seq.frames[0].dim(2);
    for (std::size_t t = 1; t < seq.frames.size(); ++t) {
        Tensor<float> cur = seq.frames[t];
        Tensor<float> prev = warp(seq.frames[t - 1], seq.flows[t - 1]);
        if (colorspace == "XYZ") {
            cur = rgb_to_xyz(cur);
            prev = rgb_to_xyz(prev);
        }
        const auto& mask = seq.masks[t - 1];
        for (int ci = 0; ci < 3; ++ci) {
            const float* a = cur.data().data() + static_cast<std::size_t>(ci) * h * w;
            const float* b = prev.data().data() + static_cast<std::size_t>(ci) * h * w;
            for (std::size_t p = 0; p < static_cast<std::size_t>(h) * w; ++p) {
                if (!mask.values[p]) continue;
                double err = std::fabs(static_cast<double>(a[p]) - b[p]);
                int bin = static_cast<int>(err * bins);
                if (bin >= bins) bin = bins - 1;  // clamp overflow into the last bin
                ++report.counts[static_cast<std::size_t>(ci)][static_cast<std::size_t>(bin)];
            }
        }
        for (std::size_t p = 0; p < mask.count(); ++p)
            if (mask.values[p]) ++report.masked_pixels;
    }
    return report;
}

std::string HistogramReport::to_csv() const {
    std::ostringstream os;
    os << "bin_lo,bin_hi,count_R,count_G,count_B\n";
    for (std::size_t i = 0; i + 1 < bin_edges.size(); ++i)
        os << bin_edges[i] << "," << bin_edges[i + 1] << "," << counts[0][i] << "," << counts[1][i]
           << "," << counts[2][i] << "\n";
    return os.str();
}

std::vector<ErrorMapPair> temporal_error_maps(const SceneSequence& outputs,
                                              const SceneSequence& inputs, double err_scale) {
    outputs.validate();
    inputs.validate();
    if (outputs.frames.size() != inputs.frames.size())
        throw std::invalid_argument("error maps: output frame count " +
                                    std::to_string(outputs.frames.size()) + " != input count " +
                                    std::to_string(inputs.frames.size()));
    const int h = outputs.frames[0].dim(1), w = outputs.frames[0].dim(2);
    const float scale = static_cast<float>(1.0 / err_scale);

    std::vector<ErrorMapPair> maps;
    for (std::size_t t = 1; t < outputs.frames.size(); ++t) {
        Tensor<float> d_o = sub(outputs.frames[t], warp(outputs.frames[t - 1], outputs.flows[t - 1]));
        Tensor<float> d_i_y =
            relative_luminance(sub(inputs.frames[t], warp(inputs.frames[t - 1], inputs.flows[t - 1])));
        Tensor<float> d_o_y = relative_luminance(d_o);
        const auto& mask = outputs.masks[t - 1];

        ErrorMapPair pair;
        pair.total = Image::zeros(w, h, 1);
        pair.luminance = Image::zeros(w, h, 1);
        for (std::size_t p = 0; p < static_cast<std::size_t>(h) * w; ++p) {
            if (!mask.values[p]) continue;  // occluded pixels stay exactly 0
            float total = 0;
            for (int ci = 0; ci < 3; ++ci)
                total += std::fabs(d_o.data()[static_cast<std::size_t>(ci) * h * w + p]);
            pair.total.data[p] = std::min(1.0f, total * scale);
            pair.luminance.data[p] =
                std::min(1.0f, std::fabs(d_o_y.data()[p] - d_i_y.data()[p]) * scale);
        }
        maps.push_back(std::move(pair));
    }
    return maps;
}

namespace {

std::string hardware_descriptor() {
    std::string model = "unknown-cpu";
    std::ifstream cpuinfo("/proc/cpuinfo");
    std::string line;
    while (std::getline(cpuinfo, line)) {
        if (line.rfind("model name", 0) == 0) {
            std::size_t colon = line.find(':');
            if (colon != std::string::npos) {
                model = line.substr(colon + 1);
                std::size_t start = model.find_first_not_of(' ');
                if (start != std::string::npos) model = model.substr(start);
            }
            break;
        }
    }
    return model + " (" + std::to_string(std::thread::hardware_concurrency()) + " threads)";
}

}  // namespace

FpsReport fps_benchmark(const StyleNet<float>& net, int width, int height, int warmup_iters,
                        int timed_iters) {
    if (timed_iters < 1) throw std::invalid_argument("benchmark: timed_iters must be >= 1");
    FpsReport report;
    report.width = width;
    report.height = height;
    report.warmup_iters = warmup_iters;
    report.timed_iters = timed_iters;
    report.hardware = hardware_descriptor();

    std::mt19937 rng(42);
    std::vector<float> data(static_cast<std::size_t>(3) * height * width);
    for (auto& v : data) v = static_cast<float>(rng() >> 8) * (1.0f / 16777216.0f);
    Tensor<float> frame = Tensor<float>::from_data({3, height, width}, std::move(data));

    for (int i = 0; i < warmup_iters; ++i) (void)net.stylize(frame);
    report.samples_ms.reserve(static_cast<std::size_t>(timed_iters));
    for (int i = 0; i < timed_iters; ++i) {
        auto start = std::chrono::steady_clock::now();
        (void)net.stylize(frame);
        auto end = std::chrono::steady_clock::now();
        report.samples_ms.push_back(
            std::chrono::duration<double, std::milli>(end - start).count());
    }
    std::vector<double> sorted = report.samples_ms;
    std::sort(sorted.begin(), sorted.end());
    report.median_ms = sorted[sorted.size() / 2];
    report.mean_ms = 0;
    for (double v : sorted) report.mean_ms += v;
    report.mean_ms /= static_cast<double>(sorted.size());
    report.fps = 1000.0 / report.mean_ms;
    return report;
}

std::string FpsReport::to_text() const {
    std::ostringstream os;
    os << "resolution=" << width << "x" << height << "\n"
       << "warmup_iters=" << warmup_iters << "\n"
       << "timed_iters=" << timed_iters << "\n"
       << "hardware=" << hardware << "\n"
       << "mean_ms=" << mean_ms << "\n"
       << "median_ms=" << median_ms << "\n"
       << "fps=" << fps << "\n";
    return os.str();
}

}  // namespace reconet
