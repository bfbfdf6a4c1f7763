// reconet command-line front end: train, stylize, eval, flow, bench.

#include <CLI11.hpp>

#include "reconet/checkpoint.hpp"
#include "reconet/evaluation.hpp"
#include "reconet/training.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;
using namespace reconet;

namespace {

std::string frame_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d", index);
    return buf;
}

void write_manifest(const std::string& out_dir,
                    const std::vector<std::pair<std::string, std::string>>& items) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "run-manifest.txt");
    if (!out) throw std::runtime_error("cannot write run-manifest under " + out_dir);
    for (const auto& [k, v] : items) out << k << "=" << v << "\n";
}

// Numerically ordered frame_%04d.png paths in a directory.
std::vector<std::string> list_frames(const std::string& dir) {
    std::vector<std::string> out;
    for (int i = 0;; ++i) {
        fs::path p = fs::path(dir) / (frame_name(i) + ".png");
        if (!fs::exists(p)) {
            if (i > 0 || !out.empty()) break;
            // allow sequences that start at index 1
            continue;
        }
        out.push_back(p.string());
        if (i > 99999) break;
    }
    return out;
}

SceneSequence load_sequence(const std::string& frames_dir, const std::string& flows_dir,
                            const std::string& masks_dir, bool sampling_flows) {
    SceneSequence seq;
    auto frames = list_frames(frames_dir);
    if (frames.size() < 2)
        throw std::runtime_error("sequence: found " + std::to_string(frames.size()) +
                                 " frames under " + frames_dir + ", need at least 2");
    for (const auto& f : frames) seq.frames.push_back(read_png(f).as_tensor<float>());
    for (std::size_t t = 1; t < frames.size(); ++t) {
        fs::path flo = fs::path(flows_dir) / (frame_name(static_cast<int>(t)) + ".flo");
        if (!fs::exists(flo)) throw std::runtime_error("sequence: missing " + flo.string());
        FlowField flow = read_flo_file(flo.string());
        seq.flows.push_back(sampling_flows ? flow : flow.negated());

        fs::path mask_png = fs::path(masks_dir) / (frame_name(static_cast<int>(t)) + ".png");
        fs::path mask_pgm = fs::path(masks_dir) / (frame_name(static_cast<int>(t)) + ".pgm");
        fs::path mask = fs::exists(mask_png) ? mask_png : mask_pgm;
        if (!fs::exists(mask)) throw std::runtime_error("sequence: missing " + mask_png.string());
        Image im = read_image(mask.string());
        OcclusionMask m = OcclusionMask::filled(im.width, im.height, 0);
        for (std::size_t i = 0; i < m.count(); ++i) m.values[i] = im.data[i] >= 0.5f ? 1 : 0;
        seq.masks.push_back(std::move(m));
    }
    return seq;
}

int run_train(const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& out_dir, const std::string& resume) {
    TrainConfig config = TrainConfig::from_file(config_path);
    for (const auto& kv : overrides) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("--set expects key=value, got '" + kv + "'");
        config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    config.validate();

    auto manifest = config.items();
    manifest.emplace_back("command", "train");
    manifest.emplace_back("config_hash", config.config_hash());
    write_manifest(out_dir, manifest);

    Trainer trainer(config);
    if (!resume.empty()) {
        std::string state = resume;
        std::size_t ext = state.rfind(".rcnt");
        if (ext == std::string::npos) throw std::runtime_error("--resume expects a .rcnt checkpoint");
        state = state.substr(0, ext) + ".state.rcnt";
        trainer.load_state(resume, state);
        std::cerr << "resumed from " << resume << " at step " << trainer.current_step() << "\n";
    }
    TrainResult result = trainer.run(out_dir);
    std::cout << "final checkpoint: " << result.final_checkpoint << "\n"
              << "loss log: " << result.loss_log << "\n";
    return 0;
}

int run_stylize(const std::string& checkpoint_path, const std::string& frames_dir,
                const std::string& out_dir) {
    StyleNet<float> net = load_model(read_checkpoint_file(checkpoint_path));
    auto frames = list_frames(frames_dir);
    if (frames.empty()) throw std::runtime_error("stylize: no frame_%04d.png files in " + frames_dir);

    write_manifest(out_dir, {{"command", "stylize"},
                             {"checkpoint", checkpoint_path},
                             {"frames", frames_dir},
                             {"frame_count", std::to_string(frames.size())}});

    unsigned workers = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("RECONET_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) workers = static_cast<unsigned>(n);
    }
    if (workers > frames.size()) workers = static_cast<unsigned>(frames.size());
    if (workers < 1) workers = 1;

    std::atomic<std::size_t> next{0};
    std::atomic<int> skipped{0};
    std::mutex log_mutex;
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= frames.size()) return;
            try {
                Image in = read_png(frames[i]);
                if (in.channels != 3) throw std::runtime_error("not an RGB frame");
                if (in.width % 4 != 0 || in.height % 4 != 0)
                    throw std::runtime_error("resolution not divisible by 4");
                Tensor<float> out = net.stylize(in.as_tensor<float>());
                fs::path name = fs::path(frames[i]).filename();
                write_png((fs::path(out_dir) / name).string(), Image::from_tensor(out));
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(log_mutex);
                std::cerr << "warning: skipped " << frames[i] << ": " << e.what() << "\n";
                ++skipped;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::cout << "stylized " << (frames.size() - static_cast<std::size_t>(skipped.load()))
              << " frames to " << out_dir << "\n";
    return skipped.load() > 0 ? 1 : 0;
}

int run_eval_estab(const std::string& frames, const std::string& flows, const std::string& masks,
                   const std::string& out_dir, bool sampling_flows) {
    SceneSequence seq = load_sequence(frames, flows, masks, sampling_flows);
    double value = e_stab(seq);
    write_manifest(out_dir, {{"command", "eval estab"},
                             {"frames", frames},
                             {"flows", flows},
                             {"masks", masks},
                             {"frame_count", std::to_string(seq.frames.size())}});
    std::ofstream report(fs::path(out_dir) / "estab.txt");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    report << "e_stab=" << buf << "\n";
    std::cout << buf << "\n";
    return 0;
}

int run_eval_hist(const std::string& frames, const std::string& flows, const std::string& masks,
                  const std::string& out_dir, const std::string& colorspace, int bins,
                  bool sampling_flows) {
    SceneSequence seq = load_sequence(frames, flows, masks, sampling_flows);
    std::string cs = colorspace == "xyz" ? "XYZ" : "RGB";
    HistogramReport report = warp_error_histogram(seq, cs, bins);
    write_manifest(out_dir, {{"command", "eval hist"},
                             {"frames", frames},
                             {"colorspace", cs},
                             {"bins", std::to_string(bins)}});
    std::ofstream csv(fs::path(out_dir) / "histogram.csv");
    csv << report.to_csv();
    std::ofstream txt(fs::path(out_dir) / "histogram.txt");
    txt << "colorspace=" << report.colorspace << "\n"
        << "bins=" << bins << "\n"
        << "masked_pixels=" << report.masked_pixels << "\n";
    std::cout << "colorspace=" << report.colorspace << " masked_pixels=" << report.masked_pixels
              << "\n";
    return 0;
}

int run_eval_maps(const std::string& outputs, const std::string& inputs, const std::string& flows,
                  const std::string& masks, const std::string& out_dir, double err_scale,
                  bool sampling_flows) {
    SceneSequence out_seq = load_sequence(outputs, flows, masks, sampling_flows);
    SceneSequence in_seq = load_sequence(inputs, flows, masks, sampling_flows);
    auto maps = temporal_error_maps(out_seq, in_seq, err_scale);
    write_manifest(out_dir, {{"command", "eval maps"},
                             {"outputs", outputs},
                             {"inputs", inputs},
                             {"err_scale", std::to_string(err_scale)}});
    char scale_tag[32];
    std::snprintf(scale_tag, sizeof(scale_tag), "scale%.2f", err_scale);
    for (std::size_t t = 0; t < maps.size(); ++t) {
        std::string base = frame_name(static_cast<int>(t + 1));
        write_png((fs::path(out_dir) / (base + "_total_" + scale_tag + ".png")).string(),
                  maps[t].total);
        write_png((fs::path(out_dir) / (base + "_luminance_" + scale_tag + ".png")).string(),
                  maps[t].luminance);
    }
    std::cout << "wrote " << 2 * maps.size() << " error maps to " << out_dir << "\n";
    return 0;
}

int run_flow_info(const std::string& path, const std::string& out_dir) {
    FlowField flow = read_flo_file(path);
    double min_mag = 1e300, max_mag = 0;
    for (std::size_t i = 0; i < flow.count(); ++i) {
        double m = std::sqrt(static_cast<double>(flow.dx[i]) * flow.dx[i] +
                             static_cast<double>(flow.dy[i]) * flow.dy[i]);
        min_mag = std::min(min_mag, m);
        max_mag = std::max(max_mag, m);
    }
    write_manifest(out_dir, {{"command", "flow info"}, {"input", path}});
    std::cout << flow.width << "x" << flow.height << "\n"
              << "min_magnitude=" << min_mag << "\n"
              << "max_magnitude=" << max_mag << "\n";
    return 0;
}

int run_flow_occlusion(const std::string& fwd, const std::string& bwd, const std::string& out_dir,
                       const OcclusionParams& params) {
    OcclusionMask mask = occlusion_mask(read_flo_file(fwd), read_flo_file(bwd), params);
    write_manifest(out_dir, {{"command", "flow occlusion"},
                             {"fwd", fwd},
                             {"bwd", bwd},
                             {"c1", std::to_string(params.c1)},
                             {"c2", std::to_string(params.c2)},
                             {"motion_boundaries", params.motion_boundaries ? "1" : "0"}});
    Image im = Image::zeros(mask.width, mask.height, 1);
    for (std::size_t i = 0; i < mask.count(); ++i) im.data[i] = mask.values[i] ? 1.0f : 0.0f;
    write_png((fs::path(out_dir) / "mask.png").string(), im);
    std::cout << "wrote " << (fs::path(out_dir) / "mask.png").string() << "\n";
    return 0;
}

int run_flow_downscale(const std::string& flow_path, const std::string& mask_path, int factor,
                       const std::string& out_dir) {
    FlowField flow = read_flo_file(flow_path);
    Image mask_im = read_image(mask_path);
    OcclusionMask mask = OcclusionMask::filled(mask_im.width, mask_im.height, 0);
    for (std::size_t i = 0; i < mask.count(); ++i) mask.values[i] = mask_im.data[i] >= 0.5f ? 1 : 0;
    auto [flow_ds, mask_ds] = downscale_flow(flow, mask, factor);
    write_manifest(out_dir, {{"command", "flow downscale"},
                             {"flow", flow_path},
                             {"mask", mask_path},
                             {"factor", std::to_string(factor)}});
    write_flo_file((fs::path(out_dir) / "flow.flo").string(), flow_ds);
    Image out_im = Image::zeros(mask_ds.width, mask_ds.height, 1);
    for (std::size_t i = 0; i < mask_ds.count(); ++i)
        out_im.data[i] = mask_ds.values[i] ? 1.0f : 0.0f;
    write_png((fs::path(out_dir) / "mask.png").string(), out_im);
    std::cout << flow_ds.width << "x" << flow_ds.height << "\n";
    return 0;
}

int run_bench(const std::string& checkpoint_path, const std::string& resolution, int warmup,
              int iters, const std::string& out_dir) {
    std::size_t x = resolution.find('x');
    if (x == std::string::npos) throw std::runtime_error("bench: resolution must be WIDTHxHEIGHT");
    int w = std::stoi(resolution.substr(0, x));
    int h = std::stoi(resolution.substr(x + 1));
    StyleNet<float> net = load_model(read_checkpoint_file(checkpoint_path));
    FpsReport report = fps_benchmark(net, w, h, warmup, iters);
    write_manifest(out_dir, {{"command", "bench"},
                             {"checkpoint", checkpoint_path},
                             {"resolution", resolution},
                             {"warmup", std::to_string(warmup)},
                             {"iters", std::to_string(iters)}});
    std::ofstream txt(fs::path(out_dir) / "bench.txt");
    txt << report.to_text();
    std::cout << report.to_text();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reconet: coherent video style transfer toolkit"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "train a stylization model");
    std::string cfg_path, out_dir = "out", resume;
    std::vector<std::string> overrides;
    train->add_option("--config", cfg_path, "key=value config file")->required();
    train->add_option("--out", out_dir, "output directory");
    train->add_option("--set", overrides, "config override key=value (repeatable)");
    train->add_option("--resume", resume, "model checkpoint to resume from");
    int steps_override = -1;
    train->add_option("--steps", steps_override, "override the configured step count");

    // stylize
    auto* stylize = app.add_subcommand("stylize", "stylize a frame directory");
    std::string ckpt, frames_dir;
    stylize->add_option("--checkpoint", ckpt, "model checkpoint")->required();
    stylize->add_option("--frames", frames_dir, "input frame directory")->required();
    stylize->add_option("--out", out_dir, "output directory");

    // eval
    auto* eval = app.add_subcommand("eval", "temporal-stability evaluation");
    eval->require_subcommand(1);
    std::string flows_dir, masks_dir, inputs_dir, colorspace = "rgb";
    int bins = 64;
    double err_scale = 0.5;
    bool sampling_flows = false;
    auto* estab = eval->add_subcommand("estab", "temporal stability metric");
    estab->add_option("--frames", frames_dir)->required();
    estab->add_option("--flows", flows_dir)->required();
    estab->add_option("--masks", masks_dir)->required();
    estab->add_option("--out", out_dir);
    estab->add_flag("--sampling-flows", sampling_flows,
                    "flows already use the pull-sampling convention");
    auto* hist = eval->add_subcommand("hist", "warp-error histogram");
    hist->add_option("--frames", frames_dir)->required();
    hist->add_option("--flows", flows_dir)->required();
    hist->add_option("--masks", masks_dir)->required();
    hist->add_option("--out", out_dir);
    hist->add_option("--colorspace", colorspace)->check(CLI::IsMember({"rgb", "xyz"}));
    hist->add_option("--bins", bins);
    hist->add_flag("--sampling-flows", sampling_flows);
    auto* maps = eval->add_subcommand("maps", "temporal error maps");
    maps->add_option("--outputs", frames_dir)->required();
    maps->add_option("--inputs", inputs_dir)->required();
    maps->add_option("--flows", flows_dir)->required();
    maps->add_option("--masks", masks_dir)->required();
    maps->add_option("--out", out_dir);
    maps->add_option("--err-scale", err_scale);
    maps->add_flag("--sampling-flows", sampling_flows);

    // flow
    auto* flow = app.add_subcommand("flow", "flow/mask utilities");
    flow->require_subcommand(1);
    std::string flo_path, fwd_path, bwd_path, mask_path;
    int factor = 4;
    OcclusionParams occ;
    auto* info = flow->add_subcommand("info", "print .flo dimensions and magnitude range");
    info->add_option("file", flo_path)->required();
    info->add_option("--out", out_dir);
    auto* occl = flow->add_subcommand("occlusion", "mask from forward/backward flow pair");
    occl->add_option("--fwd", fwd_path)->required();
    occl->add_option("--bwd", bwd_path)->required();
    occl->add_option("--out", out_dir);
    occl->add_option("--c1", occ.c1);
    occl->add_option("--c2", occ.c2);
    occl->add_flag("--motion-boundaries", occ.motion_boundaries);
    auto* down = flow->add_subcommand("downscale", "downscale a flow/mask pair");
    down->add_option("--flow", flo_path)->required();
    down->add_option("--mask", mask_path)->required();
    down->add_option("--factor", factor);
    down->add_option("--out", out_dir);

    // bench
    auto* bench = app.add_subcommand("bench", "per-frame throughput benchmark");
    std::string resolution = "640x360";
    int warmup = 2, iters = 10;
    bench->add_option("--checkpoint", ckpt)->required();
    bench->add_option("--resolution", resolution);
    bench->add_option("--warmup", warmup);
    bench->add_option("--iters", iters);
    bench->add_option("--out", out_dir);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*train) {
            if (steps_override >= 0) overrides.push_back("steps=" + std::to_string(steps_override));
            return run_train(cfg_path, overrides, out_dir, resume);
        }
        if (*stylize) return run_stylize(ckpt, frames_dir, out_dir);
        if (*estab) return run_eval_estab(frames_dir, flows_dir, masks_dir, out_dir, sampling_flows);
        if (*hist)
            return run_eval_hist(frames_dir, flows_dir, masks_dir, out_dir, colorspace, bins,
                                 sampling_flows);
        if (*maps)
            return run_eval_maps(frames_dir, inputs_dir, flows_dir, masks_dir, out_dir, err_scale,
                                 sampling_flows);
        if (*info) return run_flow_info(flo_path, out_dir);
        if (*occl) return run_flow_occlusion(fwd_path, bwd_path, out_dir, occ);
        if (*down) return run_flow_downscale(flo_path, mask_path, factor, out_dir);
        if (*bench) return run_bench(ckpt, resolution, warmup, iters, out_dir);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
