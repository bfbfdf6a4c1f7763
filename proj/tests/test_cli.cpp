#include <doctest.h>

#include "fixtures.hpp"
#include "reconet/checkpoint.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace reconet;

namespace {

int run(const std::string& args, const std::string& log = "") {
    std::string cmd = std::string(RECONET_CLI_PATH) + " " + args;
    if (!log.empty()) cmd += " > " + log + " 2>&1";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::uint8_t> bytes_of(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("flow info prints dimensions; bad magic fails") {
    std::string dir = fixtures::fresh_temp_dir("cli_info");
    write_flo_file(dir + "/a.flo", FlowField::constant(1, 1, 0.5f, -0.25f));
    CHECK(run("flow info " + dir + "/a.flo --out " + dir + "/out", dir + "/log.txt") == 0);
    std::string log = slurp(dir + "/log.txt");
    CHECK(log.find("1x1") != std::string::npos);
    CHECK(fs::exists(dir + "/out/run-manifest.txt"));

    {
        std::ofstream bad(dir + "/bad.flo", std::ios::binary);
        bad << "nonsense bytes here";
    }
    CHECK(run("flow info " + dir + "/bad.flo --out " + dir + "/out2", dir + "/log2.txt") == 1);
    CHECK(slurp(dir + "/log2.txt").find("error:") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("flow occlusion writes an all-traceable mask for consistent flows") {
    std::string dir = fixtures::fresh_temp_dir("cli_occ");
    write_flo_file(dir + "/fwd.flo", FlowField::constant(8, 8, 1, 0));
    write_flo_file(dir + "/bwd.flo", FlowField::constant(8, 8, -1, 0));
    CHECK(run("flow occlusion --fwd " + dir + "/fwd.flo --bwd " + dir + "/bwd.flo --out " + dir +
              "/out", dir + "/log.txt") == 0);
    Image mask = read_png(dir + "/out/mask.png");
    CHECK(mask.width == 8);
    CHECK(mask.channels == 1);
    for (float v : mask.data) CHECK(v == 1.0f);  // 255 in the file
    fs::remove_all(dir);
}

TEST_CASE("flow downscale reduces a full-resolution pair by the factor") {
    std::string dir = fixtures::fresh_temp_dir("cli_down");
    write_flo_file(dir + "/f.flo", FlowField::constant(640, 360, 4, 8));
    Image mask = Image::zeros(640, 360, 1);
    for (auto& v : mask.data) v = 1.0f;
    write_png(dir + "/m.png", mask);
    CHECK(run("flow downscale --flow " + dir + "/f.flo --mask " + dir + "/m.png --factor 4 --out " +
              dir + "/out", dir + "/log.txt") == 0);
    CHECK(slurp(dir + "/log.txt").find("160x90") != std::string::npos);
    FlowField ds = read_flo_file(dir + "/out/flow.flo");
    CHECK(ds.width == 160);
    CHECK(ds.height == 90);
    CHECK(ds.dx[0] == 1.0f);
    CHECK(ds.dy[0] == 2.0f);
    fs::remove_all(dir);
}

TEST_CASE("stylize processes a frame directory deterministically") {
    std::string dir = fixtures::fresh_temp_dir("cli_sty");
    StyleNet<float> net = StyleNet<float>::random(77, false);
    write_checkpoint_file(dir + "/m.rcnt", save_model(net, {{"step", "0"}}));

    fs::create_directories(dir + "/frames");
    auto scene = fixtures::make_translating_scene(3, 16, 16, 1, 0, 5);
    for (int t = 0; t < 3; ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04d.png", t);
        write_png(dir + "/frames/" + name, scene.frames[static_cast<std::size_t>(t)]);
    }

    std::string base = "stylize --checkpoint " + dir + "/m.rcnt --frames " + dir + "/frames";
    CHECK(run(base + " --out " + dir + "/out_a", dir + "/log_a.txt") == 0);
    CHECK(run(base + " --out " + dir + "/out_b", dir + "/log_b.txt") == 0);
    for (int t = 0; t < 3; ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04d.png", t);
        REQUIRE(fs::exists(dir + "/out_a/" + name));
        CHECK(bytes_of(dir + "/out_a/" + name) == bytes_of(dir + "/out_b/" + name));
    }
    CHECK(fs::exists(dir + "/out_a/run-manifest.txt"));

    // a corrupt frame is skipped with a warning and flips the exit code
    {
        std::ofstream bad(dir + "/frames/frame_0003.png", std::ios::binary);
        bad << "not a png";
    }
    CHECK(run(base + " --out " + dir + "/out_c", dir + "/log_c.txt") == 1);
    CHECK(slurp(dir + "/log_c.txt").find("warning: skipped") != std::string::npos);
    CHECK(fs::exists(dir + "/out_c/frame_0002.png"));
    CHECK_FALSE(fs::exists(dir + "/out_c/frame_0003.png"));
    fs::remove_all(dir);
}

TEST_CASE("train surfaces config errors and honors --set/--steps") {
    std::string dir = fixtures::fresh_temp_dir("cli_train");
    auto scene = fixtures::make_translating_scene(3, 16, 16, 1, 0, 9);
    fixtures::write_scene_dataset(dir + "/data", {scene});
    write_png(dir + "/style.png", fixtures::random_image(16, 16, 3));

    {
        std::ofstream cfg(dir + "/train.cfg");
        cfg << "resolution=16x16\n"
            << "backbone=test\n"
            << "batch_size=1\n"
            << "steps=5\n"
            << "hflip_prob=0\n"
            << "style_image=" << dir << "/style.png\n"
            << "dataset=" << dir << "/data\n";
    }

    SUBCASE("missing style image") {
        std::ofstream cfg(dir + "/bad.cfg");
        cfg << "style_image=" << dir << "/nope.png\ndataset=" << dir << "/data\n";
        cfg.close();
        CHECK(run("train --config " + dir + "/bad.cfg --out " + dir + "/out", dir + "/log.txt") ==
              1);
        CHECK(slurp(dir + "/log.txt").find(dir + "/nope.png") != std::string::npos);
    }

    SUBCASE("unknown --set key") {
        CHECK(run("train --config " + dir + "/train.cfg --set bogus=1 --out " + dir + "/out",
                  dir + "/log.txt") == 1);
        CHECK(slurp(dir + "/log.txt").find("bogus") != std::string::npos);
    }

    SUBCASE("one step with overrides") {
        CHECK(run("train --config " + dir + "/train.cfg --steps 1 --set lambda_o=0 --out " + dir +
                  "/out", dir + "/log.txt") == 0);
        std::string manifest = slurp(dir + "/out/run-manifest.txt");
        CHECK(manifest.find("lambda_o=0") != std::string::npos);
        CHECK(manifest.find("steps=1") != std::string::npos);
        CHECK(manifest.find("config_hash=") != std::string::npos);

        std::ifstream csv(dir + "/out/loss.csv");
        int lines = 0;
        std::string line;
        while (std::getline(csv, line))
            if (!line.empty()) ++lines;
        CHECK(lines == 2);  // header + one step
        CHECK(fs::exists(dir + "/out/checkpoint_000001.rcnt"));
        CHECK(fs::exists(dir + "/out/checkpoint_000001.state.rcnt"));
    }
    fs::remove_all(dir);
}

TEST_CASE("eval estab reports zero for an exactly translating scene") {
    std::string dir = fixtures::fresh_temp_dir("cli_estab");
    auto scene = fixtures::make_translating_scene(3, 16, 16, 1, 0, 21);
    fixtures::write_scene_dataset(dir, {scene});
    std::string sc = dir + "/scene_00";
    CHECK(run("eval estab --frames " + sc + " --flows " + sc + "/flow --masks " + sc +
              "/mask --out " + dir + "/out", dir + "/log.txt") == 0);
    CHECK(slurp(dir + "/log.txt").find("0.000000") != std::string::npos);
    CHECK(slurp(dir + "/out/estab.txt").find("e_stab=0.000000") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("eval hist tags the requested colorspace") {
    std::string dir = fixtures::fresh_temp_dir("cli_hist");
    auto scene = fixtures::make_translating_scene(3, 16, 16, 1, 0, 23);
    fixtures::write_scene_dataset(dir, {scene});
    std::string sc = dir + "/scene_00";
    CHECK(run("eval hist --frames " + sc + " --flows " + sc + "/flow --masks " + sc +
              "/mask --colorspace xyz --bins 8 --out " + dir + "/out", dir + "/log.txt") == 0);
    CHECK(slurp(dir + "/out/histogram.txt").find("colorspace=XYZ") != std::string::npos);
    std::string csv = slurp(dir + "/out/histogram.csv");
    CHECK(csv.find("bin_lo,bin_hi,count_R,count_G,count_B") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("eval maps writes two PNGs per transition") {
    std::string dir = fixtures::fresh_temp_dir("cli_maps");
    auto scene = fixtures::make_translating_scene(3, 16, 16, 1, 0, 25);
    fixtures::write_scene_dataset(dir, {scene});
    std::string sc = dir + "/scene_00";
    CHECK(run("eval maps --outputs " + sc + " --inputs " + sc + " --flows " + sc +
              "/flow --masks " + sc + "/mask --out " + dir + "/out", dir + "/log.txt") == 0);
    CHECK(fs::exists(dir + "/out/frame_0001_total_scale0.50.png"));
    CHECK(fs::exists(dir + "/out/frame_0001_luminance_scale0.50.png"));
    CHECK(fs::exists(dir + "/out/frame_0002_total_scale0.50.png"));
    CHECK(fs::exists(dir + "/out/frame_0002_luminance_scale0.50.png"));
    fs::remove_all(dir);
}

TEST_CASE("bench writes a throughput report") {
    std::string dir = fixtures::fresh_temp_dir("cli_bench");
    StyleNet<float> net = StyleNet<float>::random(31, false);
    write_checkpoint_file(dir + "/m.rcnt", save_model(net, {}));
    CHECK(run("bench --checkpoint " + dir + "/m.rcnt --resolution 16x16 --warmup 0 --iters 1 "
              "--out " + dir + "/out", dir + "/log.txt") == 0);
    std::string txt = slurp(dir + "/out/bench.txt");
    CHECK(txt.find("resolution=16x16") != std::string::npos);
    CHECK(txt.find("fps=") != std::string::npos);
    CHECK(txt.find("hardware=") != std::string::npos);
    fs::remove_all(dir);
}
