#include "reconet/flow.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace reconet {

bool& finite_check_enabled() {
    static bool enabled = false;
    return enabled;
}

FlowField FlowField::constant(int width, int height, float cdx, float cdy) {
    FlowField f;
    f.width = width;
    f.height = height;
    f.dx.assign(f.count(), cdx);
    f.dy.assign(f.count(), cdy);
    return f;
}

void FlowField::validate() const {
    if (dx.size() != count() || dy.size() != count())
        throw std::runtime_error("flow: vector buffers do not match " + std::to_string(width) + "x" +
                                 std::to_string(height));
    for (std::size_t i = 0; i < count(); ++i) {
        if (!std::isfinite(dx[i]) || !std::isfinite(dy[i]))
            throw std::runtime_error("flow: non-finite vector at pixel " + std::to_string(i));
        if (std::fabs(dx[i]) > static_cast<float>(width) ||
            std::fabs(dy[i]) > static_cast<float>(height))
            throw std::runtime_error("flow: vector exceeds frame size at pixel " + std::to_string(i));
    }
}

FlowField FlowField::negated() const {
    FlowField f = *this;
    for (auto& v : f.dx) v = -v;
    for (auto& v : f.dy) v = -v;
    return f;
}

OcclusionMask OcclusionMask::filled(int width, int height, std::uint8_t v) {
    OcclusionMask m;
    m.width = width;
    m.height = height;
    m.values.assign(m.count(), v);
    return m;
}

namespace {

constexpr float kFloMagic = 202021.25f;  // "PIEH" when read as ASCII

float read_f32_le(const std::uint8_t* p) {
    std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                      (static_cast<std::uint32_t>(p[2]) << 16) |
                      (static_cast<std::uint32_t>(p[3]) << 24);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

std::int32_t read_i32_le(const std::uint8_t* p) {
    std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                      (static_cast<std::uint32_t>(p[2]) << 16) |
                      (static_cast<std::uint32_t>(p[3]) << 24);
    std::int32_t i;
    std::memcpy(&i, &u, 4);
    return i;
}

void append_f32_le(std::vector<std::uint8_t>& out, float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    out.push_back(static_cast<std::uint8_t>(u & 0xff));
    out.push_back(static_cast<std::uint8_t>((u >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((u >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((u >> 24) & 0xff));
}

void append_i32_le(std::vector<std::uint8_t>& out, std::int32_t i) {
    std::uint32_t u;
    std::memcpy(&u, &i, 4);
    out.push_back(static_cast<std::uint8_t>(u & 0xff));
    out.push_back(static_cast<std::uint8_t>((u >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((u >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((u >> 24) & 0xff));
}

}  // namespace

FlowField read_flo(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 12) throw std::runtime_error("flo: unexpected end of data");
    if (read_f32_le(bytes.data()) != kFloMagic) throw std::runtime_error("flo: not a flow file");
    std::int32_t w = read_i32_le(bytes.data() + 4);
    std::int32_t h = read_i32_le(bytes.data() + 8);
    if (w <= 0 || h <= 0) throw std::runtime_error("flo: invalid dimensions");
    std::size_t need = 12 + static_cast<std::size_t>(w) * h * 8;
    if (bytes.size() < need) throw std::runtime_error("flo: unexpected end of data");
    FlowField f;
    f.width = w;
    f.height = h;
    f.dx.resize(f.count());
    f.dy.resize(f.count());
    const std::uint8_t* p = bytes.data() + 12;
    for (std::size_t i = 0; i < f.count(); ++i) {
        f.dx[i] = read_f32_le(p);
        f.dy[i] = read_f32_le(p + 4);
        p += 8;
    }
    return f;
}

std::vector<std::uint8_t> write_flo(const FlowField& flow) {
    std::vector<std::uint8_t> out;
    out.reserve(12 + flow.count() * 8);
    append_f32_le(out, kFloMagic);
    append_i32_le(out, flow.width);
    append_i32_le(out, flow.height);
    for (std::size_t i = 0; i < flow.count(); ++i) {
        append_f32_le(out, flow.dx[i]);
        append_f32_le(out, flow.dy[i]);
    }
    return out;
}

FlowField read_flo_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("flo: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return read_flo(bytes);
}

void write_flo_file(const std::string& path, const FlowField& flow) {
    auto bytes = write_flo(flow);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("flo: cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace {

// Bilinear sample of a flow field at a fractional location, border-clamped.
void sample_flow(const FlowField& f, float x, float y, float& out_dx, float& out_dy) {
    if (x < 0) x = 0;
    if (x > static_cast<float>(f.width - 1)) x = static_cast<float>(f.width - 1);
    if (y < 0) y = 0;
    if (y > static_cast<float>(f.height - 1)) y = static_cast<float>(f.height - 1);
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    int x1 = x0 + 1 < f.width ? x0 + 1 : f.width - 1;
    int y1 = y0 + 1 < f.height ? y0 + 1 : f.height - 1;
    float fx = x - static_cast<float>(x0);
    float fy = y - static_cast<float>(y0);
    auto at = [&](const std::vector<float>& v, int yy, int xx) {
        return v[static_cast<std::size_t>(yy) * f.width + xx];
    };
    out_dx = (1 - fx) * (1 - fy) * at(f.dx, y0, x0) + fx * (1 - fy) * at(f.dx, y0, x1) +
             (1 - fx) * fy * at(f.dx, y1, x0) + fx * fy * at(f.dx, y1, x1);
    out_dy = (1 - fx) * (1 - fy) * at(f.dy, y0, x0) + fx * (1 - fy) * at(f.dy, y0, x1) +
             (1 - fx) * fy * at(f.dy, y1, x0) + fx * fy * at(f.dy, y1, x1);
}

}  // namespace

OcclusionMask occlusion_mask(const FlowField& flow_fwd, const FlowField& flow_bwd,
                             const OcclusionParams& params) {
    if (flow_fwd.width != flow_bwd.width || flow_fwd.height != flow_bwd.height)
        throw std::runtime_error("occlusion_mask: flow size mismatch " +
                                 std::to_string(flow_fwd.width) + "x" + std::to_string(flow_fwd.height) +
                                 " vs " + std::to_string(flow_bwd.width) + "x" +
                                 std::to_string(flow_bwd.height));
    const int w = flow_fwd.width, h = flow_fwd.height;
    OcclusionMask mask = OcclusionMask::filled(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::size_t p = static_cast<std::size_t>(y) * w + x;
            float bx = flow_bwd.dx[p], by = flow_bwd.dy[p];
            float fx, fy;
            sample_flow(flow_fwd, static_cast<float>(x) + bx, static_cast<float>(y) + by, fx, fy);
            float sum2 = (bx + fx) * (bx + fx) + (by + fy) * (by + fy);
            float mag2 = bx * bx + by * by + fx * fx + fy * fy;
            if (sum2 > params.c1 * mag2 + params.c2) {
                mask.values[p] = 0;
                continue;
            }
            if (params.motion_boundaries) {
                int xr = x + 1 < w ? x + 1 : x;
                int yd = y + 1 < h ? y + 1 : y;
                std::size_t pr = static_cast<std::size_t>(y) * w + xr;
                std::size_t pd = static_cast<std::size_t>(yd) * w + x;
                float gx_u = flow_bwd.dx[pr] - bx, gy_u = flow_bwd.dx[pd] - bx;
                float gx_v = flow_bwd.dy[pr] - by, gy_v = flow_bwd.dy[pd] - by;
                float grad2 = gx_u * gx_u + gy_u * gy_u + gx_v * gx_v + gy_v * gy_v;
                if (grad2 > params.b1 * (bx * bx + by * by) + params.b2) mask.values[p] = 0;
            }
        }
    return mask;
}

std::pair<FlowField, OcclusionMask> downscale_flow(const FlowField& flow, const OcclusionMask& mask,
                                                   int factor) {
    if (factor <= 0 || flow.width % factor != 0 || flow.height % factor != 0)
        throw std::runtime_error("downscale_flow: factor " + std::to_string(factor) +
                                 " does not divide " + std::to_string(flow.width) + "x" +
                                 std::to_string(flow.height));
    if (mask.width != flow.width || mask.height != flow.height)
        throw std::runtime_error("downscale_flow: mask size mismatch");
    const int w = flow.width / factor, h = flow.height / factor;
    FlowField out_flow;
    out_flow.width = w;
    out_flow.height = h;
    out_flow.dx.resize(out_flow.count());
    out_flow.dy.resize(out_flow.count());
    OcclusionMask out_mask = OcclusionMask::filled(w, h, 1);
    const float inv = 1.0f / (static_cast<float>(factor) * factor * factor);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            float sx = 0, sy = 0;
            std::uint8_t m = 1;
            for (int by = 0; by < factor; ++by)
                for (int bx = 0; bx < factor; ++bx) {
                    std::size_t p =
                        static_cast<std::size_t>(y * factor + by) * flow.width + (x * factor + bx);
                    sx += flow.dx[p];
                    sy += flow.dy[p];
                    if (mask.values[p] == 0) m = 0;
                }
            std::size_t q = static_cast<std::size_t>(y) * w + x;
            // mean over the block, then vectors rescaled with resolution
            out_flow.dx[q] = sx * inv;
            out_flow.dy[q] = sy * inv;
            out_mask.values[q] = m;
        }
    return {out_flow, out_mask};
}

FlowField flip_horizontal(const FlowField& flow) {
    FlowField out;
    out.width = flow.width;
    out.height = flow.height;
    out.dx.resize(flow.count());
    out.dy.resize(flow.count());
    for (int y = 0; y < flow.height; ++y)
        for (int x = 0; x < flow.width; ++x) {
            std::size_t src = static_cast<std::size_t>(y) * flow.width + (flow.width - 1 - x);
            std::size_t dst = static_cast<std::size_t>(y) * flow.width + x;
            out.dx[dst] = -flow.dx[src];  // columns mirrored, dx negated
            out.dy[dst] = flow.dy[src];
        }
    return out;
}

OcclusionMask flip_horizontal(const OcclusionMask& mask) {
    OcclusionMask out = mask;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            out.values[static_cast<std::size_t>(y) * mask.width + x] =
                mask.values[static_cast<std::size_t>(y) * mask.width + (mask.width - 1 - x)];
    return out;
}

}  // namespace reconet
