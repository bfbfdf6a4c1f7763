#include "reconet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace reconet {

std::vector<std::pair<std::string, std::vector<int>>> stylenet_manifest() {
    std::vector<std::pair<std::string, std::vector<int>>> m;
    auto conv = [&](const std::string& p, int co, int ci, int k) {
        m.emplace_back(p + ".weight", std::vector<int>{co, ci, k, k});
        m.emplace_back(p + ".bias", std::vector<int>{co});
    };
    auto norm_conv = [&](const std::string& p, int co, int ci, int k) {
        conv(p, co, ci, k);
        m.emplace_back(p + ".in_scale", std::vector<int>{co});
        m.emplace_back(p + ".in_shift", std::vector<int>{co});
    };
    norm_conv("encoder.conv1", 48, 3, 9);
    norm_conv("encoder.conv2", 96, 48, 3);
    norm_conv("encoder.conv3", 192, 96, 3);
    for (int i = 1; i <= 4; ++i) {
        norm_conv("encoder.res" + std::to_string(i) + ".conv1", 192, 192, 3);
        norm_conv("encoder.res" + std::to_string(i) + ".conv2", 192, 192, 3);
    }
    norm_conv("decoder.conv1", 96, 192, 3);
    norm_conv("decoder.conv2", 48, 96, 3);
    conv("decoder.conv3", 3, 48, 9);
    return m;
}

std::size_t stylenet_parameter_count() {
    std::size_t n = 0;
    for (const auto& [name, shape] : stylenet_manifest()) {
        std::size_t c = 1;
        for (int d : shape) c *= static_cast<std::size_t>(d);
        n += c;
    }
    return n;
}

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
    for (const auto& l : layers)
        if (l.name == name) return &l;
    return nullptr;
}

std::string Checkpoint::meta(const std::string& key, const std::string& fallback) const {
    for (const auto& [k, v] : metadata)
        if (k == key) return v;
    return fallback;
}

void Checkpoint::set_meta(const std::string& key, const std::string& value) {
    for (auto& [k, v] : metadata)
        if (k == key) {
            v = value;
            return;
        }
    metadata.emplace_back(key, value);
}

namespace {

constexpr char kMagic[4] = {'R', 'C', 'N', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

struct Reader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("checkpoint: unexpected end of data");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = static_cast<std::uint32_t>(buf[pos]) |
                          (static_cast<std::uint32_t>(buf[pos + 1]) << 8) |
                          (static_cast<std::uint32_t>(buf[pos + 2]) << 16) |
                          (static_cast<std::uint32_t>(buf[pos + 3]) << 24);
        pos += 4;
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
    void floats(float* dst, std::size_t n) {
        need(n * 4);
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t u = static_cast<std::uint32_t>(buf[pos]) |
                              (static_cast<std::uint32_t>(buf[pos + 1]) << 8) |
                              (static_cast<std::uint32_t>(buf[pos + 2]) << 16) |
                              (static_cast<std::uint32_t>(buf[pos + 3]) << 24);
            std::memcpy(dst + i, &u, 4);
            pos += 4;
        }
    }
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, Checkpoint::kVersion);
    put_u32(out, static_cast<std::uint32_t>(ckpt.layers.size()));
    for (const auto& l : ckpt.layers) {
        put_u32(out, static_cast<std::uint32_t>(l.name.size()));
        out.insert(out.end(), l.name.begin(), l.name.end());
        put_u32(out, static_cast<std::uint32_t>(l.shape.size()));
        for (int d : l.shape) put_u32(out, static_cast<std::uint32_t>(d));
    }
    for (const auto& l : ckpt.layers) {
        std::size_t n = 1;
        for (int d : l.shape) n *= static_cast<std::size_t>(d);
        if (n != l.data.size())
            throw std::runtime_error("checkpoint: layer '" + l.name + "' payload size mismatch");
        for (float f : l.data) {
            std::uint32_t u;
            std::memcpy(&u, &f, 4);
            put_u32(out, u);
        }
    }
    std::string meta;
    for (const auto& [k, v] : ckpt.metadata) meta += k + "=" + v + "\n";
    put_u32(out, static_cast<std::uint32_t>(meta.size()));
    out.insert(out.end(), meta.begin(), meta.end());
    return out;
}

Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
    Reader r{bytes};
    if (r.str(4) != std::string(kMagic, 4)) throw std::runtime_error("checkpoint: corrupt header");
    std::uint32_t version = r.u32();
    if (version != Checkpoint::kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    std::uint32_t n_layers = r.u32();
    Checkpoint ckpt;
    ckpt.layers.resize(n_layers);
    for (auto& l : ckpt.layers) {
        l.name = r.str(r.u32());
        std::uint32_t rank = r.u32();
        if (rank > 8) throw std::runtime_error("checkpoint: corrupt header");
        l.shape.resize(rank);
        for (auto& d : l.shape) d = static_cast<int>(r.u32());
    }
    for (auto& l : ckpt.layers) {
        std::size_t n = 1;
        for (int d : l.shape) n *= static_cast<std::size_t>(d);
        l.data.resize(n);
        r.floats(l.data.data(), n);
    }
    std::uint32_t meta_len = r.u32();
    std::string meta = r.str(meta_len);
    std::size_t start = 0;
    while (start < meta.size()) {
        std::size_t nl = meta.find('\n', start);
        if (nl == std::string::npos) nl = meta.size();
        std::string line = meta.substr(start, nl - start);
        std::size_t eq = line.find('=');
        if (eq != std::string::npos) ckpt.metadata.emplace_back(line.substr(0, eq), line.substr(eq + 1));
        start = nl + 1;
    }
    return ckpt;
}

Checkpoint read_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes);
}

void write_checkpoint_file(const std::string& path, const Checkpoint& ckpt) {
    auto bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace {

void validate_manifest(const Checkpoint& ckpt) {
    auto expected = stylenet_manifest();
    if (ckpt.layers.size() != expected.size())
        throw std::runtime_error("checkpoint: expected " + std::to_string(expected.size()) +
                                 " layers, got " + std::to_string(ckpt.layers.size()));
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto& [name, shape] = expected[i];
        const auto& l = ckpt.layers[i];
        if (l.name != name)
            throw std::runtime_error("checkpoint: layer " + std::to_string(i) + " is '" + l.name +
                                     "', expected '" + name + "'");
        if (l.shape != shape)
            throw std::runtime_error("checkpoint: layer '" + name + "' has shape " +
                                     shape_str(l.shape) + ", expected " + shape_str(shape));
    }
}

}  // namespace

Checkpoint save_model(StyleNet<float>& net,
                      const std::vector<std::pair<std::string, std::string>>& metadata) {
    Checkpoint ckpt;
    for (auto& [name, t] : net.parameters()) {
        CheckpointEntry e;
        e.name = name;
        e.shape = t.shape();
        e.data = t.data();
        ckpt.layers.push_back(std::move(e));
    }
    ckpt.metadata = metadata;
    ckpt.set_meta("format", "reconet-model");
    validate_manifest(ckpt);
    return ckpt;
}

StyleNet<float> load_model(const Checkpoint& ckpt) {
    validate_manifest(ckpt);
    StyleNet<float> net = StyleNet<float>::random(0, /*tracked=*/true);
    auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i].second.data() = ckpt.layers[i].data;
    return net;
}

}  // namespace reconet
