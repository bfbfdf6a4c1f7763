#pragma once

// Checkpoint container: magic "RCNT", u32 version, u32 layer count, per-layer
// (u32 name length, name, u32 rank, u32 dims...), then the concatenated
// little-endian float32 payload in layer order, then a length-prefixed block
// of UTF-8 key=value metadata lines. Roundtrips are bit-exact.

#include "reconet/stylenet.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace reconet {

struct CheckpointEntry {
    std::string name;
    std::vector<int> shape;
    std::vector<float> data;
};

struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;
    std::vector<CheckpointEntry> layers;
    std::vector<std::pair<std::string, std::string>> metadata;

    const CheckpointEntry* find(const std::string& name) const;
    std::string meta(const std::string& key, const std::string& fallback = "") const;
    void set_meta(const std::string& key, const std::string& value);
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);

Checkpoint read_checkpoint_file(const std::string& path);
void write_checkpoint_file(const std::string& path, const Checkpoint& ckpt);

// Model <-> checkpoint. Saving and loading validate the layer manifest
// against the fixed architecture table; mismatches name the offending layer.
Checkpoint save_model(StyleNet<float>& net,
                      const std::vector<std::pair<std::string, std::string>>& metadata);
StyleNet<float> load_model(const Checkpoint& ckpt);

}  // namespace reconet
