#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mselab/encoder/config.hpp"

namespace mse::enc {

struct NamedTensor {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<float> data;
};

struct AdapterInfo {
    int bottleneck = 0;
    float scale = 0.0f;
    std::string activation = "relu";
};

// Config sidecar stored next to the weight file as "<path>.json".
struct Sidecar {
    EncoderConfig config;
    std::string phase = "init";
    std::string lang;
    std::string pooling = "mean";
    bool frozen_base = false;
    std::optional<AdapterInfo> adapter;
};

// Binary little-endian container: magic "MSE1", u32 version, u32 tensor
// count; per tensor u16 name length, name bytes, u8 rank, rank x u64 dims,
// raw f32 payload.
void write_weight_file(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_weight_file(const std::string& path);

void write_sidecar(const std::string& weight_path, const Sidecar& sc);
Sidecar read_sidecar(const std::string& weight_path);

}  // namespace mse::enc
