#pragma once

#include <stdexcept>
#include <string>

namespace mse::enc {

struct EncoderConfig {
    int n_layers = 2;
    int n_heads = 4;
    int d_model = 64;
    int d_ff = 256;
    int max_len = 128;
    int vocab_size = 512;
    // Parallel-adapter defaults: bottleneck = d_model / 2, output scale 4.
    int adapter_bottleneck = 32;
    float adapter_scale = 4.0f;

    void validate() const {
        if (n_layers <= 0 || n_heads <= 0 || d_model <= 0 || d_ff <= 0 || max_len <= 0 ||
            vocab_size <= 0 || adapter_bottleneck <= 0 || adapter_scale <= 0)
            throw std::invalid_argument("encoder config: all fields must be positive");
        if (d_model % n_heads != 0)
            throw std::invalid_argument("encoder config: d_model must be divisible by n_heads");
        if (adapter_bottleneck >= d_model)
            throw std::invalid_argument("encoder config: adapter bottleneck must be < d_model");
    }
};

}  // namespace mse::enc
