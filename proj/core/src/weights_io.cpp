#include "mselab/encoder/weights_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace mse::enc {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'E', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& f, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
    f.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::ifstream& f, const std::string& path) {
    unsigned char buf[sizeof(T)];
    if (!f.read(reinterpret_cast<char*>(buf), sizeof(T)))
        throw std::runtime_error("weights: truncated file " + path);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
}

}  // namespace

void write_weight_file(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("weights: cannot open " + path + " for writing");
    f.write(kMagic, 4);
    put<std::uint32_t>(f, kVersion);
    put<std::uint32_t>(f, static_cast<std::uint32_t>(tensors.size()));
    for (const NamedTensor& t : tensors) {
        put<std::uint16_t>(f, static_cast<std::uint16_t>(t.name.size()));
        f.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        put<std::uint8_t>(f, static_cast<std::uint8_t>(t.dims.size()));
        std::uint64_t numel = 1;
        for (std::uint64_t d : t.dims) {
            put<std::uint64_t>(f, d);
            numel *= d;
        }
        if (numel != t.data.size())
            throw std::logic_error("weights: dims do not match payload for " + t.name);
        // Payload stored little-endian; bulk write on little-endian hosts.
        f.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!f) throw std::runtime_error("weights: write failed for " + path);
}

std::vector<NamedTensor> read_weight_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("weights: cannot open " + path);
    char magic[4];
    if (!f.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("weights: bad magic in " + path);
    const auto version = get<std::uint32_t>(f, path);
    if (version != kVersion)
        throw std::runtime_error("weights: unsupported version " + std::to_string(version) +
                                 " in " + path);
    const auto count = get<std::uint32_t>(f, path);
    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        const auto name_len = get<std::uint16_t>(f, path);
        t.name.resize(name_len);
        if (!f.read(t.name.data(), name_len))
            throw std::runtime_error("weights: truncated file " + path);
        const auto rank = get<std::uint8_t>(f, path);
        std::uint64_t numel = 1;
        for (std::uint8_t r = 0; r < rank; ++r) {
            t.dims.push_back(get<std::uint64_t>(f, path));
            numel *= t.dims.back();
        }
        t.data.resize(numel);
        if (!f.read(reinterpret_cast<char*>(t.data.data()),
                    static_cast<std::streamsize>(numel * sizeof(float))))
            throw std::runtime_error("weights: truncated file " + path);
        tensors.push_back(std::move(t));
    }
    return tensors;
}

void write_sidecar(const std::string& weight_path, const Sidecar& sc) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["config"] = {{"n_layers", sc.config.n_layers},
                   {"n_heads", sc.config.n_heads},
                   {"d_model", sc.config.d_model},
                   {"d_ff", sc.config.d_ff},
                   {"max_len", sc.config.max_len},
                   {"vocab_size", sc.config.vocab_size},
                   {"adapter_bottleneck", sc.config.adapter_bottleneck},
                   {"adapter_scale", sc.config.adapter_scale}};
    j["phase"] = sc.phase;
    j["lang"] = sc.lang;
    j["pooling"] = sc.pooling;
    j["frozen_base"] = sc.frozen_base;
    if (sc.adapter) {
        j["adapter"] = {{"bottleneck", sc.adapter->bottleneck},
                        {"scale", sc.adapter->scale},
                        {"activation", sc.adapter->activation}};
    } else {
        j["adapter"] = nullptr;
    }
    std::ofstream f(weight_path + ".json", std::ios::binary);
    if (!f) throw std::runtime_error("weights: cannot open sidecar for " + weight_path);
    f << j.dump(2) << '\n';
}

Sidecar read_sidecar(const std::string& weight_path) {
    const std::string path = weight_path + ".json";
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("weights: missing sidecar " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error("weights: malformed sidecar " + path + ": " + e.what());
    }
    Sidecar sc;
    const auto& c = j.at("config");
    sc.config.n_layers = c.at("n_layers").get<int>();
    sc.config.n_heads = c.at("n_heads").get<int>();
    sc.config.d_model = c.at("d_model").get<int>();
    sc.config.d_ff = c.at("d_ff").get<int>();
    sc.config.max_len = c.at("max_len").get<int>();
    sc.config.vocab_size = c.at("vocab_size").get<int>();
    sc.config.adapter_bottleneck = c.at("adapter_bottleneck").get<int>();
    sc.config.adapter_scale = c.at("adapter_scale").get<float>();
    sc.phase = j.at("phase").get<std::string>();
    sc.lang = j.value("lang", std::string());
    sc.pooling = j.value("pooling", std::string("mean"));
    sc.frozen_base = j.value("frozen_base", false);
    if (j.contains("adapter") && !j["adapter"].is_null()) {
        AdapterInfo a;
        a.bottleneck = j["adapter"].at("bottleneck").get<int>();
        a.scale = j["adapter"].at("scale").get<float>();
        a.activation = j["adapter"].value("activation", std::string("relu"));
        sc.adapter = a;
    }
    return sc;
}

}  // namespace mse::enc
