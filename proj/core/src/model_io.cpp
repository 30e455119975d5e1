#include <stdexcept>

#include "mselab/encoder/model.hpp"
#include "mselab/encoder/weights_io.hpp"

namespace mse::enc {

void save_model(const EncoderModel<float>& model, const std::string& path) {
    auto& m = const_cast<EncoderModel<float>&>(model);
    std::vector<NamedTensor> tensors;
    for (auto& [name, t] : m.named_parameters()) {
        NamedTensor nt;
        nt.name = name;
        for (std::size_t d : t->shape) nt.dims.push_back(d);
        nt.data = *t->data;
        tensors.push_back(std::move(nt));
    }
    write_weight_file(path, tensors);

    Sidecar sc;
    sc.config = model.config;
    sc.phase = model.phase;
    sc.lang = model.lang;
    sc.frozen_base = model.frozen_base;
    if (model.adapter) {
        AdapterInfo a;
        a.bottleneck = model.adapter->bottleneck;
        a.scale = model.adapter->scale;
        sc.adapter = a;
    }
    write_sidecar(path, sc);
}

EncoderModel<float> load_model(const std::string& path) {
    const Sidecar sc = read_sidecar(path);
    sc.config.validate();

    mse::num::RngState scratch(0);
    EncoderModel<float> m = EncoderModel<float>::random_init(sc.config, scratch);
    m.phase = sc.phase;
    m.lang = sc.lang;
    m.frozen_base = sc.frozen_base;
    if (sc.adapter) {
        m.frozen_base = false;  // attach_adapter re-freezes
        m.attach_adapter(sc.adapter->bottleneck, sc.adapter->scale, scratch);
        m.frozen_base = sc.frozen_base;
    }

    auto named = m.named_parameters();
    std::vector<NamedTensor> tensors = read_weight_file(path);
    if (tensors.size() != named.size())
        throw std::runtime_error("weights: tensor count mismatch in " + path);
    for (std::size_t i = 0; i < named.size(); ++i) {
        const auto& [name, dst] = named[i];
        const NamedTensor& src = tensors[i];
        if (src.name != name)
            throw std::runtime_error("weights: unexpected tensor '" + src.name + "' (wanted '" +
                                     name + "') in " + path);
        if (src.dims.size() != dst->shape.size())
            throw std::runtime_error("weights: rank mismatch for " + name + " in " + path);
        for (std::size_t r = 0; r < src.dims.size(); ++r)
            if (src.dims[r] != dst->shape[r])
                throw std::runtime_error("weights: dim mismatch for " + name + " in " + path);
        *dst->data = src.data;
    }
    return m;
}

}  // namespace mse::enc
