#include "tev/model.hpp"

#include <cstring>
#include <fstream>

namespace tev {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Hist: return "hist";
        case Variant::Conv: return "conv";
        case Variant::ConvFlow: return "convflow";
        case Variant::External: return "external";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    for (Variant v : {Variant::Hist, Variant::Conv, Variant::ConvFlow, Variant::External})
        if (name == variant_name(v)) return v;
    throw ConfigError("unknown model variant: " + name);
}

nlohmann::json model_config_to_json(const ModelConfig& config) {
    return nlohmann::json{
        {"variant", variant_name(config.variant)},
        {"conv_layers", config.conv_layers},
        {"rnn_layers", config.rnn_layers},
        {"hidden", config.hidden},
        {"external_dim", config.external_dim},
        {"conv_channels", config.conv_channels},
        {"conv_dense", config.conv_dense},
        {"input_height", config.input_height},
        {"input_width", config.input_width},
        {"thresholds", config.thresholds},
    };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig config;
    config.variant = variant_from_name(j.at("variant").get<std::string>());
    config.conv_layers = j.value("conv_layers", 2);
    config.rnn_layers = j.value("rnn_layers", 1);
    config.hidden = j.value("hidden", 50);
    config.external_dim = j.value("external_dim", 0);
    if (j.contains("conv_channels")) config.conv_channels = j.at("conv_channels").get<std::array<int, 3>>();
    config.conv_dense = j.value("conv_dense", 256);
    config.input_height = j.value("input_height", kFrameHeight);
    config.input_width = j.value("input_width", kFrameWidth);
    if (j.contains("thresholds"))
        config.thresholds = j.at("thresholds").get<std::array<float, kNumEventClasses>>();
    return config;
}

namespace {

constexpr char kMagic[4] = {'T', 'E', 'V', 'M'};

} // namespace

void save_checkpoint(EventDetectorModel<float>& model, const nlohmann::json& extra,
                     const std::filesystem::path& path) {
    auto params = model.parameters();
    nlohmann::json manifest = nlohmann::json::array();
    uint64_t offset = 0;
    for (auto* p : params) {
        manifest.push_back({{"name", p->name}, {"shape", p->value.shape}, {"offset", offset}});
        offset += p->size() * sizeof(float);
    }
    nlohmann::json header{
        {"format_version", 1},
        {"model", model_config_to_json(model.config())},
        {"tensors", manifest},
        {"extra", extra},
    };
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    out.write(kMagic, 4);
    const uint32_t len = static_cast<uint32_t>(header_str.size());
    char lenbuf[4];
    for (int i = 0; i < 4; ++i) lenbuf[i] = static_cast<char>((len >> (8 * i)) & 0xff);
    out.write(lenbuf, 4);
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (auto* p : params)
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(p->size() * sizeof(float)));
    if (!out) throw FormatError("short write: " + path.string());
}

std::unique_ptr<EventDetectorModel<float>> load_checkpoint(const std::filesystem::path& path,
                                                           nlohmann::json* extra_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad magic in checkpoint " + path.string() + ": expected \"TEVM\"");
    char lenbuf[4];
    in.read(lenbuf, 4);
    if (!in) throw FormatError("truncated checkpoint header length");
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<uint32_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);
    std::string header_str(len, '\0');
    in.read(header_str.data(), len);
    if (!in) throw FormatError("truncated checkpoint header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad checkpoint header JSON: ") + e.what());
    }
    const ModelConfig config = model_config_from_json(header.at("model"));
    if (extra_out) *extra_out = header.value("extra", nlohmann::json::object());

    auto model = std::make_unique<EventDetectorModel<float>>(config, 0);
    auto params = model->parameters();

    const std::streampos payload_start = in.tellg();
    for (const auto& entry : header.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<int>>();
        const uint64_t offset = entry.at("offset").get<uint64_t>();
        nn::Parameter<float>* target = nullptr;
        for (auto* p : params)
            if (p->name == name) { target = p; break; }
        if (!target) throw FormatError("checkpoint tensor '" + name + "' does not exist in this model");
        if (shape != target->value.shape)
            throw FormatError("checkpoint tensor '" + name + "' shape mismatch");
        in.seekg(payload_start + static_cast<std::streamoff>(offset));
        in.read(reinterpret_cast<char*>(target->value.data()),
                static_cast<std::streamsize>(target->size() * sizeof(float)));
        if (!in) throw FormatError("truncated payload for tensor '" + name + "'");
    }
    return model;
}

} // namespace tev
