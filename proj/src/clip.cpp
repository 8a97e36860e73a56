#include "tev/clip.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace tev {

namespace {

constexpr char kMagic[4] = {'T', 'E', 'V', 'C'};
constexpr uint16_t kVersion = 1;

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}

    size_t offset() const { return pos_; }

    uint8_t u8(const char* field) {
        need(1, field);
        return bytes_[pos_++];
    }
    uint16_t u16(const char* field) {
        need(2, field);
        uint16_t v = static_cast<uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }
    uint32_t u32(const char* field) {
        need(4, field);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    const uint8_t* block(size_t n, const char* field) {
        need(n, field);
        const uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

private:
    void need(size_t n, const char* field) {
        if (pos_ + n > bytes_.size())
            throw FormatError(std::string("truncated payload: field '") + field + "' at byte offset " +
                              std::to_string(pos_) + " needs " + std::to_string(n) + " bytes, " +
                              std::to_string(bytes_.size() - pos_) + " remain");
    }

    const std::vector<uint8_t>& bytes_;
    size_t pos_ = 0;
};

} // namespace

const char* event_name(EventClass e) {
    switch (e) {
        case EventClass::Stationary: return "stationary";
        case EventClass::Departing: return "departing";
        case EventClass::WrongWay: return "wrong_way";
        case EventClass::CarCrash: return "car_crash";
    }
    return "?";
}

uint8_t LabelSet::to_bits() const {
    uint8_t b = 0;
    for (int i = 0; i < kNumEventClasses; ++i)
        if (flags[i]) b |= static_cast<uint8_t>(1u << i);
    return b;
}

LabelSet LabelSet::from_bits(uint8_t bits) {
    if (bits >= 16)
        throw FormatError("label bitmask has bits >= 4 set: value " + std::to_string(bits));
    LabelSet s;
    for (int i = 0; i < kNumEventClasses; ++i) s.flags[i] = (bits >> i) & 1;
    return s;
}

std::vector<uint8_t> serialize_clip(const Clip& clip) {
    std::vector<uint8_t> out;
    const int w = clip.frames.empty() ? kFrameWidth : clip.frames[0].width;
    const int h = clip.frames.empty() ? kFrameHeight : clip.frames[0].height;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kVersion);
    put_u16(out, static_cast<uint16_t>(w));
    put_u16(out, static_cast<uint16_t>(h));
    put_u16(out, static_cast<uint16_t>(clip.frame_rate));
    out.push_back(1); // channels
    put_u32(out, static_cast<uint32_t>(clip.frames.size()));
    for (size_t i = 0; i < clip.frames.size(); ++i) {
        out.push_back(clip.labels[i].to_bits());
        const Frame& f = clip.frames[i];
        out.insert(out.end(), f.pixels.begin(), f.pixels.end());
    }
    return out;
}

Clip deserialize_clip(const std::vector<uint8_t>& bytes, const std::string& clip_id) {
    Reader r(bytes);
    const uint8_t* magic = r.block(4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad magic at byte offset 0: expected \"TEVC\"");
    const uint16_t version = r.u16("version");
    if (version != kVersion)
        throw FormatError("version mismatch at byte offset 4: got " + std::to_string(version) + ", expected " +
                          std::to_string(kVersion));
    const uint16_t w = r.u16("width");
    const uint16_t h = r.u16("height");
    const uint16_t fps = r.u16("fps");
    const uint8_t channels = r.u8("channels");
    if (channels != 1)
        throw FormatError("channels at byte offset 10: got " + std::to_string(channels) + ", expected 1");
    const uint32_t frame_count = r.u32("frame_count");

    Clip clip;
    clip.frame_rate = fps;
    clip.clip_id = clip_id;
    clip.frames.reserve(frame_count);
    clip.labels.reserve(frame_count);
    for (uint32_t i = 0; i < frame_count; ++i) {
        const size_t label_off = r.offset();
        const uint8_t bits = r.u8("label");
        if (bits >= 16)
            throw FormatError("label bitmask with bits >= 4 set at byte offset " + std::to_string(label_off) +
                              ": value " + std::to_string(bits));
        clip.labels.push_back(LabelSet::from_bits(bits));
        const size_t n = static_cast<size_t>(w) * h;
        const uint8_t* px = r.block(n, "frame pixels");
        Frame f(w, h);
        std::memcpy(f.pixels.data(), px, n);
        clip.frames.push_back(std::move(f));
    }
    return clip;
}

void save_clip(const Clip& clip, const std::filesystem::path& destination) {
    const auto bytes = serialize_clip(clip);
    std::ofstream out(destination, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + destination.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Clip load_clip(const std::filesystem::path& source) {
    std::ifstream in(source, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + source.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Clip clip = deserialize_clip(bytes, source.stem().string());

    auto meta_path = source;
    meta_path.replace_extension(".json");
    if (auto meta = load_clip_meta(meta_path)) {
        clip.clip_id = meta->clip_id;
        clip.provenance = "synthetic:" + std::to_string(meta->seed);
    }
    return clip;
}

void save_clip_meta(const ClipMeta& meta, const std::filesystem::path& destination) {
    nlohmann::json j{
        {"clip_id", meta.clip_id},
        {"seed", meta.seed},
        {"event_onset_frame", meta.event_onset_frame},
        {"scenario_kind", meta.scenario_kind},
    };
    std::ofstream out(destination);
    if (!out) throw FormatError("cannot open for writing: " + destination.string());
    out << j.dump(2) << "\n";
}

std::optional<ClipMeta> load_clip_meta(const std::filesystem::path& source) {
    std::ifstream in(source);
    if (!in) return std::nullopt;
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad clip metadata " + source.string() + ": " + e.what());
    }
    ClipMeta meta;
    meta.clip_id = j.value("clip_id", source.stem().string());
    meta.seed = j.value("seed", uint64_t{0});
    meta.event_onset_frame = j.value("event_onset_frame", -1);
    meta.scenario_kind = j.value("scenario_kind", "");
    return meta;
}

} // namespace tev
