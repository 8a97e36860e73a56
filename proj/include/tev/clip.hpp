#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tev/image.hpp"

namespace tev {

inline constexpr int kNumEventClasses = 4;
inline constexpr int kClipFrames = 125;
inline constexpr int kClipFps = 2;

/// The four event classes; ordinals match the loss-weight order.
enum class EventClass : int {
    Stationary = 1,
    Departing = 2,
    WrongWay = 3,
    CarCrash = 4,
};

const char* event_name(EventClass e);

/// Per-frame multi-label ground truth; flags are independent.
struct LabelSet {
    std::array<bool, kNumEventClasses> flags{};

    bool& operator[](EventClass e) { return flags[static_cast<int>(e) - 1]; }
    bool operator[](EventClass e) const { return flags[static_cast<int>(e) - 1]; }
    bool any() const { return flags[0] || flags[1] || flags[2] || flags[3]; }

    uint8_t to_bits() const;
    static LabelSet from_bits(uint8_t bits); // throws FormatError if bits >= 16

    bool operator==(const LabelSet&) const = default;
};

/// Fixed-length labeled frame sequence.
struct Clip {
    std::vector<Frame> frames;
    std::vector<LabelSet> labels; // one per frame
    int frame_rate = kClipFps;
    std::string clip_id;
    std::string provenance; // "synthetic:<seed>" or an external source tag

    size_t length() const { return frames.size(); }
    bool operator==(const Clip&) const = default;
};

/// JSON sidecar written next to each generated container.
struct ClipMeta {
    std::string clip_id;
    uint64_t seed = 0;
    int event_onset_frame = -1; // -1 for no-event clips
    std::string scenario_kind;
};

/// "TEVC" binary container. Little-endian header: magic, version u16,
/// width u16, height u16, fps u16, channels u8, frame_count u32; per frame a
/// label bitmask byte followed by width*height intensity bytes.
void save_clip(const Clip& clip, const std::filesystem::path& destination);
Clip load_clip(const std::filesystem::path& source);

std::vector<uint8_t> serialize_clip(const Clip& clip);
Clip deserialize_clip(const std::vector<uint8_t>& bytes, const std::string& clip_id);

void save_clip_meta(const ClipMeta& meta, const std::filesystem::path& destination);
std::optional<ClipMeta> load_clip_meta(const std::filesystem::path& source);

} // namespace tev
