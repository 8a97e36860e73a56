#include "tev/pnm.hpp"

#include <cctype>
#include <fstream>

#include "tev/common.hpp"

namespace tev {

namespace {

void write_header(std::ofstream& out, const char* magic, int w, int h, bool maxval) {
    out << magic << "\n" << w << " " << h << "\n";
    if (maxval) out << "255\n";
}

std::vector<uint8_t> pack_bits(const std::vector<uint8_t>& values, int w, int h) {
    const int row_bytes = (w + 7) / 8;
    std::vector<uint8_t> packed(static_cast<size_t>(row_bytes) * h, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (values[static_cast<size_t>(y) * w + x])
                packed[static_cast<size_t>(y) * row_bytes + x / 8] |= static_cast<uint8_t>(0x80 >> (x % 8));
    return packed;
}

int read_pnm_int(std::istream& in) {
    int c = in.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#')
            while (c != EOF && c != '\n') c = in.get();
        c = in.get();
    }
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw FormatError("malformed PNM header");
    return value;
}

// 5x7 uppercase glyphs, one bit per pixel, top row first.
const uint8_t* glyph(char c) {
    static const uint8_t font[28][7] = {
        {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}, // A
        {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}, // B
        {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}, // C
        {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}, // D
        {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}, // E
        {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}, // F
        {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}, // G
        {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}, // H
        {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}, // I
        {0x01, 0x01, 0x01, 0x01, 0x11, 0x11, 0x0E}, // J
        {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}, // K
        {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}, // L
        {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}, // M
        {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}, // N
        {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, // O
        {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}, // P
        {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}, // Q
        {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}, // R
        {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}, // S
        {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}, // T
        {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, // U
        {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}, // V
        {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}, // W
        {0x11, 0x0A, 0x04, 0x04, 0x04, 0x0A, 0x11}, // X
        {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}, // Y
        {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}, // Z
        {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}, // _
        {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}, // space
    };
    if (c >= 'A' && c <= 'Z') return font[c - 'A'];
    if (c >= 'a' && c <= 'z') return font[c - 'a'];
    if (c == '_') return font[26];
    return font[27];
}

} // namespace

void write_pgm(const Frame& frame, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    write_header(out, "P5", frame.width, frame.height, true);
    out.write(reinterpret_cast<const char*>(frame.pixels.data()), static_cast<std::streamsize>(frame.pixels.size()));
}

Frame read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path.string());
    char m0 = static_cast<char>(in.get());
    char m1 = static_cast<char>(in.get());
    if (m0 != 'P' || m1 != '5') throw FormatError("expected P5 graymap: " + path.string());
    const int w = read_pnm_int(in);
    const int h = read_pnm_int(in);
    const int maxval = read_pnm_int(in);
    if (maxval != 255) throw FormatError("unsupported maxval in " + path.string());
    Frame f(w, h);
    in.read(reinterpret_cast<char*>(f.pixels.data()), static_cast<std::streamsize>(f.pixels.size()));
    if (!in) throw FormatError("truncated graymap: " + path.string());
    return f;
}

void write_pbm(const ForegroundMask& mask, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    write_header(out, "P4", mask.width, mask.height, false);
    const auto packed = pack_bits(mask.fg, mask.width, mask.height);
    out.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
}

void write_pbm(const LaneMask& mask, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    write_header(out, "P4", mask.width, mask.height, false);
    const auto packed = pack_bits(mask.mask, mask.width, mask.height);
    out.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
}

LaneMask read_mask(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path.string());
    char m0 = static_cast<char>(in.get());
    char m1 = static_cast<char>(in.get());
    if (m0 != 'P' || (m1 != '4' && m1 != '5')) throw FormatError("expected P4/P5 mask: " + path.string());
    const int w = read_pnm_int(in);
    const int h = read_pnm_int(in);
    LaneMask mask(w, h, 0);
    if (m1 == '5') {
        const int maxval = read_pnm_int(in);
        if (maxval != 255) throw FormatError("unsupported maxval in " + path.string());
        std::vector<uint8_t> raw(static_cast<size_t>(w) * h);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!in) throw FormatError("truncated mask: " + path.string());
        for (size_t i = 0; i < raw.size(); ++i) mask.mask[i] = raw[i] ? 1 : 0;
    } else {
        const int row_bytes = (w + 7) / 8;
        std::vector<uint8_t> packed(static_cast<size_t>(row_bytes) * h);
        in.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
        if (!in) throw FormatError("truncated mask: " + path.string());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                mask.at(x, y) = (packed[static_cast<size_t>(y) * row_bytes + x / 8] >> (7 - x % 8)) & 1;
    }
    bool any = false;
    for (uint8_t v : mask.mask) any |= (v != 0);
    if (!any) throw FormatError("mask has no set pixels: " + path.string());
    return mask;
}

void draw_banner(Frame& frame, const std::string& text) {
    const int bar_h = 11;
    for (int y = 0; y < std::min(bar_h, frame.height); ++y)
        for (int x = 0; x < frame.width; ++x) frame.at(x, y) = 0;
    int cx = 2;
    for (char c : text) {
        if (cx + 5 >= frame.width) break;
        const uint8_t* g = glyph(c);
        for (int gy = 0; gy < 7; ++gy)
            for (int gx = 0; gx < 5; ++gx)
                if ((g[gy] >> (4 - gx)) & 1) frame.at(cx + gx, 2 + gy) = 255;
        cx += 6;
    }
}

} // namespace tev
