#pragma once

#include <filesystem>
#include <string>

#include "tev/background.hpp"
#include "tev/image.hpp"

namespace tev {

/// Binary portable graymap (P5).
void write_pgm(const Frame& frame, const std::filesystem::path& path);
Frame read_pgm(const std::filesystem::path& path);

/// Binary portable bitmap (P4); foreground/lane bits set.
void write_pbm(const ForegroundMask& mask, const std::filesystem::path& path);
void write_pbm(const LaneMask& mask, const std::filesystem::path& path);
LaneMask read_mask(const std::filesystem::path& path); // P4 or P5, nonzero = 1

/// Stamp a line of uppercase text into the frame's top banner.
void draw_banner(Frame& frame, const std::string& text);

} // namespace tev
