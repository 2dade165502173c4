#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "leopart/grid.hpp"

namespace leopart {

using Rgb = std::array<std::uint8_t, 3>;

// Fixed 64-colour palette; label l is drawn with palette()[l % 64].
const std::array<Rgb, 64>& palette();

// Binary PPM (P6) of a label map, each cell scaled to `scale` x `scale` pixels.
std::vector<std::uint8_t> render_ppm(const LabelMap& labels, std::size_t scale = 1);
void write_ppm(const LabelMap& labels, const std::filesystem::path& path, std::size_t scale = 1);

}  // namespace leopart
