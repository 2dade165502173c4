#include "leopart/render.hpp"

#include <string>

#include "leopart/error.hpp"
#include "leopart/tensor_io.hpp"

namespace leopart {

const std::array<Rgb, 64>& palette() {
  // Four levels per channel, ordered so that consecutive labels differ strongly.
  static const std::array<Rgb, 64> colours = [] {
    std::array<Rgb, 64> p{};
    static constexpr std::uint8_t kLevels[4] = {0, 85, 170, 255};
    for (std::size_t i = 0; i < 64; ++i) {
      const std::size_t j = (i * 37 + 11) % 64;
      p[i] = {kLevels[j & 3], kLevels[(j >> 2) & 3], kLevels[(j >> 4) & 3]};
    }
    return p;
  }();
  return colours;
}

std::vector<std::uint8_t> render_ppm(const LabelMap& labels, std::size_t scale) {
  if (scale == 0) throw ValidationError("render: scale must be >= 1");
  const std::size_t h = labels.height * scale, w = labels.width * scale;
  const std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + h * w * 3);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const Rgb& c = palette()[labels.at(y / scale, x / scale) % 64];
      out.insert(out.end(), c.begin(), c.end());
    }
  }
  return out;
}

void write_ppm(const LabelMap& labels, const std::filesystem::path& path, std::size_t scale) {
  write_file_bytes(path, render_ppm(labels, scale));
}

}  // namespace leopart
