#include "leopart/attention_mask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "leopart/error.hpp"

namespace leopart {

Map merge_heads(const AttentionStack& stack) {
  if (stack.channels == 0 || stack.height == 0 || stack.width == 0) {
    throw ValidationError("merge_heads: empty attention stack");
  }
  Map out(stack.height, stack.width, 0.0f);
  for (std::size_t k = 0; k < out.size(); ++k) {
    double s = 0.0;
    for (std::size_t h = 0; h < stack.channels; ++h) s += stack.data[h * stack.plane() + k];
    out.data[k] = static_cast<float>(s / static_cast<double>(stack.channels));
  }
  return out;
}

std::vector<double> gaussian_kernel_1d(std::size_t kernel, double sigma) {
  if (kernel % 2 == 0) throw ValidationError("gaussian kernel size must be odd");
  if (!(sigma > 0.0)) throw ValidationError("gaussian sigma must be positive");
  const long r = static_cast<long>(kernel / 2);
  std::vector<double> k(kernel);
  for (long i = -r; i <= r; ++i) k[i + r] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
  const double total = std::accumulate(k.begin(), k.end(), 0.0);
  for (auto& v : k) v /= total;
  return k;
}

std::size_t reflect_index(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<long>(n) ? m : period - m);
}

Map gaussian_smooth(const Map& map, std::size_t kernel, double sigma) {
  const auto k = gaussian_kernel_1d(kernel, sigma);
  const long r = static_cast<long>(kernel / 2);
  const std::size_t h = map.height, w = map.width;
  std::vector<double> tmp(h * w, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (long d = -r; d <= r; ++d) s += k[d + r] * map.at(y, reflect_index(static_cast<long>(x) + d, w));
      tmp[y * w + x] = s;
    }
  }
  Map out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double s = 0.0;
      for (long d = -r; d <= r; ++d) s += k[d + r] * tmp[reflect_index(static_cast<long>(y) + d, h) * w + x];
      out.at(y, x) = static_cast<float>(s);
    }
  }
  return out;
}

BinaryMask threshold_mass(const Map& map, double mass) {
  double total = 0.0;
  for (float v : map.data) {
    if (v < 0.0f) throw ValidationError("threshold_mass: negative attention value");
    total += v;
  }
  if (!(total > 0.0)) throw ValidationError("threshold_mass: map has no mass to threshold");

  std::vector<std::size_t> order(map.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return map.data[a] > map.data[b]; });

  BinaryMask out(map.height, map.width, 0);
  const double target = mass * total;
  double cum = 0.0;
  for (auto idx : order) {
    out.data[idx] = 1;
    cum += map.data[idx];
    if (cum >= target) break;
  }
  return out;
}

BinaryMask attention_to_mask(const AttentionStack& stack, const MaskParams& params) {
  return threshold_mass(gaussian_smooth(merge_heads(stack), params.kernel, params.sigma), params.mass);
}

}  // namespace leopart
