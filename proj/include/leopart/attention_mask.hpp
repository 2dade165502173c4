#pragma once

#include <cstddef>
#include <vector>

#include "leopart/grid.hpp"

namespace leopart {

// h non-negative attention maps of identical size (one per head).
using AttentionStack = Grid<float>;

struct MaskParams {
  std::size_t kernel = 7;
  double sigma = 1.5;
  double mass = 0.6;
};

Map merge_heads(const AttentionStack& stack);

// Normalized 1-D Gaussian taps (the 2-D kernel is their outer product).
std::vector<double> gaussian_kernel_1d(std::size_t kernel, double sigma);

// Separable Gaussian blur with reflect-101 borders (edge cell not repeated).
Map gaussian_smooth(const Map& map, std::size_t kernel = 7, double sigma = 1.5);

// Keeps the highest cells until their cumulative mass first reaches
// mass * total. Equal values are taken in row-major order.
BinaryMask threshold_mass(const Map& map, double mass = 0.6);

// merge -> smooth -> threshold.
BinaryMask attention_to_mask(const AttentionStack& stack, const MaskParams& params = {});

// Reflect-101 index folding for any offset, including maps smaller than the kernel.
std::size_t reflect_index(long i, std::size_t n);

}  // namespace leopart
