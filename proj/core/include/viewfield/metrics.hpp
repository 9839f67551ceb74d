#pragma once

#include <vector>

#include "viewfield/image.hpp"

namespace viewfield {

constexpr double kPsnrCap = 99.0;

/// -10 log10(MSE) over all channels; identical images give kPsnrCap.
double psnr(const Image& a, const Image& b);

/// Single-scale SSIM on luma: 11x11 Gaussian window (sigma 1.5), k1 = 0.01,
/// k2 = 0.03, dynamic range 1, averaged over fully covered windows.
double ssim(const Image& a, const Image& b);

/// Luma plane (Rec. 601 weights), row-major.
std::vector<double> to_gray(const Image& image);

/// Mean absolute difference over pixels valid in both the mask and the prediction.
double l1_depth(const DepthMap& predicted, const DepthMap& reference);

}  // namespace viewfield
