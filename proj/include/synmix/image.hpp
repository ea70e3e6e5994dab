#pragma once

#include <cstdint>
#include <filesystem>

#include <Eigen/Core>

namespace synmix {

/// Row-major raster indexed (row, col) = (y, x).
template <typename Scalar>
using Image = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Intensities in [0, 1].
using GrayImage = Image<double>;

/// Binary occupancy, one byte per pixel holding 0 or 1.
using BitMask = Image<std::uint8_t>;

/// 8-bit PNG I/O. Colour inputs are reduced to luma (Rec. 601 weights).
GrayImage read_gray_png(const std::filesystem::path& path);
void write_gray_png(const std::filesystem::path& path, const GrayImage& img);

/// Writes a mask as single-channel PNG with values {0, 255}.
void write_mask_png(const std::filesystem::path& path, const BitMask& mask);
BitMask read_mask_png(const std::filesystem::path& path);

/// Reads only the header; returns (width, height).
std::pair<int, int> png_dimensions(const std::filesystem::path& path);

/// Deterministic procedural scene with natural-image-like statistics: a 1/f
/// texture built from several octaves of smoothed noise plus soft-edged
/// blobs. Used for fixtures, stub generation and IQA tests.
GrayImage render_scene(std::uint64_t seed, int width, int height);

/// Adds i.i.d. Gaussian noise with the given standard deviation, clamped to [0, 1].
GrayImage add_gaussian_noise(const GrayImage& img, double sigma, std::uint64_t seed);

}  // namespace synmix
