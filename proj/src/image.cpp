#include "synmix/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "synmix/error.hpp"
#include "synmix/random.hpp"

namespace synmix {
namespace {

struct PngImage {
  png_image img{};
  PngImage() {
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&img); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

std::vector<std::uint8_t> read_raw(const std::filesystem::path& path, png_uint_32 format, int& w,
                                   int& h) {
  PngImage png;
  if (!png_image_begin_read_from_file(&png.img, path.c_str())) {
    throw Error(Errc::IoFailure, "cannot read PNG " + path.string() + ": " + png.img.message);
  }
  png.img.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(png.img));
  if (!png_image_finish_read(&png.img, nullptr, buf.data(), 0, nullptr)) {
    throw Error(Errc::IoFailure, "cannot decode PNG " + path.string() + ": " + png.img.message);
  }
  w = static_cast<int>(png.img.width);
  h = static_cast<int>(png.img.height);
  return buf;
}

void write_raw(const std::filesystem::path& path, const std::uint8_t* data, int w, int h) {
  PngImage png;
  png.img.width = static_cast<png_uint_32>(w);
  png.img.height = static_cast<png_uint_32>(h);
  png.img.format = PNG_FORMAT_GRAY;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!png_image_write_to_file(&png.img, path.c_str(), 0, data, 0, nullptr)) {
    throw Error(Errc::IoFailure, "cannot write PNG " + path.string() + ": " + png.img.message);
  }
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace

GrayImage read_gray_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto buf = read_raw(path, PNG_FORMAT_RGB, w, h);
  GrayImage out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t* px = &buf[3 * (static_cast<std::size_t>(y) * w + x)];
      out(y, x) = (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) / 255.0;
    }
  }
  return out;
}

void write_gray_png(const std::filesystem::path& path, const GrayImage& img) {
  Image<std::uint8_t> bytes =
      (img.cwiseMax(0.0).cwiseMin(1.0) * 255.0 + 0.5).floor().cast<std::uint8_t>();
  write_raw(path, bytes.data(), static_cast<int>(img.cols()), static_cast<int>(img.rows()));
}

void write_mask_png(const std::filesystem::path& path, const BitMask& mask) {
  BitMask bytes = (mask != 0).select(BitMask::Constant(mask.rows(), mask.cols(), 255),
                                     BitMask::Zero(mask.rows(), mask.cols()));
  write_raw(path, bytes.data(), static_cast<int>(mask.cols()), static_cast<int>(mask.rows()));
}

BitMask read_mask_png(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto buf = read_raw(path, PNG_FORMAT_GRAY, w, h);
  BitMask out(h, w);
  for (int i = 0; i < w * h; ++i) out.data()[i] = buf[static_cast<std::size_t>(i)] >= 128 ? 1 : 0;
  return out;
}

std::pair<int, int> png_dimensions(const std::filesystem::path& path) {
  PngImage png;
  if (!png_image_begin_read_from_file(&png.img, path.c_str())) {
    throw Error(Errc::IoFailure, "cannot read PNG " + path.string() + ": " + png.img.message);
  }
  return {static_cast<int>(png.img.width), static_cast<int>(png.img.height)};
}

GrayImage render_scene(std::uint64_t seed, int width, int height) {
  Rng rng(seed);
  GrayImage img = GrayImage::Zero(height, width);

  // Value-noise octaves with 1/f amplitude falloff.
  double amplitude = 1.0;
  for (int octave = 0; octave < 6; ++octave) {
    const int cells = 2 << octave;
    Eigen::ArrayXXd lattice(cells + 1, cells + 1);
    for (Eigen::Index i = 0; i < lattice.size(); ++i) lattice.data()[i] = rng.uniform() - 0.5;
    for (int y = 0; y < height; ++y) {
      const double gy = (y + 0.5) / height * cells;
      const int iy = std::min(static_cast<int>(gy), cells - 1);
      const double ty = smoothstep(gy - iy);
      for (int x = 0; x < width; ++x) {
        const double gx = (x + 0.5) / width * cells;
        const int ix = std::min(static_cast<int>(gx), cells - 1);
        const double tx = smoothstep(gx - ix);
        const double top = lattice(iy, ix) * (1 - tx) + lattice(iy, ix + 1) * tx;
        const double bottom = lattice(iy + 1, ix) * (1 - tx) + lattice(iy + 1, ix + 1) * tx;
        img(y, x) += amplitude * (top * (1 - ty) + bottom * ty);
      }
    }
    amplitude *= 0.55;
  }

  // Soft-edged elliptical blobs give object boundaries.
  const int blobs = 6 + static_cast<int>(rng.below(6));
  for (int b = 0; b < blobs; ++b) {
    const double cx = rng.uniform() * width;
    const double cy = rng.uniform() * height;
    const double rx = (0.05 + 0.2 * rng.uniform()) * width;
    const double ry = (0.05 + 0.2 * rng.uniform()) * height;
    const double level = rng.uniform() - 0.5;
    const double edge = 0.5 + 2.0 * rng.uniform();
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dx = (x - cx) / rx;
        const double dy = (y - cy) / ry;
        const double d = (std::sqrt(dx * dx + dy * dy) - 1.0) * std::min(rx, ry) / edge;
        img(y, x) += level / (1.0 + std::exp(d));
      }
    }
  }

  const double lo = img.minCoeff();
  const double hi = img.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  return 0.05 + 0.9 * (img - lo) / span;
}

GrayImage add_gaussian_noise(const GrayImage& img, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  GrayImage out(img.rows(), img.cols());
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    out.data()[i] = std::clamp(img.data()[i] + sigma * rng.normal(), 0.0, 1.0);
  }
  return out;
}

}  // namespace synmix
