#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "synmix/error.hpp"
#include "synmix/image.hpp"

namespace synmix {

enum class Provenance { Real, Synthetic };

std::string_view to_string(Provenance p) noexcept;
Provenance provenance_from_string(std::string_view s);

struct ImageRef {
  std::string id;
  std::filesystem::path path;
  int width = 0;
  int height = 0;
  Provenance provenance = Provenance::Real;
};

/// Axis-aligned box in normalized centre/size form.
template <typename Scalar>
struct Box {
  Scalar cx{}, cy{}, w{}, h{};

  Scalar x_min() const { return cx - w / 2; }
  Scalar x_max() const { return cx + w / 2; }
  Scalar y_min() const { return cy - h / 2; }
  Scalar y_max() const { return cy + h / 2; }
  Scalar area() const { return w * h; }

  static Box from_corners(Scalar x0, Scalar y0, Scalar x1, Scalar y1) {
    return Box{(x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0};
  }

  friend bool operator==(const Box&, const Box&) = default;
};

using BoundingBox = Box<double>;

struct PolygonAnnotation {
  int class_id = 0;
  std::vector<Eigen::Vector2d> vertices;
};

struct BoxLabel {
  int class_id = 0;
  BoundingBox box;
};

/// One line of a label file.
using LabelEntry = std::variant<BoxLabel, PolygonAnnotation>;

struct Instance {
  int class_id = 0;
  BoundingBox box;
  std::optional<PolygonAnnotation> polygon;
};

struct LabeledImage {
  ImageRef image;
  std::vector<Instance> instances;
  /// Labels produced by a model rather than a human annotator.
  bool model_annotated = false;
};

// --- label text format -----------------------------------------------------

/// Parses whitespace-separated normalized labels: `class cx cy w h` for boxes,
/// `class x1 y1 ... xn yn` (n >= 3) for polygons.
std::vector<LabelEntry> parse_label_file(std::string_view text, int class_count);

/// Canonical form: 6-decimal fixed precision, one entry per line.
std::string emit_label_file(const std::vector<LabelEntry>& entries);

std::vector<LabelEntry> read_label_file(const std::filesystem::path& path, int class_count);
void write_label_file(const std::filesystem::path& path, const std::vector<LabelEntry>& entries);

/// Instances view of parsed labels (polygons get their bounding rectangle).
std::vector<Instance> to_instances(const std::vector<LabelEntry>& entries);
std::vector<LabelEntry> to_entries(const std::vector<Instance>& instances, bool prefer_polygons);

// --- geometry --------------------------------------------------------------

/// Axis-aligned bounding rectangle of the vertices. Throws DegenerateExtent
/// when the vertices are colinear along an axis.
BoundingBox bbox_from_polygon(const PolygonAnnotation& p);

/// Rectangle with vertices in clockwise image order starting top-left.
PolygonAnnotation polygon_from_bbox(int class_id, const BoundingBox& box);

/// Even-odd fill sampled at pixel centres.
BitMask rasterize_polygon(const PolygonAnnotation& p, int width, int height);

/// Bounding rectangle of the set pixels as (x0, y0, w, h), or nullopt if empty.
std::optional<Eigen::Array4i> mask_extent(const BitMask& mask);

/// Round-half-up of num / den for non-negative integers.
constexpr long long div_round_half_up(long long num, long long den) {
  return (2 * num + den) / (2 * den);
}

/// Fits `crop` into a target x target tile. Content that already fits is
/// centred unscaled; larger content is shrunk (nearest neighbour) so its long
/// side equals target. Remaining area is zero.
template <typename Scalar>
Image<Scalar> pad_to_square(const Image<Scalar>& crop, int target = 512) {
  const long long w = crop.cols();
  const long long h = crop.rows();
  if (w == 0 || h == 0) throw Error(Errc::EmptyCrop, "crop has no pixels");
  if (target <= 0) throw Error(Errc::ZeroDimension, "target side must be positive");

  long long out_w = w, out_h = h;
  const long long long_side = std::max(w, h);
  if (long_side > target) {
    out_w = std::max(1LL, div_round_half_up(w * target, long_side));
    out_h = std::max(1LL, div_round_half_up(h * target, long_side));
  }

  Image<Scalar> out = Image<Scalar>::Zero(target, target);
  const long long off_x = (target - out_w) / 2;
  const long long off_y = (target - out_h) / 2;
  for (long long y = 0; y < out_h; ++y) {
    const long long sy = ((2 * y + 1) * h) / (2 * out_h);
    for (long long x = 0; x < out_w; ++x) {
      const long long sx = ((2 * x + 1) * w) / (2 * out_w);
      out(off_y + y, off_x + x) = crop(sy, sx);
    }
  }
  return out;
}

// --- class remapping -------------------------------------------------------

/// Total mapping from source class names to a fixed target class list.
class ClassMap {
 public:
  ClassMap(std::vector<std::string> source_classes, std::vector<std::string> target_classes,
           std::map<std::string, std::string> mapping);

  /// Sugar beet plus the four weed species onto {sugar_beet, monocot, dicot}.
  static ClassMap botanical();

  static ClassMap from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  const std::vector<std::string>& source_classes() const { return source_; }
  const std::vector<std::string>& target_classes() const { return target_; }

  /// Target id for a source id; throws UnknownClass / UnmappedClass.
  int map(int source_id) const;

 private:
  std::vector<std::string> source_;
  std::vector<std::string> target_;
  std::map<std::string, std::string> mapping_;
};

LabeledImage remap_classes(const LabeledImage& image, const ClassMap& map);

}  // namespace synmix
