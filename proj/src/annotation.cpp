#include "synmix/annotation.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace synmix {

std::string_view to_string(Provenance p) noexcept {
  return p == Provenance::Real ? "real" : "synthetic";
}

Provenance provenance_from_string(std::string_view s) {
  if (s == "real") return Provenance::Real;
  if (s == "synthetic") return Provenance::Synthetic;
  throw Error(Errc::SchemaViolation, fmt::format("unknown provenance '{}'", s));
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_number(std::string_view tok, int line_no) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw Error(Errc::MalformedLine, fmt::format("line {}: bad number '{}'", line_no, tok));
  }
  return v;
}

int parse_class(std::string_view tok, int line_no, int class_count) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw Error(Errc::MalformedLine, fmt::format("line {}: bad class id '{}'", line_no, tok));
  }
  if (v < 0 || v >= class_count) {
    throw Error(Errc::UnknownClass,
                fmt::format("line {}: class {} not in [0, {})", line_no, v, class_count));
  }
  return v;
}

void check_unit(double v, int line_no) {
  if (v < 0.0 || v > 1.0) {
    throw Error(Errc::CoordinateOutOfRange,
                fmt::format("line {}: coordinate {} outside [0, 1]", line_no, v));
  }
}

}  // namespace

std::vector<LabelEntry> parse_label_file(std::string_view text, int class_count) {
  std::vector<LabelEntry> entries;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    const auto fields = split_ws(line);
    if (fields.empty()) continue;
    const std::size_t n = fields.size();
    if (n != 5 && (n < 7 || n % 2 == 0)) {
      throw Error(Errc::MalformedLine, fmt::format("line {}: {} fields", line_no, n));
    }
    const int cls = parse_class(fields[0], line_no, class_count);
    std::vector<double> coords;
    coords.reserve(n - 1);
    for (std::size_t i = 1; i < n; ++i) coords.push_back(parse_number(fields[i], line_no));
    for (double c : coords) check_unit(c, line_no);

    if (n == 5) {
      if (coords[2] <= 0.0 || coords[3] <= 0.0) {
        throw Error(Errc::CoordinateOutOfRange,
                    fmt::format("line {}: box extent must be positive", line_no));
      }
      entries.emplace_back(BoxLabel{cls, BoundingBox{coords[0], coords[1], coords[2], coords[3]}});
    } else {
      PolygonAnnotation poly{cls, {}};
      for (std::size_t i = 0; i + 1 < coords.size(); i += 2) {
        poly.vertices.emplace_back(coords[i], coords[i + 1]);
      }
      entries.emplace_back(std::move(poly));
    }
  }
  return entries;
}

std::string emit_label_file(const std::vector<LabelEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    if (const auto* b = std::get_if<BoxLabel>(&e)) {
      out += fmt::format("{} {:.6f} {:.6f} {:.6f} {:.6f}\n", b->class_id, b->box.cx, b->box.cy,
                         b->box.w, b->box.h);
    } else {
      const auto& p = std::get<PolygonAnnotation>(e);
      out += fmt::format("{}", p.class_id);
      for (const auto& v : p.vertices) out += fmt::format(" {:.6f} {:.6f}", v.x(), v.y());
      out += '\n';
    }
  }
  return out;
}

std::vector<LabelEntry> read_label_file(const std::filesystem::path& path, int class_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open label file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_label_file(ss.str(), class_count);
}

void write_label_file(const std::filesystem::path& path, const std::vector<LabelEntry>& entries) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write label file " + path.string());
  out << emit_label_file(entries);
}

std::vector<Instance> to_instances(const std::vector<LabelEntry>& entries) {
  std::vector<Instance> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    if (const auto* b = std::get_if<BoxLabel>(&e)) {
      out.push_back(Instance{b->class_id, b->box, std::nullopt});
    } else {
      const auto& p = std::get<PolygonAnnotation>(e);
      out.push_back(Instance{p.class_id, bbox_from_polygon(p), p});
    }
  }
  return out;
}

std::vector<LabelEntry> to_entries(const std::vector<Instance>& instances, bool prefer_polygons) {
  std::vector<LabelEntry> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) {
    if (prefer_polygons && inst.polygon) {
      PolygonAnnotation p = *inst.polygon;
      p.class_id = inst.class_id;
      out.emplace_back(std::move(p));
    } else {
      out.emplace_back(BoxLabel{inst.class_id, inst.box});
    }
  }
  return out;
}

BoundingBox bbox_from_polygon(const PolygonAnnotation& p) {
  if (p.vertices.size() < 3) {
    throw Error(Errc::DegenerateExtent, "polygon needs at least 3 vertices");
  }
  Eigen::Vector2d lo = p.vertices.front();
  Eigen::Vector2d hi = lo;
  for (const auto& v : p.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  if (hi.x() <= lo.x() || hi.y() <= lo.y()) {
    throw Error(Errc::DegenerateExtent, "polygon has zero width or height");
  }
  return BoundingBox::from_corners(lo.x(), lo.y(), hi.x(), hi.y());
}

PolygonAnnotation polygon_from_bbox(int class_id, const BoundingBox& box) {
  const double x0 = std::clamp(box.x_min(), 0.0, 1.0), x1 = std::clamp(box.x_max(), 0.0, 1.0);
  const double y0 = std::clamp(box.y_min(), 0.0, 1.0), y1 = std::clamp(box.y_max(), 0.0, 1.0);
  return PolygonAnnotation{class_id, {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
}

BitMask rasterize_polygon(const PolygonAnnotation& p, int width, int height) {
  if (width <= 0 || height <= 0) {
    throw Error(Errc::ZeroDimension, fmt::format("raster {}x{}", width, height));
  }
  BitMask mask = BitMask::Zero(height, width);
  const std::size_t n = p.vertices.size();
  std::vector<double> xs;
  for (int y = 0; y < height; ++y) {
    const double yc = (y + 0.5) / height;
    xs.clear();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const auto& a = p.vertices[i];
      const auto& b = p.vertices[j];
      if ((a.y() > yc) != (b.y() > yc)) {
        xs.push_back(a.x() + (yc - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
      }
    }
    std::sort(xs.begin(), xs.end());
    // Even-odd: a centre is inside iff an odd number of crossings lie to its right.
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const double lo = xs[k] * width - 0.5;
      const double hi = xs[k + 1] * width - 0.5;
      const int x0 = std::max(0, static_cast<int>(std::ceil(lo)));
      const int x1 = std::min(width - 1, static_cast<int>(std::ceil(hi)) - 1);
      for (int x = x0; x <= x1; ++x) mask(y, x) ^= 1;
    }
  }
  return mask;
}

std::optional<Eigen::Array4i> mask_extent(const BitMask& mask) {
  int x0 = static_cast<int>(mask.cols()), y0 = static_cast<int>(mask.rows()), x1 = -1, y1 = -1;
  for (Eigen::Index y = 0; y < mask.rows(); ++y) {
    for (Eigen::Index x = 0; x < mask.cols(); ++x) {
      if (mask(y, x)) {
        x0 = std::min(x0, static_cast<int>(x));
        x1 = std::max(x1, static_cast<int>(x));
        y0 = std::min(y0, static_cast<int>(y));
        y1 = std::max(y1, static_cast<int>(y));
      }
    }
  }
  if (x1 < 0) return std::nullopt;
  return Eigen::Array4i(x0, y0, x1 - x0 + 1, y1 - y0 + 1);
}

ClassMap::ClassMap(std::vector<std::string> source_classes, std::vector<std::string> target_classes,
                   std::map<std::string, std::string> mapping)
    : source_(std::move(source_classes)),
      target_(std::move(target_classes)),
      mapping_(std::move(mapping)) {
  for (const auto& [src, dst] : mapping_) {
    if (std::find(target_.begin(), target_.end(), dst) == target_.end()) {
      throw Error(Errc::ConfigInvalid, fmt::format("class map target '{}' not in target list", dst));
    }
  }
}

ClassMap ClassMap::botanical() {
  return ClassMap({"Sugar beet", "Cirsium", "Convolvulus", "Fallopia", "Echinochloa"},
                  {"sugar_beet", "monocot", "dicot"},
                  {{"Sugar beet", "sugar_beet"},
                   {"Cirsium", "dicot"},
                   {"Convolvulus", "dicot"},
                   {"Fallopia", "dicot"},
                   {"Echinochloa", "monocot"}});
}

ClassMap ClassMap::from_json(const nlohmann::json& j) {
  try {
    return ClassMap(j.at("source_classes").get<std::vector<std::string>>(),
                    j.at("target_classes").get<std::vector<std::string>>(),
                    j.at("mapping").get<std::map<std::string, std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("class map: ") + e.what());
  }
}

nlohmann::json ClassMap::to_json() const {
  return {{"source_classes", source_}, {"target_classes", target_}, {"mapping", mapping_}};
}

int ClassMap::map(int source_id) const {
  if (source_id < 0 || source_id >= static_cast<int>(source_.size())) {
    throw Error(Errc::UnknownClass, fmt::format("source class id {}", source_id));
  }
  const auto& name = source_[static_cast<std::size_t>(source_id)];
  auto it = mapping_.find(name);
  if (it == mapping_.end()) throw Error(Errc::UnmappedClass, name);
  return static_cast<int>(std::find(target_.begin(), target_.end(), it->second) - target_.begin());
}

LabeledImage remap_classes(const LabeledImage& image, const ClassMap& map) {
  LabeledImage out = image;
  for (auto& inst : out.instances) {
    inst.class_id = map.map(inst.class_id);
    if (inst.polygon) inst.polygon->class_id = inst.class_id;
  }
  return out;
}

}  // namespace synmix
