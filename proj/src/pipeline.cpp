#include "synmix/pipeline.hpp"

#include <cmath>

#include <fmt/format.h>

#include "synmix/error.hpp"
#include "synmix/log.hpp"
#include "synmix/parallel.hpp"

namespace synmix {
namespace fs = std::filesystem;

namespace {

nlohmann::json image_json(const ImageRef& img) {
  return {{"id", img.id},
          {"path", fs::absolute(img.path).lexically_normal().string()},
          {"width", img.width},
          {"height", img.height}};
}

[[noreturn]] void schema_error(std::string_view role, const std::string& what) {
  throw Error(Errc::SchemaViolation, fmt::format("{} response: {}", role, what));
}

std::vector<Eigen::Vector2d> parse_polygon(const nlohmann::json& j) {
  if (!j.is_array() || j.size() < 3) schema_error("segmenter", "polygon needs 3 or more vertices");
  std::vector<Eigen::Vector2d> out;
  for (const auto& v : j) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      schema_error("segmenter", "vertex must be [x, y]");
    }
    const double x = v[0].get<double>(), y = v[1].get<double>();
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
      schema_error("segmenter", "vertex outside [0, 1]");
    }
    out.emplace_back(x, y);
  }
  return out;
}

}  // namespace

void GenerationRequest::validate() const {
  if (steps < 1) throw Error(Errc::InvalidSpec, fmt::format("steps = {}, need >= 1", steps));
  if (!(guidance > 0.0)) throw Error(Errc::InvalidSpec, "guidance must be positive");
  if (count < 1) throw Error(Errc::InvalidSpec, "count must be >= 1");
  if (width <= 0 || height <= 0) throw Error(Errc::InvalidSpec, "image size must be positive");
}

nlohmann::json GenerationRequest::to_json() const {
  return {{"prompt", prompt}, {"steps", steps},   {"guidance", guidance}, {"scheduler", scheduler},
          {"seed", seed},     {"width", width},   {"height", height},     {"count", count}};
}

GenerationRequest GenerationRequest::from_json(const nlohmann::json& j) {
  GenerationRequest r;
  try {
    r.prompt = j.at("prompt").get<std::string>();
    r.steps = j.value("steps", r.steps);
    r.guidance = j.value("guidance", r.guidance);
    r.scheduler = j.value("scheduler", r.scheduler);
    r.seed = j.value("seed", r.seed);
    r.width = j.value("width", r.width);
    r.height = j.value("height", r.height);
    r.count = j.value("count", r.count);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("generation request: ") + e.what());
  }
  return r;
}

std::string synthetic_image_id(std::uint64_t seed, int index) {
  return fmt::format("syn-{:016x}-{:03d}", seed, index);
}

fs::path sidecar_path(const fs::path& image_path) {
  fs::path p = image_path;
  p.replace_extension(".json");
  return p;
}

Manifest segment_dataset(const Manifest& manifest, int class_count, const AdapterSpec& segmenter,
                         const fs::path& output_dir, int workers) {
  if (segmenter.role != AdapterRole::Segmenter) {
    throw Error(Errc::ConfigInvalid, "segment_dataset needs a segmenter adapter");
  }
  Manifest out = manifest;
  std::vector<std::vector<LabelEntry>> labels(manifest.images.size());
  for (std::size_t i = 0; i < manifest.images.size(); ++i) {
    const auto& e = manifest.images[i];
    if (!e.labels_path.empty()) labels[i] = read_label_file(e.labels_path, class_count);
  }

  parallel_for(manifest.images.size(), workers, [&](std::size_t i) {
    const auto& e = manifest.images[i];
    auto& entries = labels[i];
    nlohmann::json boxes = nlohmann::json::array();
    std::vector<std::size_t> box_slots;
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (const auto* b = std::get_if<BoxLabel>(&entries[k])) {
        boxes.push_back({{"index", box_slots.size()},
                         {"class_id", b->class_id},
                         {"cx", b->box.cx},
                         {"cy", b->box.cy},
                         {"w", b->box.w},
                         {"h", b->box.h}});
        box_slots.push_back(k);
      }
    }
    if (box_slots.empty()) return;

    nlohmann::json response;
    try {
      response = run_adapter(segmenter, {{"image", image_json(e.image)}, {"boxes", boxes}},
                             output_dir / "adapter" / e.image.id);
      if (!response.contains("masks") || !response["masks"].is_array()) {
        schema_error("segmenter", "missing 'masks' array");
      }
    } catch (const Error& err) {
      warn(fmt::format("segmentation of '{}' failed, keeping boxes: {}", e.image.id, err.what()));
      return;
    }

    std::vector<std::optional<std::vector<Eigen::Vector2d>>> polys(box_slots.size());
    for (const auto& m : response["masks"]) {
      try {
        const auto idx = m.at("box_index").get<std::size_t>();
        if (idx >= box_slots.size()) schema_error("segmenter", "box_index out of range");
        polys[idx] = parse_polygon(m.at("polygon"));
      } catch (const nlohmann::json::exception& ex) {
        warn(fmt::format("segmentation of '{}': malformed mask record: {}", e.image.id, ex.what()));
      } catch (const Error& err) {
        warn(fmt::format("segmentation of '{}': {}", e.image.id, err.what()));
      }
    }
    for (std::size_t b = 0; b < box_slots.size(); ++b) {
      const int cls = std::get<BoxLabel>(entries[box_slots[b]]).class_id;
      if (!polys[b]) {
        warn(fmt::format("segmentation of '{}' box {} returned no mask, keeping box", e.image.id, b));
        continue;
      }
      entries[box_slots[b]] = PolygonAnnotation{cls, std::move(*polys[b])};
    }
  });

  for (std::size_t i = 0; i < out.images.size(); ++i) {
    auto& e = out.images[i];
    if (e.labels_path.empty()) continue;
    const fs::path path = output_dir / "labels" / (e.image.id + ".txt");
    write_label_file(path, labels[i]);
    e.labels_path = path;
  }
  return out;
}

std::vector<ManifestEntry> generate_images(std::span<const GenerationRequest> requests,
                                           const AdapterSpec& generator, const fs::path& output_dir) {
  if (generator.role != AdapterRole::Generator) {
    throw Error(Errc::ConfigInvalid, "generate_images needs a generator adapter");
  }
  for (const auto& r : requests) r.validate();

  std::vector<ManifestEntry> out;
  for (std::size_t ri = 0; ri < requests.size(); ++ri) {
    const auto& r = requests[ri];
    const fs::path scratch = output_dir / "adapter" / fmt::format("{:016x}", r.seed);
    const auto response = run_adapter(generator, r.to_json(), scratch);
    if (!response.contains("images") || !response["images"].is_array() ||
        response["images"].size() != static_cast<std::size_t>(r.count)) {
      schema_error("generator", fmt::format("expected {} images", r.count));
    }
    for (const auto& item : response["images"]) {
      int index = 0;
      fs::path file;
      try {
        index = item.at("index").get<int>();
        file = scratch / item.at("file").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        schema_error("generator", e.what());
      }
      if (index < 0 || index >= r.count) schema_error("generator", "image index out of range");
      if (!fs::exists(file)) schema_error("generator", "missing image " + file.string());
      const auto [w, h] = png_dimensions(file);
      if (w != r.width || h != r.height) {
        schema_error("generator", fmt::format("image is {}x{}, requested {}x{}", w, h, r.width,
                                              r.height));
      }
      ManifestEntry e;
      e.image.id = synthetic_image_id(r.seed, index);
      e.image.path = output_dir / "images" / (e.image.id + ".png");
      e.image.width = w;
      e.image.height = h;
      e.image.provenance = Provenance::Synthetic;
      fs::create_directories(e.image.path.parent_path());
      fs::copy_file(file, e.image.path, fs::copy_options::overwrite_existing);
      nlohmann::json sidecar = r.to_json();
      sidecar.erase("count");
      sidecar["id"] = e.image.id;
      sidecar["index"] = index;
      sidecar["source"] = "generator";
      write_json_file(sidecar_path(e.image.path), sidecar);
      out.push_back(std::move(e));
    }
  }
  return out;
}

std::vector<LabeledImage> annotate_images(std::span<const ImageRef> images, int class_count,
                                          const AdapterSpec& annotator, const fs::path& output_dir,
                                          double threshold) {
  if (annotator.role != AdapterRole::Annotator) {
    throw Error(Errc::ConfigInvalid, "annotate_images needs an annotator adapter");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(Errc::InvalidSpec, "confidence threshold must lie in [0, 1]");
  }
  nlohmann::json list = nlohmann::json::array();
  for (const auto& img : images) {
    if (!fs::exists(img.path)) throw Error(Errc::IoFailure, "missing image " + img.path.string());
    list.push_back(image_json(img));
  }
  const auto response = run_adapter(
      annotator, {{"images", list}, {"class_count", class_count}}, output_dir / "adapter");
  if (!response.contains("detections") || !response["detections"].is_array()) {
    schema_error("annotator", "missing 'detections' array");
  }

  std::vector<LabeledImage> out;
  std::map<std::string, std::size_t> index;
  for (const auto& img : images) {
    index[img.id] = out.size();
    out.push_back({img, {}, true});
  }
  for (const auto& d : response["detections"]) {
    Detection det;
    try {
      det.image_id = d.at("image_id").get<std::string>();
      det.class_id = d.at("class_id").get<int>();
      det.confidence = d.at("confidence").get<double>();
      const auto b = d.at("box").get<std::vector<double>>();
      if (b.size() != 4) schema_error("annotator", "box must be [cx, cy, w, h]");
      det.box = {b[0], b[1], b[2], b[3]};
    } catch (const nlohmann::json::exception& e) {
      schema_error("annotator", e.what());
    }
    const auto it = index.find(det.image_id);
    if (it == index.end()) schema_error("annotator", "unknown image id " + det.image_id);
    if (det.class_id < 0 || det.class_id >= class_count) {
      schema_error("annotator", fmt::format("class {} out of range", det.class_id));
    }
    if (!(det.confidence >= 0.0 && det.confidence <= 1.0) || !(det.box.w > 0 && det.box.h > 0)) {
      schema_error("annotator", "confidence or box out of range");
    }
    if (det.confidence < threshold) continue;
    out[it->second].instances.push_back({det.class_id, det.box, std::nullopt});
  }
  for (const auto& li : out) {
    if (li.instances.empty()) warn(fmt::format("annotator found nothing in '{}'", li.image.id));
  }
  return out;
}

std::vector<Detection> detect_with_adapter(const AdapterSpec& detector,
                                           const nlohmann::json& request, const fs::path& output_dir) {
  if (detector.role != AdapterRole::Detector) {
    throw Error(Errc::ConfigInvalid, "detection needs a detector adapter");
  }
  const auto response = run_adapter(detector, request, output_dir);
  std::string file;
  try {
    file = response.at("detections_file").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    schema_error("detector", e.what());
  }
  try {
    return read_detections(output_dir / file);
  } catch (const Error& e) {
    schema_error("detector", e.what());
  }
}

}  // namespace synmix
