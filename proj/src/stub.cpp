#include "synmix/stub.hpp"

#include <algorithm>
#include <iostream>

#include <fmt/format.h>

#include "synmix/adapter.hpp"
#include "synmix/error.hpp"
#include "synmix/image.hpp"
#include "synmix/random.hpp"

namespace synmix::stub {
namespace fs = std::filesystem;

namespace {

nlohmann::json response_for(std::string_view role) {
  return {{"schema", kResponseSchema}, {"role", role}};
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

BoundingBox clipped(double cx, double cy, double w, double h) {
  const double x0 = clamp01(cx - w / 2), x1 = clamp01(cx + w / 2);
  const double y0 = clamp01(cy - h / 2), y1 = clamp01(cy + h / 2);
  return BoundingBox::from_corners(x0, y0, std::max(x1, x0 + 1e-3), std::max(y1, y0 + 1e-3));
}

int segmenter(const nlohmann::json& req, const fs::path& out) {
  const auto& img = req.at("image");
  const int width = img.at("width").get<int>(), height = img.at("height").get<int>();
  nlohmann::json masks = nlohmann::json::array();
  for (const auto& b : req.at("boxes")) {
    const auto index = b.at("index").get<std::size_t>();
    const BoundingBox box{b.at("cx").get<double>(), b.at("cy").get<double>(),
                          b.at("w").get<double>(), b.at("h").get<double>()};
    const auto poly = polygon_from_bbox(b.at("class_id").get<int>(), box);
    nlohmann::json vertices = nlohmann::json::array();
    for (const auto& v : poly.vertices) vertices.push_back({v.x(), v.y()});
    const std::string file = fmt::format("mask_{:03d}.png", index);
    write_mask_png(out / file, rasterize_polygon(poly, width, height));
    masks.push_back({{"box_index", index}, {"polygon", vertices}, {"mask", file}});
  }
  auto resp = response_for("segmenter");
  resp["masks"] = std::move(masks);
  write_json_file(out / "response.json", resp);
  return 0;
}

int generator(const nlohmann::json& req, const fs::path& out) {
  const auto seed = req.at("seed").get<std::uint64_t>();
  const int count = req.at("count").get<int>();
  const int width = req.at("width").get<int>(), height = req.at("height").get<int>();
  const auto prompt_hash = hash_string(req.at("prompt").get<std::string>());
  nlohmann::json images = nlohmann::json::array();
  for (int i = 0; i < count; ++i) {
    const std::string file = fmt::format("image_{:03d}.png", i);
    const auto s = derive_seed(seed, {prompt_hash, static_cast<std::uint64_t>(i)});
    write_gray_png(out / file, render_scene(s, width, height));
    images.push_back({{"index", i}, {"file", file}});
  }
  auto resp = response_for("generator");
  resp["images"] = std::move(images);
  write_json_file(out / "response.json", resp);
  return 0;
}

int annotator(const nlohmann::json& req, const fs::path& out) {
  const int class_count = req.at("class_count").get<int>();
  nlohmann::json dets = nlohmann::json::array();
  for (const auto& img : req.at("images")) {
    for (const auto& d : annotator_table(img.at("id").get<std::string>(), class_count)) {
      dets.push_back({{"image_id", d.image_id},
                      {"class_id", d.class_id},
                      {"confidence", d.confidence},
                      {"box", {d.box.cx, d.box.cy, d.box.w, d.box.h}}});
    }
  }
  auto resp = response_for("annotator");
  resp["detections"] = std::move(dets);
  write_json_file(out / "response.json", resp);
  return 0;
}

int detector(const nlohmann::json& req, const fs::path& out) {
  const int class_count = req.value("class_count", 3);
  const Manifest test = Manifest::load(req.at("test_manifest").get<std::string>());
  double p = 0.0;
  if (req.contains("train_manifest")) {
    const Manifest train = Manifest::load(req.at("train_manifest").get<std::string>());
    if (train.meta.contains("plan")) p = train.meta["plan"].value("p", 0.0);
  }
  const auto images = load_labeled_images(test, class_count);
  const auto dets = detector_output(images, req.at("model").get<std::string>(), p,
                                    req.value("seed", std::uint64_t{0}));
  write_text_file(out / "detections.txt", emit_detections(dets));
  auto resp = response_for("detector");
  resp["detections_file"] = "detections.txt";
  write_json_file(out / "response.json", resp);
  return 0;
}

}  // namespace

std::vector<Detection> annotator_table(const std::string& image_id, int class_count) {
  Rng rng(hash_string(image_id));
  const int n = static_cast<int>(rng.below(4));
  constexpr double kConfidences[] = {0.91, 0.12, 0.64};
  std::vector<Detection> out;
  for (int k = 0; k < n; ++k) {
    Detection d;
    d.image_id = image_id;
    d.class_id = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, class_count))));
    d.confidence = kConfidences[k];
    const double w = 0.1 + 0.3 * rng.uniform(), h = 0.1 + 0.3 * rng.uniform();
    const double cx = w / 2 + (1 - w) * rng.uniform(), cy = h / 2 + (1 - h) * rng.uniform();
    d.box = {cx, cy, w, h};
    out.push_back(d);
  }
  return out;
}

std::vector<Detection> detector_output(std::span<const LabeledImage> test_images,
                                       const std::string& model, double p, std::uint64_t seed) {
  const std::uint64_t model_hash = hash_string(model);
  const double skill = 0.85 + 0.1 * static_cast<double>(model_hash % 1000) / 1000.0;
  const double miss = std::clamp(0.04 + 0.25 * p + 0.5 * (1.0 - skill), 0.0, 0.9);
  const double jitter = 0.02 + 0.06 * p;
  Rng rng(derive_seed(seed, {model_hash, static_cast<std::uint64_t>(std::llround(p * 1e6))}));
  std::vector<Detection> out;
  for (const auto& img : test_images) {
    for (const auto& inst : img.instances) {
      if (rng.uniform() < miss) continue;
      const auto& b = inst.box;
      Detection d;
      d.image_id = img.image.id;
      d.class_id = inst.class_id;
      d.confidence = 0.35 + 0.6 * rng.uniform();
      d.box = clipped(b.cx + jitter * b.w * rng.normal(), b.cy + jitter * b.h * rng.normal(),
                      b.w * (1 + jitter * rng.normal()), b.h * (1 + jitter * rng.normal()));
      out.push_back(d);
    }
    const int false_positives = static_cast<int>(rng.below(3));
    for (int k = 0; k < false_positives; ++k) {
      Detection d;
      d.image_id = img.image.id;
      d.class_id = img.instances.empty() ? 0 : img.instances[rng.below(img.instances.size())].class_id;
      d.confidence = 0.05 + 0.5 * rng.uniform();
      const double w = 0.05 + 0.2 * rng.uniform(), h = 0.05 + 0.2 * rng.uniform();
      d.box = clipped(w / 2 + (1 - w) * rng.uniform(), h / 2 + (1 - h) * rng.uniform(), w, h);
      out.push_back(d);
    }
  }
  return out;
}

int run(const std::string& role, const fs::path& request_path, const fs::path& output_dir) {
  try {
    const auto req = read_json_file(request_path);
    if (req.value("schema", "") != kRequestSchema || req.value("role", "") != role) {
      std::cerr << "stub: request schema or role mismatch\n";
      return 2;
    }
    fs::create_directories(output_dir);
    if (role == "segmenter") return segmenter(req, output_dir);
    if (role == "generator") return generator(req, output_dir);
    if (role == "annotator") return annotator(req, output_dir);
    if (role == "detector") return detector(req, output_dir);
    std::cerr << "stub: unknown role '" << role << "'\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "stub: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace synmix::stub
