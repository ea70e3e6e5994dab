#include "synmix/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace synmix {

nlohmann::json Manifest::to_json() const {
  nlohmann::json images_json = nlohmann::json::array();
  for (const auto& e : images) {
    nlohmann::json item = {{"id", e.image.id},
                           {"path", e.image.path.generic_string()},
                           {"width", e.image.width},
                           {"height", e.image.height},
                           {"provenance", std::string(to_string(e.image.provenance))},
                           {"labels_path", e.labels_path.generic_string()}};
    if (e.model_annotated) item["model_annotated"] = true;
    images_json.push_back(std::move(item));
  }
  return {{"version", kVersion}, {"images", std::move(images_json)}, {"meta", meta}};
}

Manifest Manifest::from_json(const nlohmann::json& j) {
  Manifest m;
  try {
    if (j.at("version").get<int>() != kVersion) {
      throw Error(Errc::SchemaViolation, fmt::format("manifest version {}", j.at("version").dump()));
    }
    std::set<std::string> seen;
    for (const auto& item : j.at("images")) {
      ManifestEntry e;
      e.image.id = item.at("id").get<std::string>();
      e.image.path = item.at("path").get<std::string>();
      e.image.width = item.at("width").get<int>();
      e.image.height = item.at("height").get<int>();
      e.image.provenance = provenance_from_string(item.at("provenance").get<std::string>());
      e.labels_path = item.value("labels_path", std::string{});
      e.model_annotated = item.value("model_annotated", false);
      if (e.image.width <= 0 || e.image.height <= 0) {
        throw Error(Errc::SchemaViolation, "image '" + e.image.id + "' has non-positive size");
      }
      if (!seen.insert(e.image.id).second) throw Error(Errc::DuplicateId, e.image.id);
      m.images.push_back(std::move(e));
    }
    if (j.contains("meta")) m.meta = j.at("meta");
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaViolation, std::string("manifest: ") + e.what());
  }
  return m;
}

Manifest Manifest::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path)).resolved(path.parent_path());
}

void Manifest::save(const std::filesystem::path& path) const { write_json_file(path, to_json()); }

Manifest Manifest::resolved(const std::filesystem::path& base) const {
  Manifest out = *this;
  for (auto& e : out.images) {
    if (e.image.path.is_relative()) e.image.path = base / e.image.path;
    if (!e.labels_path.empty() && e.labels_path.is_relative()) e.labels_path = base / e.labels_path;
  }
  return out;
}

Manifest Manifest::relative_to(const std::filesystem::path& dir) const {
  namespace fs = std::filesystem;
  const fs::path base = fs::absolute(dir).lexically_normal();
  auto rel = [&](const fs::path& p) {
    return p.empty() ? p : fs::absolute(p).lexically_normal().lexically_relative(base);
  };
  Manifest out = *this;
  for (auto& e : out.images) {
    e.image.path = rel(e.image.path);
    e.labels_path = rel(e.labels_path);
  }
  return out;
}

const ManifestEntry* Manifest::find(const std::string& id) const {
  for (const auto& e : images) {
    if (e.image.id == id) return &e;
  }
  return nullptr;
}

std::vector<LabeledImage> load_labeled_images(const Manifest& manifest, int class_count) {
  std::vector<LabeledImage> out;
  out.reserve(manifest.images.size());
  for (const auto& e : manifest.images) {
    LabeledImage li{e.image, {}, e.model_annotated};
    if (!e.labels_path.empty()) li.instances = to_instances(read_label_file(e.labels_path, class_count));
    out.push_back(std::move(li));
  }
  return out;
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::SchemaViolation, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::IoFailure, "short write to " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace synmix
