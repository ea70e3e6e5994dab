#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synmix/annotation.hpp"

namespace synmix {

struct ManifestEntry {
  ImageRef image;
  /// Empty when the image carries no labels yet.
  std::filesystem::path labels_path;
  bool model_annotated = false;
};

/// Dataset listing shared by every stage:
/// {version, images:[{id, path, width, height, provenance, labels_path}], meta}.
/// Relative paths are resolved against the manifest's directory.
struct Manifest {
  static constexpr int kVersion = 1;

  std::vector<ManifestEntry> images;
  nlohmann::json meta = nlohmann::json::object();

  nlohmann::json to_json() const;
  static Manifest from_json(const nlohmann::json& j);

  static Manifest load(const std::filesystem::path& path);
  /// Pretty-printed, trailing newline; byte-stable for equal content.
  void save(const std::filesystem::path& path) const;

  /// Copy with every relative path made absolute against `base`.
  Manifest resolved(const std::filesystem::path& base) const;

  /// Copy with every path rewritten relative to `dir` (for saving under it).
  Manifest relative_to(const std::filesystem::path& dir) const;
  const ManifestEntry* find(const std::string& id) const;
};

/// Loads the labels of every entry into LabeledImages.
std::vector<LabeledImage> load_labeled_images(const Manifest& manifest, int class_count);

nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes `dump(2)` plus newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace synmix
