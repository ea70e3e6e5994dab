#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synmix/adapter.hpp"
#include "synmix/annotation.hpp"
#include "synmix/detect.hpp"
#include "synmix/manifest.hpp"

namespace synmix {

struct GenerationRequest {
  std::string prompt;
  int steps = 50;
  double guidance = 7.5;
  std::string scheduler = "euler-ancestral";
  std::uint64_t seed = 0;
  int width = 640;
  int height = 640;
  int count = 1;

  /// Throws InvalidSpec for steps < 1, guidance <= 0, count < 1 or empty size.
  void validate() const;
  nlohmann::json to_json() const;
  static GenerationRequest from_json(const nlohmann::json& j);
};

/// Id of the index-th image of a request: "syn-<seed hex>-<index>".
std::string synthetic_image_id(std::uint64_t seed, int index);

/// Replaces every box with the polygon returned by the segmenter. Each image
/// is one adapter call with all of its boxes. Boxes without a usable mask
/// and images whose call fails keep their box and raise a warning.
/// Labels are written to output_dir/labels/<id>.txt.
Manifest segment_dataset(const Manifest& manifest, int class_count, const AdapterSpec& segmenter,
                         const std::filesystem::path& output_dir, int workers = 1);

/// Every request is validated before any adapter runs. Images land in
/// output_dir/images/<id>.png with a <id>.json sidecar holding the
/// generation parameters.
std::vector<ManifestEntry> generate_images(std::span<const GenerationRequest> requests,
                                           const AdapterSpec& generator,
                                           const std::filesystem::path& output_dir);

/// Detections at or above `threshold` become instances; results are flagged
/// model-annotated. Images without detections are kept empty with a warning.
std::vector<LabeledImage> annotate_images(std::span<const ImageRef> images, int class_count,
                                          const AdapterSpec& annotator,
                                          const std::filesystem::path& output_dir,
                                          double threshold = 0.25);

/// Detections from a detector adapter for one training plan.
std::vector<Detection> detect_with_adapter(const AdapterSpec& detector, const nlohmann::json& request,
                                           const std::filesystem::path& output_dir);

/// Sidecar path of a generated image (same stem, .json).
std::filesystem::path sidecar_path(const std::filesystem::path& image_path);

}  // namespace synmix
