#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synmix/detect.hpp"
#include "synmix/manifest.hpp"

namespace synmix::stub {

/// Fixed per-image table of the stub annotator: up to three detections
/// derived from the image id, one of them always below 0.25 confidence.
std::vector<Detection> annotator_table(const std::string& image_id, int class_count);

/// Simulated detector output for the test images: each truth is found with
/// a jittered box or missed, plus a few false positives. Quality depends on
/// the model name and degrades with the synthetic share p.
std::vector<Detection> detector_output(std::span<const LabeledImage> test_images,
                                       const std::string& model, double p, std::uint64_t seed);

/// Handles one request for `role` and writes response.json into output_dir.
/// Returns the process exit status.
int run(const std::string& role, const std::filesystem::path& request_path,
        const std::filesystem::path& output_dir);

}  // namespace synmix::stub
