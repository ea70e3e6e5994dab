// Writes the bundled example experiment: 40 real images with box labels, a
// generated and model-annotated synthetic pool, offline detection files for
// two detectors and an experiment config.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "synmix/error.hpp"
#include "synmix/experiment.hpp"
#include "synmix/image.hpp"
#include "synmix/manifest.hpp"
#include "synmix/pipeline.hpp"
#include "synmix/random.hpp"
#include "synmix/stub.hpp"

namespace fs = std::filesystem;
using namespace synmix;

namespace {

constexpr int kClassCount = 3;
constexpr int kSide = 128;
const char* kPrompt = "A Photo of HoPla Echinochloa, HoPla Plot in the Background";

std::vector<LabelEntry> random_boxes(Rng& rng) {
  std::vector<LabelEntry> out;
  const int n = 1 + static_cast<int>(rng.below(4));
  for (int k = 0; k < n; ++k) {
    const double w = 0.1 + 0.25 * rng.uniform(), h = 0.1 + 0.25 * rng.uniform();
    const double cx = w / 2 + (1 - w) * rng.uniform(), cy = h / 2 + (1 - h) * rng.uniform();
    out.emplace_back(BoxLabel{static_cast<int>(rng.below(kClassCount)), {cx, cy, w, h}});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Write the bundled fixture experiment"};
  std::string out_dir = "fixtures";
  std::uint64_t seed = 7;
  int real_count = 40;
  int synthetic_count = 30;
  app.add_option("-o,--output", out_dir)->capture_default_str();
  app.add_option("--seed", seed)->capture_default_str();
  app.add_option("--real", real_count)->capture_default_str();
  app.add_option("--synthetic", synthetic_count)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path root(out_dir);
    const fs::path dataset = root / "dataset";
    fs::remove_all(dataset);
    fs::remove_all(root / "detections");

    Manifest real;
    Rng rng(derive_seed(seed, {1}));
    for (int i = 0; i < real_count; ++i) {
      ManifestEntry e;
      e.image.id = fmt::format("real-{:03d}", i);
      e.image.path = dataset / "real" / (e.image.id + ".png");
      e.image.width = kSide;
      e.image.height = kSide;
      e.labels_path = dataset / "real" / (e.image.id + ".txt");
      write_gray_png(e.image.path, render_scene(derive_seed(seed, {2, static_cast<std::uint64_t>(i)}),
                                                kSide, kSide));
      write_label_file(e.labels_path, random_boxes(rng));
      real.images.push_back(std::move(e));
    }
    real.meta = {{"classes", {"sugar_beet", "monocot", "dicot"}}};
    real.relative_to(dataset).save(dataset / "real.json");

    Manifest synthetic;
    for (int i = 0; i < synthetic_count; ++i) {
      GenerationRequest req;
      req.prompt = kPrompt;
      req.seed = derive_seed(seed, {3, static_cast<std::uint64_t>(i)});
      req.width = kSide;
      req.height = kSide;
      ManifestEntry e;
      e.image.id = synthetic_image_id(req.seed, 0);
      e.image.path = dataset / "synthetic" / (e.image.id + ".png");
      e.image.width = kSide;
      e.image.height = kSide;
      e.image.provenance = Provenance::Synthetic;
      e.labels_path = dataset / "synthetic" / (e.image.id + ".txt");
      e.model_annotated = true;
      write_gray_png(e.image.path, render_scene(derive_seed(req.seed, {hash_string(req.prompt), 0}),
                                                kSide, kSide));
      nlohmann::json sidecar = req.to_json();
      sidecar.erase("count");
      sidecar["id"] = e.image.id;
      sidecar["index"] = 0;
      sidecar["source"] = "generator";
      write_json_file(sidecar_path(e.image.path), sidecar);
      std::vector<Instance> inst;
      for (const auto& d : stub::annotator_table(e.image.id, kClassCount)) {
        if (d.confidence >= 0.25) inst.push_back({d.class_id, d.box, std::nullopt});
      }
      if (inst.empty()) inst.push_back({1, {0.5, 0.5, 0.3, 0.3}, std::nullopt});
      write_label_file(e.labels_path, to_entries(inst, false));
      synthetic.images.push_back(std::move(e));
    }
    synthetic.relative_to(dataset).save(dataset / "synthetic.json");

    nlohmann::json config{
        {"dataset_root", "dataset"},
        {"class_count", kClassCount},
        {"split", {{"train", 0.7}, {"val", 0.15}, {"test", 0.15}, {"seed", 11}}},
        {"p_values", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}},
        {"replicates", 10},
        {"seed", 42},
        {"baseline", "once"},
        {"alpha", 0.05},
        {"models", {"YOLOv8n", "YOLOv10s"}},
        {"offline_detections", "detections"},
        {"workers", 4},
        {"iqa",
         {{"enabled", true},
          {"brisque_model", "../data/brisque_reference.json"},
          {"niqe_model", "../data/niqe_reference.json"}}}};
    write_json_file(root / "experiment.json", config);

    // Offline detections: what the stub detector returns for every plan.
    const auto cfg = ExperimentConfig::from_json(config, root);
    const fs::path scratch = fs::temp_directory_path() / fmt::format("synmix-fixture-{}", seed);
    fs::remove_all(scratch);
    ExperimentConfig plan_only = cfg;
    plan_only.iqa.enabled = false;
    plan_only.offline_detections.reset();
    for (auto& m : plan_only.models) m.detector = AdapterSpec::stub(AdapterRole::Detector);
    plan_only.source["offline_detections"] = nullptr;
    run_experiment(plan_only, scratch);
    for (const auto& m : cfg.models) {
      for (const auto& entry : fs::directory_iterator(scratch / "detections" / m.name)) {
        fs::create_directories(root / "detections" / m.name);
        fs::copy_file(entry.path(), root / "detections" / m.name / entry.path().filename());
      }
    }
    fs::remove_all(scratch);
    std::cerr << fmt::format("wrote fixture experiment to {}\n", root.string());
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_status(e.code());
  }
  return 0;
}
