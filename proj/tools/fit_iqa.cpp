// Fits the reference BRISQUE regressor and NIQE model shipped in data/.
//
// The training corpus is procedural: rendered scenes are the pristine set,
// and additive noise and Gaussian blur at graded strengths provide the
// distorted set. Each distortion level maps to a fixed quality target.

#include <filesystem>
#include <iostream>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "synmix/error.hpp"
#include "synmix/image.hpp"
#include "synmix/iqa.hpp"
#include "synmix/manifest.hpp"
#include "synmix/parallel.hpp"
#include "synmix/random.hpp"

namespace fs = std::filesystem;
using namespace synmix;

namespace {

struct Distortion {
  double noise = 0.0;
  double blur = 0.0;
  double target = 0.0;
};

const std::vector<Distortion> kLevels{
    {0.0, 0.0, 10.0},   {0.01, 0.0, 22.0}, {0.02, 0.0, 34.0}, {0.04, 0.0, 50.0},
    {0.08, 0.0, 68.0},  {0.16, 0.0, 86.0}, {0.0, 1.0, 30.0},  {0.0, 2.0, 55.0},
    {0.0, 3.0, 75.0},   {0.02, 1.0, 45.0}, {0.08, 2.0, 85.0},
};

GrayImage distort(const GrayImage& img, const Distortion& d, std::uint64_t seed) {
  GrayImage out = img;
  if (d.blur > 0) {
    const int window = 2 * static_cast<int>(std::ceil(3 * d.blur)) + 1;
    out = iqa::gaussian_blur(out, window, d.blur);
  }
  if (d.noise > 0) out = add_gaussian_noise(out, d.noise, seed);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fit the reference BRISQUE and NIQE models"};
  std::string out_dir = "data";
  std::uint64_t seed = 20240607;
  int scenes = 60;
  int size = 256;
  int niqe_scenes = 40;
  int niqe_size = 384;
  int workers = 4;
  app.add_option("-o,--output", out_dir)->capture_default_str();
  app.add_option("--seed", seed)->capture_default_str();
  app.add_option("--scenes", scenes)->capture_default_str();
  app.add_option("--size", size)->capture_default_str();
  app.add_option("--niqe-scenes", niqe_scenes)->capture_default_str();
  app.add_option("--niqe-size", niqe_size)->capture_default_str();
  app.add_option("--workers", workers)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    const std::size_t rows = static_cast<std::size_t>(scenes) * kLevels.size();
    Eigen::MatrixXd features(static_cast<Eigen::Index>(rows), iqa::kFeatureCount);
    Eigen::VectorXd targets(static_cast<Eigen::Index>(rows));
    parallel_for(static_cast<std::size_t>(scenes), workers, [&](std::size_t s) {
      const GrayImage scene = render_scene(derive_seed(seed, {1, s}), size, size);
      for (std::size_t l = 0; l < kLevels.size(); ++l) {
        const auto row = static_cast<Eigen::Index>(s * kLevels.size() + l);
        const GrayImage img = distort(scene, kLevels[l], derive_seed(seed, {2, s, l}));
        features.row(row) = iqa::brisque_features(img).transpose();
        targets(row) = kLevels[l].target;
      }
    });
    const auto model = iqa::fit_brisque_linear(features, targets, 1e-3);
    write_json_file(fs::path(out_dir) / "brisque_reference.json", model.to_json());

    std::vector<GrayImage> corpus;
    for (int s = 0; s < niqe_scenes; ++s) {
      corpus.push_back(render_scene(derive_seed(seed, {3, static_cast<std::uint64_t>(s)}),
                                    niqe_size, niqe_size));
    }
    iqa::niqe_fit(corpus).save(fs::path(out_dir) / "niqe_reference.json");
    std::cerr << fmt::format("fitted BRISQUE on {} images and NIQE on {} scenes into {}\n", rows,
                             niqe_scenes, out_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_status(e.code());
  }
  return 0;
}
