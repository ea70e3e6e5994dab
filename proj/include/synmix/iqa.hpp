#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "synmix/error.hpp"
#include "synmix/image.hpp"

namespace synmix::iqa {

// --- MSCN ------------------------------------------------------------------

struct MscnParams {
  int window = 7;
  double sigma = 7.0 / 6.0;
  /// Added to the local deviation; 1/255 for intensities in [0, 1].
  double stabilizer = 1.0 / 255.0;
};

/// Normalized 1-D Gaussian taps of odd length `window`.
Eigen::ArrayXd gaussian_taps(int window, double sigma);

/// Separable Gaussian filter with mirrored borders (abc|cba), so the result
/// commutes with horizontal and vertical flips.
template <typename Scalar>
Image<Scalar> gaussian_blur(const Image<Scalar>& img, int window, double sigma) {
  const Eigen::ArrayXd taps = gaussian_taps(window, sigma);
  const Eigen::Index r = window / 2;
  const Eigen::Index rows = img.rows(), cols = img.cols();
  auto mirror = [](Eigen::Index i, Eigen::Index n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
  };
  Image<Scalar> tmp(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      Scalar acc(0);
      for (Eigen::Index t = -r; t <= r; ++t) {
        acc += static_cast<Scalar>(taps(t + r)) * img(y, mirror(x + t, cols));
      }
      tmp(y, x) = acc;
    }
  }
  Image<Scalar> out(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      Scalar acc(0);
      for (Eigen::Index t = -r; t <= r; ++t) {
        acc += static_cast<Scalar>(taps(t + r)) * tmp(mirror(y + t, rows), x);
      }
      out(y, x) = acc;
    }
  }
  return out;
}

template <typename Scalar>
struct MscnField {
  Image<Scalar> coefficients;
  /// Local weighted standard deviation; the NIQE sharpness measure.
  Image<Scalar> local_sigma;
};

/// (I - mu) / (sigma + C) with Gaussian-weighted local mean and deviation.
template <typename Scalar>
MscnField<Scalar> mscn(const Image<Scalar>& img, const MscnParams& params = {}) {
  if (img.rows() < params.window || img.cols() < params.window) {
    throw Error(Errc::ImageTooSmall, "image smaller than the MSCN window");
  }
  const Image<Scalar> mu = gaussian_blur(img, params.window, params.sigma);
  const Image<Scalar> second = gaussian_blur<Scalar>(img.square(), params.window, params.sigma);
  MscnField<Scalar> f;
  f.local_sigma = (second - mu.square()).abs().sqrt();
  f.coefficients = (img - mu) / (f.local_sigma + static_cast<Scalar>(params.stabilizer));
  return f;
}

/// Half-resolution image from 2x2 block means (odd trailing row/column dropped).
GrayImage downsample2(const GrayImage& img);

// --- distribution fits -----------------------------------------------------

/// Zero-mean generalized Gaussian: shape alpha, sigma = sqrt(E[x^2]).
struct GgdParams {
  double shape = 2.0;
  double sigma = 1.0;
};

/// Asymmetric GGD with left/right standard deviations and mean offset eta.
struct AggdParams {
  double shape = 2.0;
  double left_scale = 1.0;
  double right_scale = 1.0;
  double mean = 0.0;
};

/// Shape search range.
inline constexpr double kMinShape = 0.2;
inline constexpr double kMaxShape = 10.0;

/// Gamma(1/a) Gamma(3/a) / Gamma(2/a)^2, strictly decreasing in a.
double ggd_moment_ratio(double shape);

/// Inverts ggd_moment_ratio on [kMinShape, kMaxShape]: table lookup for the
/// bracket, then bisection. Out-of-range ratios clamp to the bounds.
double solve_ggd_shape(double ratio);

/// Moment matching; needs >= 100 non-constant samples.
GgdParams estimate_ggd(std::span<const double> samples);

/// Moment matching on left/right second moments; needs >= 100 samples with
/// both signs present.
AggdParams estimate_aggd(std::span<const double> samples);

// --- BRISQUE ---------------------------------------------------------------

inline constexpr int kFeaturesPerScale = 18;
inline constexpr int kFeatureCount = 36;
using FeatureVector = Eigen::Matrix<double, kFeatureCount, 1>;
using ScaleFeatures = Eigen::Matrix<double, kFeaturesPerScale, 1>;

/// Orientation of neighbour products.
enum class Orientation { Horizontal, Vertical, MainDiagonal, AntiDiagonal };

/// Products of each coefficient with its neighbour in the given direction.
std::vector<double> pairwise_products(const GrayImage& coefficients, Orientation o);

/// Per-scale NSS block, in order:
///   [0] GGD shape, [1] GGD variance,
///   then for H, V, D1 (down-right), D2 (down-left):
///   AGGD shape, AGGD mean, left variance, right variance.
ScaleFeatures nss_features(const GrayImage& coefficients);

/// Scale-1 block (indices 0..17) followed by the block computed on
/// downsample2(img) (indices 18..35). Needs at least 32x32 pixels.
FeatureVector brisque_features(const GrayImage& img, const MscnParams& params = {});

/// Loadable regressor: min/max feature scaling to [-1, 1], then either a
/// linear model or an RBF kernel expansion.
struct BrisqueModel {
  enum class Kind { Linear, Rbf };
  Kind kind = Kind::Linear;
  FeatureVector feature_min = FeatureVector::Zero();
  FeatureVector feature_max = FeatureVector::Ones();
  // linear
  FeatureVector weights = FeatureVector::Zero();
  double bias = 0.0;
  // rbf
  double gamma = 0.0;
  double rho = 0.0;
  Eigen::MatrixXd support_vectors;  // one per row
  Eigen::VectorXd dual_coefs;

  FeatureVector scale(const FeatureVector& f) const;
  double raw_score(const FeatureVector& f) const;

  static BrisqueModel from_json(const nlohmann::json& j);
  static BrisqueModel load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// Regression output clamped to [0, 100]; lower is better.
double brisque_score(const FeatureVector& features, const BrisqueModel& model);
/// Same, for features supplied as a dynamic vector (checked for length 36).
double brisque_score(std::span<const double> features, const BrisqueModel& model);

/// Ridge regression on min/max-scaled features; one sample per row.
BrisqueModel fit_brisque_linear(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                                double ridge = 1e-3);

// --- NIQE ------------------------------------------------------------------

struct NiqeModel {
  static constexpr int kVersion = 1;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  int patch_size = 96;
  double sharpness_frac = 0.75;

  static NiqeModel from_json(const nlohmann::json& j);
  static NiqeModel load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;
};

struct PatchFeatures {
  Eigen::MatrixXd features;  // one 36-vector per row
  std::vector<double> sharpness;
};

/// Non-overlapping tiles; scale-2 features come from the matching half-size tile.
/// Tiles whose statistics cannot be fitted are skipped.
PatchFeatures niqe_patch_features(const GrayImage& img, int patch_size,
                                  const MscnParams& params = {});

/// Multivariate Gaussian over the sharpest tiles (sharpness >= frac * image max,
/// and non-zero) of every corpus image. Needs >= 50 tiles.
NiqeModel niqe_fit(std::span<const GrayImage> corpus, int patch_size = 96,
                   double sharpness_frac = 0.75);

/// sqrt(d' ((S_model + S_image) / 2)^+ d) between the model and the image's
/// own tile distribution.
double niqe_score(const GrayImage& img, const NiqeModel& model);

// --- externally computed deep metrics ---------------------------------------

enum class ExternalMetric { DBCNN, HyperIQA, CLIPIQA };

std::string_view to_string(ExternalMetric m) noexcept;

struct ExternalScore {
  std::string image_id;
  ExternalMetric metric = ExternalMetric::DBCNN;
  /// CLIP-IQA prompt property (brightness, noisiness, sharpness,
  /// complexity, naturalness, realism).
  std::optional<std::string> property;
  double value = 0.0;
};

/// CSV with header image_id,metric,property,value.
std::vector<ExternalScore> parse_external_scores(std::string_view text);
std::vector<ExternalScore> load_external_scores(const std::filesystem::path& path);

/// Row of the per-image output table.
struct ImageScore {
  std::string image_id;
  std::string metric;
  double value = 0.0;
  std::string provenance;
};

/// CSV with header image_id,metric,value,provenance.
std::string image_scores_csv(std::span<const ImageScore> scores);

}  // namespace synmix::iqa
