#include "synmix/iqa.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "synmix/log.hpp"
#include "synmix/manifest.hpp"

namespace synmix::iqa {
namespace {

constexpr double kTableStep = 0.001;

const std::vector<double>& ratio_table() {
  static const std::vector<double> table = [] {
    const auto n = static_cast<std::size_t>(std::lround((kMaxShape - kMinShape) / kTableStep)) + 1;
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = ggd_moment_ratio(kMinShape + kTableStep * i);
    return t;
  }();
  return table;
}

std::vector<double> flatten(const GrayImage& img) {
  return {img.data(), img.data() + img.size()};
}

void require_size(const GrayImage& img, int min_side) {
  if (img.rows() < min_side || img.cols() < min_side) {
    throw Error(Errc::ImageTooSmall,
                fmt::format("{}x{} image, need at least {}x{}", img.cols(), img.rows(), min_side,
                            min_side));
  }
}

std::vector<double> json_vector(const nlohmann::json& j, const char* key, std::size_t expected) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw Error(Errc::ModelFileInvalid, fmt::format("missing array '{}'", key));
  }
  auto v = j.at(key).get<std::vector<double>>();
  if (expected != 0 && v.size() != expected) {
    throw Error(Errc::ModelFileInvalid,
                fmt::format("'{}' has {} entries, expected {}", key, v.size(), expected));
  }
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(Errc::ModelFileInvalid, fmt::format("non-finite '{}'", key));
  }
  return v;
}

template <typename Vec>
nlohmann::json json_array(const Vec& v) {
  std::vector<double> out(v.data(), v.data() + v.size());
  return out;
}

}  // namespace

Eigen::ArrayXd gaussian_taps(int window, double sigma) {
  Eigen::ArrayXd taps(window);
  const int r = window / 2;
  for (int i = 0; i < window; ++i) {
    const double d = i - r;
    taps(i) = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  return taps / taps.sum();
}

GrayImage downsample2(const GrayImage& img) {
  const Eigen::Index rows = img.rows() / 2, cols = img.cols() / 2;
  GrayImage out(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      out(y, x) = 0.25 * (img(2 * y, 2 * x) + img(2 * y, 2 * x + 1) + img(2 * y + 1, 2 * x) +
                          img(2 * y + 1, 2 * x + 1));
    }
  }
  return out;
}

double ggd_moment_ratio(double shape) {
  return std::exp(std::lgamma(1.0 / shape) + std::lgamma(3.0 / shape) -
                  2.0 * std::lgamma(2.0 / shape));
}

double solve_ggd_shape(double ratio) {
  const auto& table = ratio_table();
  if (ratio >= table.front()) return kMinShape;
  if (ratio <= table.back()) return kMaxShape;
  // table is decreasing; first entry at or below the ratio closes the bracket
  const auto it = std::lower_bound(table.begin(), table.end(), ratio, std::greater<>());
  const auto hi_idx = static_cast<std::size_t>(it - table.begin());
  double lo = kMinShape + kTableStep * (hi_idx - 1);
  double hi = kMinShape + kTableStep * hi_idx;
  for (int i = 0; i < 60 && hi - lo > 1e-13; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (ggd_moment_ratio(mid) > ratio) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

GgdParams estimate_ggd(std::span<const double> samples) {
  if (samples.size() < 100) {
    throw Error(Errc::DegenerateSamples, fmt::format("{} samples, need 100", samples.size()));
  }
  double sq = 0.0, ab = 0.0;
  for (double x : samples) {
    sq += x * x;
    ab += std::abs(x);
  }
  const auto n = static_cast<double>(samples.size());
  sq /= n;
  ab /= n;
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  if (*mn == *mx || ab == 0.0) throw Error(Errc::DegenerateSamples, "constant samples");
  return {solve_ggd_shape(sq / (ab * ab)), std::sqrt(sq)};
}

AggdParams estimate_aggd(std::span<const double> samples) {
  if (samples.size() < 100) {
    throw Error(Errc::DegenerateSamples, fmt::format("{} samples, need 100", samples.size()));
  }
  double left_sq = 0.0, right_sq = 0.0, ab = 0.0, sq = 0.0;
  std::size_t n_left = 0, n_right = 0;
  for (double x : samples) {
    if (x < 0) {
      left_sq += x * x;
      ++n_left;
    } else if (x > 0) {
      right_sq += x * x;
      ++n_right;
    }
    ab += std::abs(x);
    sq += x * x;
  }
  if (n_left == 0 || n_right == 0) {
    throw Error(Errc::OneSidedSamples,
                fmt::format("{} negative and {} positive samples", n_left, n_right));
  }
  const auto n = static_cast<double>(samples.size());
  const double sl = std::sqrt(left_sq / n_left);
  const double sr = std::sqrt(right_sq / n_right);
  const double g = sl / sr;
  const double r_hat = (ab / n) * (ab / n) / (sq / n);
  const double r_norm = r_hat * (g * g * g + 1.0) * (g + 1.0) / ((g * g + 1.0) * (g * g + 1.0));
  const double shape = solve_ggd_shape(1.0 / r_norm);
  const double eta = (sr - sl) * std::exp(std::lgamma(2.0 / shape) - std::lgamma(1.0 / shape)) *
                     std::exp(0.5 * (std::lgamma(1.0 / shape) - std::lgamma(3.0 / shape)));
  return {shape, sl, sr, eta};
}

std::vector<double> pairwise_products(const GrayImage& c, Orientation o) {
  Eigen::Index dy = 0, dx = 0;
  switch (o) {
    case Orientation::Horizontal: dx = 1; break;
    case Orientation::Vertical: dy = 1; break;
    case Orientation::MainDiagonal: dy = 1; dx = 1; break;
    case Orientation::AntiDiagonal: dy = 1; dx = -1; break;
  }
  const Eigen::Index x0 = dx < 0 ? 1 : 0;
  const Eigen::Index x1 = dx > 0 ? c.cols() - 1 : c.cols();
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max<Eigen::Index>(0, (c.rows() - dy) * (x1 - x0))));
  for (Eigen::Index y = 0; y + dy < c.rows(); ++y) {
    for (Eigen::Index x = x0; x < x1; ++x) out.push_back(c(y, x) * c(y + dy, x + dx));
  }
  return out;
}

ScaleFeatures nss_features(const GrayImage& coefficients) {
  ScaleFeatures f;
  const auto flat = flatten(coefficients);
  const GgdParams g = estimate_ggd(flat);
  f(0) = g.shape;
  f(1) = g.sigma * g.sigma;
  constexpr std::array kOrder{Orientation::Horizontal, Orientation::Vertical,
                              Orientation::MainDiagonal, Orientation::AntiDiagonal};
  for (std::size_t k = 0; k < kOrder.size(); ++k) {
    const AggdParams a = estimate_aggd(pairwise_products(coefficients, kOrder[k]));
    const auto base = static_cast<Eigen::Index>(2 + 4 * k);
    f(base) = a.shape;
    f(base + 1) = a.mean;
    f(base + 2) = a.left_scale * a.left_scale;
    f(base + 3) = a.right_scale * a.right_scale;
  }
  return f;
}

FeatureVector brisque_features(const GrayImage& img, const MscnParams& params) {
  require_size(img, 32);
  FeatureVector f;
  f.head<kFeaturesPerScale>() = nss_features(mscn(img, params).coefficients);
  f.tail<kFeaturesPerScale>() = nss_features(mscn(downsample2(img), params).coefficients);
  return f;
}

// --- BRISQUE model ----------------------------------------------------------

FeatureVector BrisqueModel::scale(const FeatureVector& f) const {
  FeatureVector out;
  for (int i = 0; i < kFeatureCount; ++i) {
    const double span = feature_max(i) - feature_min(i);
    out(i) = span > 0 ? 2.0 * (f(i) - feature_min(i)) / span - 1.0 : 0.0;
  }
  return out;
}

double BrisqueModel::raw_score(const FeatureVector& f) const {
  const FeatureVector x = scale(f);
  if (kind == Kind::Linear) return weights.dot(x) + bias;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < support_vectors.rows(); ++i) {
    const double d2 = (support_vectors.row(i).transpose() - x).squaredNorm();
    acc += dual_coefs(i) * std::exp(-gamma * d2);
  }
  return acc - rho;
}

BrisqueModel BrisqueModel::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::ModelFileInvalid, "model must be a JSON object");
  BrisqueModel m;
  const std::string kind = j.value("kind", "");
  if (kind == "linear") m.kind = Kind::Linear;
  else if (kind == "rbf") m.kind = Kind::Rbf;
  else throw Error(Errc::ModelFileInvalid, fmt::format("unknown model kind '{}'", kind));
  m.feature_min = FeatureVector(json_vector(j, "feature_min", kFeatureCount).data());
  m.feature_max = FeatureVector(json_vector(j, "feature_max", kFeatureCount).data());
  try {
    if (m.kind == Kind::Linear) {
      m.weights = FeatureVector(json_vector(j, "weights", kFeatureCount).data());
      m.bias = j.at("bias").get<double>();
    } else {
      m.gamma = j.at("gamma").get<double>();
      m.rho = j.at("rho").get<double>();
      const auto coefs = json_vector(j, "dual_coefs", 0);
      const auto& svs = j.at("support_vectors");
      if (!svs.is_array() || svs.size() != coefs.size() || coefs.empty()) {
        throw Error(Errc::ModelFileInvalid, "support_vectors and dual_coefs disagree");
      }
      m.dual_coefs = Eigen::Map<const Eigen::VectorXd>(coefs.data(), coefs.size());
      m.support_vectors.resize(static_cast<Eigen::Index>(coefs.size()), kFeatureCount);
      for (std::size_t i = 0; i < svs.size(); ++i) {
        auto row = svs[i].get<std::vector<double>>();
        if (row.size() != static_cast<std::size_t>(kFeatureCount)) {
          throw Error(Errc::ModelFileInvalid, "support vector of wrong length");
        }
        for (int k = 0; k < kFeatureCount; ++k) m.support_vectors(i, k) = row[k];
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ModelFileInvalid, e.what());
  }
  return m;
}

BrisqueModel BrisqueModel::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ModelFileInvalid, fmt::format("{}: {}", path.string(), e.what()));
  }
  return from_json(j);
}

nlohmann::json BrisqueModel::to_json() const {
  nlohmann::json j;
  j["version"] = 1;
  j["kind"] = kind == Kind::Linear ? "linear" : "rbf";
  j["feature_min"] = json_array(feature_min);
  j["feature_max"] = json_array(feature_max);
  if (kind == Kind::Linear) {
    j["weights"] = json_array(weights);
    j["bias"] = bias;
  } else {
    j["gamma"] = gamma;
    j["rho"] = rho;
    j["dual_coefs"] = json_array(dual_coefs);
    auto svs = nlohmann::json::array();
    for (Eigen::Index i = 0; i < support_vectors.rows(); ++i) {
      svs.push_back(json_array(Eigen::VectorXd(support_vectors.row(i).transpose())));
    }
    j["support_vectors"] = std::move(svs);
  }
  return j;
}

double brisque_score(const FeatureVector& features, const BrisqueModel& model) {
  return std::clamp(model.raw_score(features), 0.0, 100.0);
}

double brisque_score(std::span<const double> features, const BrisqueModel& model) {
  if (features.size() != static_cast<std::size_t>(kFeatureCount)) {
    throw Error(Errc::DimensionMismatch,
                fmt::format("{} features, expected {}", features.size(), kFeatureCount));
  }
  return brisque_score(FeatureVector(features.data()), model);
}

BrisqueModel fit_brisque_linear(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                                double ridge) {
  if (features.cols() != kFeatureCount) {
    throw Error(Errc::DimensionMismatch, fmt::format("{} feature columns", features.cols()));
  }
  if (features.rows() != targets.size() || features.rows() < 2) {
    throw Error(Errc::DimensionMismatch, "need at least two rows matching the targets");
  }
  BrisqueModel m;
  m.feature_min = features.colwise().minCoeff().transpose();
  m.feature_max = features.colwise().maxCoeff().transpose();
  Eigen::MatrixXd x(features.rows(), kFeatureCount);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    x.row(i) = m.scale(features.row(i).transpose()).transpose();
  }
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const double t_mu = targets.mean();
  const Eigen::MatrixXd xc = x.rowwise() - mu;
  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += ridge * static_cast<double>(features.rows());
  m.weights = gram.ldlt().solve(xc.transpose() * (targets.array() - t_mu).matrix());
  m.bias = t_mu - mu.dot(m.weights);
  return m;
}

// --- NIQE -------------------------------------------------------------------

NiqeModel NiqeModel::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::ModelFileInvalid, "model must be a JSON object");
  NiqeModel m;
  try {
    if (j.at("version").get<int>() != kVersion) {
      throw Error(Errc::ModelFileInvalid, "unsupported NIQE model version");
    }
    m.patch_size = j.at("patch_size").get<int>();
    m.sharpness_frac = j.at("sharpness_frac").get<double>();
    const auto mean = json_vector(j, "mean", kFeatureCount);
    m.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), kFeatureCount);
    const auto& cov = j.at("covariance");
    if (!cov.is_array() || cov.size() != static_cast<std::size_t>(kFeatureCount)) {
      throw Error(Errc::ModelFileInvalid, "covariance must be 36x36");
    }
    m.covariance.resize(kFeatureCount, kFeatureCount);
    for (int r = 0; r < kFeatureCount; ++r) {
      const auto row = cov[r].get<std::vector<double>>();
      if (row.size() != static_cast<std::size_t>(kFeatureCount)) {
        throw Error(Errc::ModelFileInvalid, "covariance must be 36x36");
      }
      for (int c = 0; c < kFeatureCount; ++c) m.covariance(r, c) = row[c];
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ModelFileInvalid, e.what());
  }
  if (m.patch_size < 14 || !(m.sharpness_frac > 0.0 && m.sharpness_frac <= 1.0)) {
    throw Error(Errc::ModelFileInvalid, "patch_size or sharpness_frac out of range");
  }
  if (!m.covariance.isApprox(m.covariance.transpose())) {
    throw Error(Errc::ModelFileInvalid, "covariance not symmetric");
  }
  return m;
}

NiqeModel NiqeModel::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ModelFileInvalid, fmt::format("{}: {}", path.string(), e.what()));
  }
  return from_json(j);
}

nlohmann::json NiqeModel::to_json() const {
  nlohmann::json j;
  j["version"] = kVersion;
  j["patch_size"] = patch_size;
  j["sharpness_frac"] = sharpness_frac;
  j["mean"] = json_array(mean);
  auto cov = nlohmann::json::array();
  for (Eigen::Index r = 0; r < covariance.rows(); ++r) {
    cov.push_back(json_array(Eigen::VectorXd(covariance.row(r).transpose())));
  }
  j["covariance"] = std::move(cov);
  return j;
}

void NiqeModel::save(const std::filesystem::path& path) const { write_json_file(path, to_json()); }

PatchFeatures niqe_patch_features(const GrayImage& img, int patch_size, const MscnParams& params) {
  if (patch_size < 14 || patch_size % 2 != 0) {
    throw Error(Errc::InvalidSpec, fmt::format("patch size {} must be even and >= 14", patch_size));
  }
  require_size(img, patch_size);
  const auto full = mscn(img, params);
  const auto half = mscn(downsample2(img), params).coefficients;
  const int hp = patch_size / 2;
  const Eigen::Index ny = img.rows() / patch_size, nx = img.cols() / patch_size;

  std::vector<FeatureVector> rows;
  PatchFeatures out;
  for (Eigen::Index py = 0; py < ny; ++py) {
    for (Eigen::Index px = 0; px < nx; ++px) {
      const Eigen::Index y = py * patch_size, x = px * patch_size;
      FeatureVector f;
      try {
        f.head<kFeaturesPerScale>() =
            nss_features(full.coefficients.block(y, x, patch_size, patch_size));
        f.tail<kFeaturesPerScale>() = nss_features(half.block(y / 2, x / 2, hp, hp));
      } catch (const Error& e) {
        if (e.code() == Errc::DegenerateSamples || e.code() == Errc::OneSidedSamples) continue;
        throw;
      }
      rows.push_back(f);
      out.sharpness.push_back(full.local_sigma.block(y, x, patch_size, patch_size).mean());
    }
  }
  out.features.resize(static_cast<Eigen::Index>(rows.size()), kFeatureCount);
  for (std::size_t i = 0; i < rows.size(); ++i) out.features.row(i) = rows[i].transpose();
  return out;
}

namespace {

Eigen::MatrixXd covariance_of(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
  return (c.transpose() * c) / denom;
}

Eigen::MatrixXd floor_eigenvalues(const Eigen::MatrixXd& s, double floor) {
  const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd vals = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

NiqeModel niqe_fit(std::span<const GrayImage> corpus, int patch_size, double sharpness_frac) {
  if (!(sharpness_frac > 0.0 && sharpness_frac <= 1.0)) {
    throw Error(Errc::InvalidSpec, "sharpness_frac must lie in (0, 1]");
  }
  std::vector<Eigen::VectorXd> selected;
  for (const auto& img : corpus) {
    if (img.rows() < patch_size || img.cols() < patch_size) continue;
    const PatchFeatures pf = niqe_patch_features(img, patch_size);
    if (pf.sharpness.empty()) continue;
    const double mx = *std::max_element(pf.sharpness.begin(), pf.sharpness.end());
    for (std::size_t i = 0; i < pf.sharpness.size(); ++i) {
      if (pf.sharpness[i] > 0.0 && pf.sharpness[i] >= sharpness_frac * mx) {
        selected.push_back(pf.features.row(static_cast<Eigen::Index>(i)).transpose());
      }
    }
  }
  if (selected.size() < 50) {
    throw Error(Errc::InsufficientPatches,
                fmt::format("{} sharp patches selected, need 50", selected.size()));
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(selected.size()), kFeatureCount);
  for (std::size_t i = 0; i < selected.size(); ++i) x.row(i) = selected[i].transpose();

  NiqeModel m;
  m.patch_size = patch_size;
  m.sharpness_frac = sharpness_frac;
  m.mean = x.colwise().mean().transpose();
  m.covariance = floor_eigenvalues(covariance_of(x), 1e-10);
  return m;
}

double niqe_score(const GrayImage& img, const NiqeModel& model) {
  if (model.mean.size() != kFeatureCount || model.covariance.rows() != kFeatureCount ||
      model.covariance.cols() != kFeatureCount) {
    throw Error(Errc::DimensionMismatch, "NIQE model is not 36-dimensional");
  }
  const PatchFeatures pf = niqe_patch_features(img, model.patch_size);
  if (pf.features.rows() == 0) {
    throw Error(Errc::ImageTooSmall, "no usable patches in image");
  }
  const Eigen::VectorXd mu = pf.features.colwise().mean().transpose();
  const Eigen::MatrixXd pooled = 0.5 * (model.covariance + covariance_of(pf.features));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (pooled + pooled.transpose()));
  const Eigen::VectorXd vals = es.eigenvalues();
  const double tol = std::max(1e-10, vals.cwiseAbs().maxCoeff() * kFeatureCount * 1e-15);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(vals.size());
  int rank = 0;
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (vals(i) > tol) {
      inv(i) = 1.0 / vals(i);
      ++rank;
    }
  }
  if (rank == 0 || !vals.allFinite()) {
    throw Error(Errc::SingularCovariance, "pooled covariance has no usable eigenvalues");
  }
  const Eigen::VectorXd proj = es.eigenvectors().transpose() * (model.mean - mu);
  return std::sqrt(std::max(0.0, proj.cwiseAbs2().dot(inv)));
}

// --- external scores --------------------------------------------------------

std::string_view to_string(ExternalMetric m) noexcept {
  switch (m) {
    case ExternalMetric::DBCNN: return "DBCNN";
    case ExternalMetric::HyperIQA: return "HyperIQA";
    case ExternalMetric::CLIPIQA: return "CLIPIQA";
  }
  return "?";
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

constexpr std::array<std::string_view, 6> kProperties{"brightness", "noisiness",   "sharpness",
                                                      "complexity", "naturalness", "realism"};

}  // namespace

std::vector<ExternalScore> parse_external_scores(std::string_view text) {
  std::vector<ExternalScore> out;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (!header_seen) {
      if (f.size() != 4 || f[0] != "image_id" || f[1] != "metric" || f[2] != "property" ||
          f[3] != "value") {
        throw Error(Errc::MalformedRow,
                    fmt::format("line {}: expected header image_id,metric,property,value", line_no));
      }
      header_seen = true;
      continue;
    }
    if (f.size() != 4 || f[0].empty()) {
      throw Error(Errc::MalformedRow, fmt::format("line {}: expected 4 fields", line_no));
    }
    ExternalScore s;
    s.image_id = std::string(f[0]);
    if (f[1] == "DBCNN") s.metric = ExternalMetric::DBCNN;
    else if (f[1] == "HyperIQA") s.metric = ExternalMetric::HyperIQA;
    else if (f[1] == "CLIPIQA") s.metric = ExternalMetric::CLIPIQA;
    else throw Error(Errc::MalformedRow, fmt::format("line {}: unknown metric '{}'", line_no, f[1]));

    if (s.metric == ExternalMetric::CLIPIQA) {
      if (std::find(kProperties.begin(), kProperties.end(), f[2]) == kProperties.end()) {
        throw Error(Errc::MalformedRow,
                    fmt::format("line {}: unknown CLIPIQA property '{}'", line_no, f[2]));
      }
      s.property = std::string(f[2]);
    } else if (!f[2].empty()) {
      throw Error(Errc::MalformedRow,
                  fmt::format("line {}: property only applies to CLIPIQA", line_no));
    }

    const auto [ptr, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), s.value);
    if (ec != std::errc{} || ptr != f[3].data() + f[3].size() || !std::isfinite(s.value)) {
      throw Error(Errc::MalformedRow, fmt::format("line {}: bad value '{}'", line_no, f[3]));
    }
    if (s.metric == ExternalMetric::CLIPIQA && (s.value < 0.0 || s.value > 1.0)) {
      throw Error(Errc::RangeViolation,
                  fmt::format("line {}: CLIPIQA value {} outside [0, 1]", line_no, s.value));
    }
    if (s.metric == ExternalMetric::HyperIQA && (s.value < 0.0 || s.value > 100.0)) {
      throw Error(Errc::RangeViolation,
                  fmt::format("line {}: HyperIQA value {} outside [0, 100]", line_no, s.value));
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) warn("external score file has no records");
  return out;
}

std::vector<ExternalScore> load_external_scores(const std::filesystem::path& path) {
  return parse_external_scores(read_text_file(path));
}

std::string image_scores_csv(std::span<const ImageScore> scores) {
  std::string out = "image_id,metric,value,provenance\n";
  for (const auto& s : scores) {
    out += fmt::format("{},{},{:.6f},{}\n", s.image_id, s.metric, s.value, s.provenance);
  }
  return out;
}

}  // namespace synmix::iqa
