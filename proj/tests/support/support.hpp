#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>

#include "synmix/detect.hpp"
#include "synmix/random.hpp"
#include "synmix/stats.hpp"

namespace synmix::testing {

namespace fs = std::filesystem;

inline fs::path source_dir() { return SYNMIX_SOURCE_DIR; }
inline fs::path bin_dir() { return SYNMIX_BIN_DIR; }
inline fs::path fixtures_dir() { return source_dir() / "fixtures"; }
inline fs::path data_dir() { return source_dir() / "data"; }

/// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            fmt::format("synmix-{}-{}-{}", tag, ::getpid(), counter++);
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const fs::path& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

// --- brute-force mAP -------------------------------------------------------

inline double corner_iou(const BoundingBox& a, const BoundingBox& b) {
  const double ax0 = a.cx - a.w / 2, ax1 = a.cx + a.w / 2, ay0 = a.cy - a.h / 2,
               ay1 = a.cy + a.h / 2;
  const double bx0 = b.cx - b.w / 2, bx1 = b.cx + b.w / 2, by0 = b.cy - b.h / 2,
               by1 = b.cy + b.h / 2;
  const double iw = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  const double ih = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return inter > 0 && uni > 0 ? inter / uni : 0.0;
}

/// True positives among the detections kept at a cut-off, recomputed from
/// scratch by greedy matching in visiting order.
inline long oracle_true_positives(const std::vector<Detection>& kept,
                                  const std::vector<GroundTruth>& truths, double thr) {
  std::vector<bool> used(truths.size(), false);
  long tp = 0;
  for (const auto& d : kept) {
    long best = -1;
    double best_iou = -1.0;
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (used[t] || truths[t].image_id != d.image_id || truths[t].class_id != d.class_id) continue;
      const double v = corner_iou(d.box, truths[t].box);
      if (v >= thr && v > best_iou) {
        best_iou = v;
        best = static_cast<long>(t);
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      ++tp;
    }
  }
  return tp;
}

/// Per-class, per-threshold exhaustive PR enumeration with 101-point summation.
inline double oracle_ap(const std::vector<Detection>& dets, const std::vector<GroundTruth>& truths,
                        int cls, double thr) {
  std::vector<Detection> cd;
  for (const auto& d : dets) {
    if (d.class_id == cls) cd.push_back(d);
  }
  std::vector<GroundTruth> ct;
  for (const auto& t : truths) {
    if (t.class_id == cls) ct.push_back(t);
  }
  if (ct.empty() || cd.empty()) return 0.0;
  std::vector<std::size_t> order(cd.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cd[a].confidence != cd[b].confidence) return cd[a].confidence > cd[b].confidence;
    return cd[a].box.area() > cd[b].box.area();
  });
  std::vector<Detection> sorted;
  for (auto i : order) sorted.push_back(cd[i]);

  std::set<double, std::greater<>> cutoffs;
  for (const auto& d : cd) cutoffs.insert(d.confidence);
  std::vector<std::pair<double, double>> points;  // recall, precision
  for (double c : cutoffs) {
    std::vector<Detection> kept;
    for (const auto& d : sorted) {
      if (d.confidence >= c) kept.push_back(d);
    }
    const long tp = oracle_true_positives(kept, ct, thr);
    points.emplace_back(static_cast<double>(tp) / static_cast<double>(ct.size()),
                        static_cast<double>(tp) / static_cast<double>(kept.size()));
  }
  double sum = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double r = i / 100.0;
    double best = 0.0;
    for (const auto& [rec, prec] : points) {
      if (rec >= r) best = std::max(best, prec);
    }
    sum += best;
  }
  return sum / 101.0;
}

struct OracleMap {
  double map50 = 0.0;
  double map50_95 = 0.0;
};

inline OracleMap oracle_map(const std::vector<Detection>& dets,
                            const std::vector<GroundTruth>& truths) {
  std::set<int> classes;
  for (const auto& t : truths) classes.insert(t.class_id);
  OracleMap out;
  if (classes.empty()) return out;
  for (int c : classes) {
    out.map50 += oracle_ap(dets, truths, c, 0.5);
    double s = 0.0;
    for (int k = 0; k < 10; ++k) s += oracle_ap(dets, truths, c, 0.5 + 0.05 * k);
    out.map50_95 += s / 10.0;
  }
  out.map50 /= static_cast<double>(classes.size());
  out.map50_95 /= static_cast<double>(classes.size());
  return out;
}

struct Scene {
  std::vector<GroundTruth> truths;
  std::vector<Detection> dets;
};

/// Up to 10 images and 20 boxes over 3 classes, detections jittered from
/// truths plus random false positives. Confidences are drawn from a coarse
/// grid so that ties occur.
inline Scene random_scene(std::uint64_t seed) {
  Rng rng(seed);
  Scene s;
  const int images = 1 + static_cast<int>(rng.below(10));
  const int boxes = 1 + static_cast<int>(rng.below(20));
  auto random_box = [&] {
    const double w = 0.05 + 0.4 * rng.uniform(), h = 0.05 + 0.4 * rng.uniform();
    return BoundingBox{w / 2 + (1 - w) * rng.uniform(), h / 2 + (1 - h) * rng.uniform(), w, h};
  };
  for (int b = 0; b < boxes; ++b) {
    s.truths.push_back({fmt::format("img{}", rng.below(static_cast<std::uint64_t>(images))),
                        static_cast<int>(rng.below(3)), random_box()});
  }
  auto confidence = [&] { return std::round(rng.uniform() * 40.0) / 40.0 + 0.001; };
  for (const auto& t : s.truths) {
    const int copies = static_cast<int>(rng.below(3));
    for (int k = 0; k < copies; ++k) {
      BoundingBox b = t.box;
      b.cx += 0.1 * b.w * rng.normal();
      b.cy += 0.1 * b.h * rng.normal();
      b.w *= std::exp(0.15 * rng.normal());
      b.h *= std::exp(0.15 * rng.normal());
      const int cls = rng.uniform() < 0.1 ? static_cast<int>(rng.below(3)) : t.class_id;
      s.dets.push_back({t.image_id, cls, confidence(), b});
    }
  }
  const int fps = static_cast<int>(rng.below(6));
  for (int k = 0; k < fps; ++k) {
    s.dets.push_back({fmt::format("img{}", rng.below(static_cast<std::uint64_t>(images))),
                      static_cast<int>(rng.below(3)), confidence(), random_box()});
  }
  return s;
}

// --- letter displays ------------------------------------------------------

/// Shared letter <=> adjusted p >= alpha, for every pair.
inline bool cld_sound(const stats::LetterGroups& g, const stats::PairwiseMatrix& m, double alpha) {
  const std::size_t k = g.labels.size();
  for (std::size_t i = 0; i < k; ++i) {
    if (g.letters[i].empty()) return false;
    for (std::size_t j = i + 1; j < k; ++j) {
      bool shared = false;
      for (int a : g.letters[i]) {
        shared = shared || std::find(g.letters[j].begin(), g.letters[j].end(), a) !=
                               g.letters[j].end();
      }
      const bool similar = m.p_adjusted(static_cast<Eigen::Index>(i),
                                        static_cast<Eigen::Index>(j)) >= alpha;
      if (shared != similar) return false;
    }
  }
  return true;
}

/// Random symmetric significance matrix with k groups.
inline stats::PairwiseMatrix random_significance(std::size_t k, double p_sig, Rng& rng) {
  stats::PairwiseMatrix m;
  const auto n = static_cast<Eigen::Index>(k);
  m.p_adjusted = Eigen::MatrixXd::Ones(n, n);
  for (std::size_t i = 0; i < k; ++i) m.labels.push_back(fmt::format("g{}", i));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double p = rng.uniform() < p_sig ? 0.001 : 0.5;
      m.p_adjusted(i, j) = m.p_adjusted(j, i) = p;
    }
  }
  return m;
}

/// Ten groups where the first four and the last six are mutually
/// indistinguishable and every cross pair differs.
inline stats::PairwiseMatrix two_block_significance() {
  stats::PairwiseMatrix m;
  m.p_adjusted = Eigen::MatrixXd::Ones(10, 10);
  for (int i = 0; i < 10; ++i) {
    m.labels.push_back(i == 0 ? "Real data only" : fmt::format("Syn{} Real{}", 10 * i, 100 - 10 * i));
    for (int j = 0; j < 10; ++j) {
      if (i != j) m.p_adjusted(i, j) = (i < 4) == (j < 4) ? 0.4 : 0.01;
    }
  }
  return m;
}

// --- generalized Gaussian samples ------------------------------------------

/// |x| = beta * G^(1/alpha), G ~ Gamma(1/alpha, 1), with random sign.
inline std::vector<double> ggd_samples(double shape, double sigma, std::size_t n,
                                       std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::gamma_distribution<double> gamma(1.0 / shape, 1.0);
  std::bernoulli_distribution sign(0.5);
  const double beta = sigma * std::sqrt(std::tgamma(1.0 / shape) / std::tgamma(3.0 / shape));
  std::vector<double> out(n);
  for (auto& x : out) {
    const double m = beta * std::pow(gamma(eng), 1.0 / shape);
    x = sign(eng) ? m : -m;
  }
  return out;
}

/// Asymmetric GGD: the left and right halves have standard deviations
/// sigma_l and sigma_r; P(x < 0) = beta_l / (beta_l + beta_r).
inline std::vector<double> aggd_samples(double shape, double sigma_l, double sigma_r,
                                        std::size_t n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::gamma_distribution<double> gamma(1.0 / shape, 1.0);
  const double k = std::sqrt(std::tgamma(1.0 / shape) / std::tgamma(3.0 / shape));
  const double bl = sigma_l * k, br = sigma_r * k;
  std::bernoulli_distribution left(bl / (bl + br));
  std::vector<double> out(n);
  for (auto& x : out) {
    const double g = std::pow(gamma(eng), 1.0 / shape);
    x = left(eng) ? -bl * g : br * g;
  }
  return out;
}

}  // namespace synmix::testing
