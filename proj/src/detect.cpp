#include "synmix/detect.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "synmix/manifest.hpp"

namespace synmix {

std::vector<double> EvalConfig::coco_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) throw Error(Errc::ConfigInvalid, "no IoU thresholds");
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    const double t = iou_thresholds[i];
    if (!(t > 0.0 && t <= 1.0)) throw Error(Errc::ConfigInvalid, fmt::format("IoU threshold {}", t));
    if (i > 0 && !(t > iou_thresholds[i - 1])) {
      throw Error(Errc::ConfigInvalid, "IoU thresholds must be strictly increasing");
    }
  }
  if (!(nms_iou > 0.0 && nms_iou <= 1.0)) throw Error(Errc::ConfigInvalid, "nms_iou out of (0, 1]");
}

std::vector<std::size_t> confidence_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].confidence != dets[b].confidence) return dets[a].confidence > dets[b].confidence;
    return dets[a].box.area() > dets[b].box.area();
  });
  return order;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
  const auto order = confidence_order(dets);
  std::vector<Detection> kept;
  for (auto i : order) {
    const auto& d = dets[i];
    bool suppressed = false;
    for (const auto& k : kept) {
      if (k.class_id == d.class_id && iou(k.box, d.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> truths,
                             double iou_threshold) {
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> pools;
  for (std::size_t t = 0; t < truths.size(); ++t) {
    pools[{truths[t].image_id, truths[t].class_id}].push_back(t);
  }
  std::vector<bool> taken(truths.size(), false);

  MatchResult result;
  result.matches.reserve(dets.size());
  for (auto i : confidence_order(dets)) {
    const auto& d = dets[i];
    Match m{i, std::nullopt, 0.0};
    auto it = pools.find({d.image_id, d.class_id});
    if (it != pools.end()) {
      double best = -1.0;
      for (auto t : it->second) {
        if (taken[t]) continue;
        const double v = iou(d.box, truths[t].box);
        if (v >= iou_threshold && v > best) {
          best = v;
          m.truth = t;
          m.iou = v;
        }
      }
    }
    if (m.truth) {
      taken[*m.truth] = true;
      ++result.counts.tp;
    } else {
      ++result.counts.fp;
    }
    result.matches.push_back(m);
  }
  result.counts.fn = static_cast<long>(truths.size()) - result.counts.tp;
  return result;
}

Prf prf(const ConfusionCounts& c) {
  Prf out;
  if (c.tp + c.fp > 0) out.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) out.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (out.precision && out.recall) {
    const double s = *out.precision + *out.recall;
    out.f1 = s > 0.0 ? 2.0 * *out.precision * *out.recall / s : 0.0;
  }
  return out;
}

std::vector<PrPoint> pr_curve(std::span<const Detection> dets, std::span<const GroundTruth> truths,
                              int class_id, double iou_threshold) {
  std::vector<Detection> cls_dets;
  std::vector<GroundTruth> cls_truths;
  for (const auto& d : dets) {
    if (d.class_id == class_id) cls_dets.push_back(d);
  }
  for (const auto& t : truths) {
    if (t.class_id == class_id) cls_truths.push_back(t);
  }
  std::vector<PrPoint> curve;
  if (cls_truths.empty() || cls_dets.empty()) return curve;

  const auto matched = match_detections(cls_dets, cls_truths, iou_threshold);
  const double total = static_cast<double>(cls_truths.size());
  long tp = 0, fp = 0;
  const auto& ms = matched.matches;
  for (std::size_t k = 0; k < ms.size(); ++k) {
    if (ms[k].truth) {
      ++tp;
    } else {
      ++fp;
    }
    const bool last_of_cutoff =
        k + 1 == ms.size() ||
        cls_dets[ms[k + 1].detection].confidence != cls_dets[ms[k].detection].confidence;
    if (last_of_cutoff) {
      curve.push_back({static_cast<double>(tp) / total,
                       static_cast<double>(tp) / static_cast<double>(tp + fp)});
    }
  }
  return curve;
}

double average_precision(std::span<const PrPoint> curve) {
  if (curve.empty()) return 0.0;
  std::vector<double> envelope(curve.size());
  double running = 0.0;
  for (std::size_t i = curve.size(); i-- > 0;) {
    running = std::max(running, curve[i].precision);
    envelope[i] = running;
  }
  double sum = 0.0;
  std::size_t k = 0;
  for (int step = 0; step <= 100; ++step) {
    const double r = step / 100.0;
    while (k < curve.size() && curve[k].recall < r) ++k;
    if (k == curve.size()) break;
    sum += envelope[k];
  }
  return sum / 101.0;
}

MapScores map_scores(std::span<const Detection> dets, std::span<const GroundTruth> truths,
                     const EvalConfig& config) {
  config.validate();
  std::map<int, long> truth_counts;
  for (const auto& t : truths) ++truth_counts[t.class_id];
  if (truth_counts.empty()) throw Error(Errc::NoGroundTruth, "no ground-truth instances");

  std::vector<Detection> filtered;
  if (config.apply_nms) {
    std::map<std::string, std::vector<Detection>> by_image;
    for (const auto& d : dets) by_image[d.image_id].push_back(d);
    for (auto& [id, group] : by_image) {
      auto kept = nms(group, config.nms_iou);
      filtered.insert(filtered.end(), kept.begin(), kept.end());
    }
  } else {
    filtered.assign(dets.begin(), dets.end());
  }

  MapScores out;
  out.thresholds = config.iou_thresholds;
  out.map_per_threshold.assign(config.iou_thresholds.size(), 0.0);
  double ap50_sum = 0.0;
  for (const auto& [cls, count] : truth_counts) {
    ClassScores cs{cls, count, {}, 0.0};
    bool has_50 = false;
    for (std::size_t i = 0; i < config.iou_thresholds.size(); ++i) {
      const double t = config.iou_thresholds[i];
      const double ap = average_precision(pr_curve(filtered, truths, cls, t));
      cs.ap.push_back(ap);
      out.map_per_threshold[i] += ap;
      if (std::abs(t - 0.5) < 1e-12) {
        cs.ap50 = ap;
        has_50 = true;
      }
    }
    if (!has_50) cs.ap50 = average_precision(pr_curve(filtered, truths, cls, 0.5));
    ap50_sum += cs.ap50;
    out.per_class.push_back(std::move(cs));
  }
  const auto n_classes = static_cast<double>(truth_counts.size());
  for (auto& m : out.map_per_threshold) m /= n_classes;
  out.map50 = ap50_sum / n_classes;
  out.map50_95 = std::accumulate(out.map_per_threshold.begin(), out.map_per_threshold.end(), 0.0) /
                 static_cast<double>(out.map_per_threshold.size());
  return out;
}

std::vector<Detection> parse_detections(std::string_view text) {
  std::vector<Detection> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    Detection d;
    if (!(ls >> d.image_id)) continue;
    if (!(ls >> d.class_id >> d.confidence >> d.box.cx >> d.box.cy >> d.box.w >> d.box.h)) {
      throw Error(Errc::MalformedLine, fmt::format("detections line {}", line_no));
    }
    std::string extra;
    if (ls >> extra) throw Error(Errc::MalformedLine, fmt::format("detections line {}", line_no));
    if (d.confidence < 0.0 || d.confidence > 1.0) {
      throw Error(Errc::CoordinateOutOfRange,
                  fmt::format("detections line {}: confidence {}", line_no, d.confidence));
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  return parse_detections(read_text_file(path));
}

std::string emit_detections(std::span<const Detection> dets) {
  std::string out;
  for (const auto& d : dets) {
    out += fmt::format("{} {} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f}\n", d.image_id, d.class_id,
                       d.confidence, d.box.cx, d.box.cy, d.box.w, d.box.h);
  }
  return out;
}

std::string map_scores_csv(const MapScores& s) {
  std::string out = "metric,class,threshold,value\n";
  out += fmt::format("mAP50,all,0.50,{}\n", s.map50);
  out += fmt::format("mAP50_95,all,0.50:0.95,{}\n", s.map50_95);
  for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
    out += fmt::format("mAP,all,{:.2f},{}\n", s.thresholds[i], s.map_per_threshold[i]);
  }
  for (const auto& c : s.per_class) {
    for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
      out += fmt::format("AP,{},{:.2f},{}\n", c.class_id, s.thresholds[i], c.ap[i]);
    }
  }
  return out;
}

std::vector<GroundTruth> truths_from(std::span<const LabeledImage> images) {
  std::vector<GroundTruth> out;
  for (const auto& li : images) {
    for (const auto& inst : li.instances) out.push_back({li.image.id, inst.class_id, inst.box});
  }
  return out;
}

}  // namespace synmix
