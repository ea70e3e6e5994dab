#include "synmix/experiment.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <set>

#include <fmt/format.h>

#include "synmix/detect.hpp"
#include "synmix/error.hpp"
#include "synmix/iqa.hpp"
#include "synmix/log.hpp"
#include "synmix/manifest.hpp"
#include "synmix/parallel.hpp"
#include "synmix/pipeline.hpp"
#include "synmix/random.hpp"
#include "synmix/report.hpp"
#include "synmix/stats.hpp"

namespace synmix {
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kTableMetrics{"mAP50", "mAP50_95"};
const std::vector<std::string> kAllMetrics{"mAP50", "mAP50_95", "precision", "recall", "F1"};

[[noreturn]] void config_error(const std::string& what) { throw Error(Errc::ConfigInvalid, what); }

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

std::string_view to_string(BaselineMode m) {
  switch (m) {
    case BaselineMode::Once: return "once";
    case BaselineMode::PerReplicate: return "per-replicate";
    case BaselineMode::None: return "none";
  }
  return "?";
}

/// Files of one stage. Nothing is ever overwritten.
class StageDir {
 public:
  explicit StageDir(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  const fs::path& path() const { return dir_; }

  void text(const fs::path& rel, const std::string& content) const {
    const fs::path p = dir_ / rel;
    if (fs::exists(p)) throw Error(Errc::IoFailure, "refusing to overwrite " + p.string());
    write_text_file(p, content);
  }
  void json(const fs::path& rel, const nlohmann::json& j) const { text(rel, j.dump(2) + "\n"); }

 private:
  fs::path dir_;
};

struct PlanIndexEntry {
  std::string key;
  double p = 0.0;
  int replicate_id = 0;
  std::string combination;
};

struct Context {
  const ExperimentConfig& config;
  fs::path out;
  RunSummary& summary;

  fs::path stage_dir(const std::string& name) const { return out / name; }

  void notice(const std::string& msg) const {
    warn(msg);
    summary.notices.push_back(msg);
  }

  std::vector<PlanIndexEntry> plan_index() const {
    std::vector<PlanIndexEntry> out_entries;
    const auto index = read_json_file(out / "plans" / "index.json");
    for (const auto& j : index.at("plans")) {
      out_entries.push_back({j.at("key").get<std::string>(), j.at("p").get<double>(),
                             j.at("replicate_id").get<int>(),
                             j.at("combination").get<std::string>()});
    }
    return out_entries;
  }

  /// Combination labels in ascending p.
  std::vector<std::string> combinations() const {
    std::vector<std::string> rows;
    for (const auto& e : plan_index()) {
      if (std::find(rows.begin(), rows.end(), e.combination) == rows.end()) {
        rows.push_back(e.combination);
      }
    }
    return rows;
  }
};

// --- stages ----------------------------------------------------------------

void stage_split(const Context& ctx) {
  const StageDir dir(ctx.stage_dir("split"));
  const Manifest real = Manifest::load(ctx.config.real_manifest_path());
  for (const auto& e : real.images) {
    if (e.image.provenance != Provenance::Real) {
      throw Error(Errc::SchemaViolation, "real manifest lists synthetic image " + e.image.id);
    }
  }
  std::vector<std::string> ids;
  for (const auto& e : real.images) ids.push_back(e.image.id);
  const Split split = split_ids(ids, ctx.config.split);

  auto subset = [&](const std::vector<std::string>& part) {
    Manifest m;
    for (const auto& id : part) m.images.push_back(*real.find(id));
    return m.relative_to(dir.path());
  };
  dir.json("train.json", subset(split.train).to_json());
  dir.json("val.json", subset(split.val).to_json());
  dir.json("test.json", subset(split.test).to_json());
  dir.json("split.json", {{"train", split.train},
                          {"val", split.val},
                          {"test", split.test},
                          {"fractions",
                           {ctx.config.split.train_frac, ctx.config.split.val_frac,
                            ctx.config.split.test_frac}},
                          {"seed", ctx.config.split.seed}});
}

void check_provenance_chain(const Manifest& synthetic) {
  const auto ingested = synthetic.meta.contains("ingested")
                            ? synthetic.meta["ingested"].get<std::set<std::string>>()
                            : std::set<std::string>{};
  for (const auto& e : synthetic.images) {
    if (e.image.provenance != Provenance::Synthetic) {
      throw Error(Errc::SchemaViolation, "synthetic manifest lists real image " + e.image.id);
    }
    if (!fs::exists(sidecar_path(e.image.path)) && !ingested.count(e.image.id)) {
      throw Error(Errc::SchemaViolation,
                  "synthetic image " + e.image.id + " has no generation sidecar or ingestion record");
    }
    if (e.labels_path.empty()) {
      throw Error(Errc::SchemaViolation, "synthetic image " + e.image.id + " is not annotated");
    }
  }
}

void stage_plans(const Context& ctx) {
  const auto& cfg = ctx.config;
  const StageDir dir(ctx.stage_dir("plans"));
  const Manifest real = Manifest::load(ctx.out / "split" / "train.json");
  const auto split_j = read_json_file(ctx.out / "split" / "split.json");
  const Manifest synthetic = Manifest::load(cfg.synthetic_manifest_path());
  check_provenance_chain(synthetic);

  std::set<std::string> held_out;
  for (const char* part : {"val", "test"}) {
    for (const auto& id : split_j.at(part)) held_out.insert(id.get<std::string>());
  }

  MixtureRequest base;
  for (const auto& e : real.images) base.real_train_ids.push_back(e.image.id);
  for (const auto& e : synthetic.images) base.synthetic_pool_ids.push_back(e.image.id);
  base.base_seed = cfg.seed;
  base.n_training = cfg.n_training;

  std::vector<double> mixed;
  bool has_zero = cfg.baseline != BaselineMode::None;
  for (double p : cfg.p_values) {
    if (p == 0.0) has_zero = true;
    else mixed.push_back(p);
  }
  std::sort(mixed.begin(), mixed.end());
  mixed.erase(std::unique(mixed.begin(), mixed.end()), mixed.end());

  std::vector<MixturePlan> plans;
  if (has_zero) {
    MixtureRequest r = base;
    r.p_values = {0.0};
    r.replicates = cfg.baseline == BaselineMode::PerReplicate ? cfg.replicates : 1;
    plans = build_mixture_plans(r);
  }
  if (!mixed.empty()) {
    MixtureRequest r = base;
    r.p_values = mixed;
    r.replicates = cfg.replicates;
    auto more = build_mixture_plans(r);
    plans.insert(plans.end(), more.begin(), more.end());
  }

  Manifest sources = real;
  sources.images.insert(sources.images.end(), synthetic.images.begin(), synthetic.images.end());
  nlohmann::json index = nlohmann::json::array();
  for (const auto& plan : plans) {
    for (const auto& id : plan.real_ids) {
      if (held_out.count(id)) throw Error(Errc::DuplicateId, "held-out image in training plan: " + id);
    }
    dir.json(plan.key() + ".json", mixture_manifest(plan, sources, dir.path()).to_json());
    index.push_back({{"key", plan.key()},
                     {"p", plan.p},
                     {"replicate_id", plan.replicate_id},
                     {"combination", plan.combination_label()},
                     {"n_training", plan.n_training},
                     {"n_synthetic", plan.n_synthetic},
                     {"seed", plan.seed}});
  }
  dir.json("index.json", {{"plans", index},
                          {"baseline", to_string(cfg.baseline)},
                          {"replicates", cfg.replicates}});
}

void stage_detections(const Context& ctx) {
  const auto& cfg = ctx.config;
  const StageDir dir(ctx.stage_dir("detections"));
  const auto plans = ctx.plan_index();
  const Manifest test = Manifest::load(ctx.out / "split" / "test.json");
  std::set<std::string> test_ids;
  for (const auto& e : test.images) test_ids.insert(e.image.id);

  struct Unit {
    const ModelSpec* model;
    const PlanIndexEntry* plan;
  };
  std::vector<Unit> units;
  for (const auto& m : cfg.models) {
    for (const auto& p : plans) units.push_back({&m, &p});
  }

  parallel_for(units.size(), cfg.workers, [&](std::size_t i) {
    const auto& [model, plan] = units[i];
    std::vector<Detection> dets;
    if (cfg.offline_detections) {
      const fs::path file = *cfg.offline_detections / model->name / (plan->key + ".txt");
      if (!fs::exists(file)) {
        throw Error(Errc::IoFailure, "missing offline detections " + file.string());
      }
      dets = read_detections(file);
    } else {
      nlohmann::json request{
          {"model", model->name},
          {"class_count", cfg.class_count},
          {"train_manifest", fs::absolute(ctx.out / "plans" / (plan->key + ".json")).string()},
          {"val_manifest", fs::absolute(ctx.out / "split" / "val.json").string()},
          {"test_manifest", fs::absolute(ctx.out / "split" / "test.json").string()},
          {"hyperparameters", cfg.training.to_json()},
          {"seed", derive_seed(cfg.seed, {hash_string(plan->key)})}};
      dets = detect_with_adapter(*model->detector, request,
                                 ctx.out / "adapter_runs" / model->name / plan->key);
    }
    for (const auto& d : dets) {
      if (!test_ids.count(d.image_id)) {
        throw Error(Errc::SchemaViolation, fmt::format("{} / {}: detection for non-test image '{}'",
                                                       model->name, plan->key, d.image_id));
      }
      if (d.class_id < 0 || d.class_id >= cfg.class_count) {
        throw Error(Errc::UnknownClass, fmt::format("{} / {}: class {}", model->name, plan->key,
                                                    d.class_id));
      }
    }
    dir.text(fs::path(model->name) / (plan->key + ".txt"), emit_detections(dets));
  });
}

void stage_eval(const Context& ctx) {
  const auto& cfg = ctx.config;
  const StageDir dir(ctx.stage_dir("eval"));
  const auto plans = ctx.plan_index();
  const Manifest test = Manifest::load(ctx.out / "split" / "test.json");
  const auto truths = truths_from(load_labeled_images(test, cfg.class_count));
  const auto replicate_baseline =
      cfg.baseline == BaselineMode::Once ? cfg.replicates : 1;

  struct Unit {
    const ModelSpec* model;
    const PlanIndexEntry* plan;
  };
  std::vector<Unit> units;
  for (const auto& m : cfg.models) {
    for (const auto& p : plans) units.push_back({&m, &p});
  }
  std::vector<std::vector<std::pair<std::string, double>>> values(units.size());

  parallel_for(units.size(), cfg.workers, [&](std::size_t i) {
    const auto& [model, plan] = units[i];
    const auto dets =
        read_detections(ctx.out / "detections" / model->name / (plan->key + ".txt"));
    const MapScores s = map_scores(dets, truths);
    dir.text(fs::path(model->name) / (plan->key + ".csv"), map_scores_csv(s));

    std::vector<Detection> kept;
    for (const auto& d : dets) {
      if (d.confidence >= cfg.score_threshold) kept.push_back(d);
    }
    const Prf f = prf(match_detections(kept, truths, 0.5).counts);
    auto& v = values[i];
    v.emplace_back("mAP50", s.map50);
    v.emplace_back("mAP50_95", s.map50_95);
    const std::pair<const char*, std::optional<double>> extra[] = {
        {"precision", f.precision}, {"recall", f.recall}, {"F1", f.f1}};
    for (const auto& [name, value] : extra) {
      if (value) v.emplace_back(name, *value);
      else warn(fmt::format("{} undefined for {} / {}", name, model->name, plan->key));
    }
  });

  std::vector<report::MetricSample> samples;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& [model, plan] = units[i];
    const bool repeat = plan->p == 0.0 && cfg.baseline == BaselineMode::Once;
    const int copies = repeat ? replicate_baseline : 1;
    for (int r = 0; r < copies; ++r) {
      for (const auto& [metric, value] : values[i]) {
        samples.push_back({model->name, plan->combination, repeat ? r : plan->replicate_id, metric,
                           value});
      }
    }
  }
  dir.text("metrics.csv", report::metric_samples_csv(samples));
}

void stage_stats(const Context& ctx) {
  const auto& cfg = ctx.config;
  const StageDir dir(ctx.stage_dir("stats"));
  const auto samples =
      report::parse_metric_samples_csv(read_text_file(ctx.out / "eval" / "metrics.csv"));
  const auto rows = ctx.combinations();
  nlohmann::json all = nlohmann::json::object();
  if (rows.size() < 2) {
    ctx.notice("stats stage skipped: only one dataset combination");
    dir.json("stat_report.json",
             {{"alpha", cfg.alpha}, {"skipped", "single dataset combination"}, {"models", all}});
    return;
  }
  for (const auto& model : cfg.models) {
    for (const auto& metric : kTableMetrics) {
      std::vector<stats::Sample> groups;
      for (const auto& row : rows) {
        stats::Sample g{row, {}};
        for (const auto& s : samples) {
          if (s.model == model.name && s.metric == metric && s.dataset_combination == row) {
            g.values.push_back(s.value);
          }
        }
        if (g.values.empty()) {
          throw Error(Errc::MissingCell, fmt::format("no {} for {} on {}", metric, model.name, row));
        }
        groups.push_back(std::move(g));
      }
      const auto result = stats::branch_pipeline(groups, cfg.alpha);
      const auto j = stats::to_json(result, groups, cfg.alpha);
      dir.json(fs::path(model.name) / (metric + ".json"), j);
      all[model.name][metric] = j;
    }
  }
  dir.json("stat_report.json", {{"alpha", cfg.alpha}, {"models", all}});
}

void stage_report(const Context& ctx) {
  const auto& cfg = ctx.config;
  const StageDir dir(ctx.stage_dir("report"));
  const auto samples =
      report::parse_metric_samples_csv(read_text_file(ctx.out / "eval" / "metrics.csv"));
  const auto stat_report = read_json_file(ctx.out / "stats" / "stat_report.json");
  const auto rows = ctx.combinations();
  std::vector<std::string> columns;
  for (const auto& m : cfg.models) columns.push_back(m.name);

  std::string md = "# Detection results\n\n";
  md += fmt::format("Training: {} epochs, patience {}, batch {}, learning rate {}, {} schedule, "
                    "augmentation {}.\n",
                    cfg.training.epochs, cfg.training.patience, cfg.training.batch,
                    cfg.training.learning_rate, cfg.training.schedule,
                    cfg.training.augmentation ? "on" : "off");
  md += fmt::format("{} replicates per mixture, seed {}, alpha {}.\n", cfg.replicates, cfg.seed,
                    cfg.alpha);

  for (const auto& metric : kTableMetrics) {
    report::LetterMap letters;
    for (const auto& m : columns) {
      if (!stat_report.contains("models") || !stat_report["models"].contains(m)) continue;
      for (const auto& g : stat_report["models"][m][metric].at("groups")) {
        letters[m][g.at("label").get<std::string>()] = g.at("letters").get<std::string>();
      }
    }
    const auto table =
        report::build_table(report::aggregate(samples, metric), metric, rows, columns, letters);
    dir.text(metric + ".md", report::render_table(table, report::Format::Markdown));
    dir.text(metric + ".csv", report::render_table(table, report::Format::Csv));
    dir.text(metric + ".tex", report::render_table(table, report::Format::Latex));
    md += fmt::format("\n## {} (mean ± 1 SD)\n\n{}", metric,
                      report::render_table(table, report::Format::Markdown));
  }
  for (const auto& metric : kAllMetrics) {
    const bool present = std::any_of(samples.begin(), samples.end(),
                                     [&](const auto& s) { return s.metric == metric; });
    if (!present) continue;
    const auto boxes = report::boxplot_export(samples, metric, report::GroupBy::ModelAndCombination);
    dir.text(metric + "_boxplot.csv", report::boxplot_csv(boxes));
  }
  dir.text("report.md", md);
  dir.json("metadata.json", {{"training", cfg.training.to_json()},
                             {"models", columns},
                             {"combinations", rows},
                             {"replicates", cfg.replicates},
                             {"seed", cfg.seed},
                             {"alpha", cfg.alpha},
                             {"baseline", to_string(cfg.baseline)}});
}

void stage_iqa(const Context& ctx) {
  const auto& cfg = ctx.config;
  const StageDir dir(ctx.stage_dir("iqa"));
  std::vector<ManifestEntry> images;
  for (const auto& path : {cfg.real_manifest_path(), cfg.synthetic_manifest_path()}) {
    const Manifest m = Manifest::load(path);
    images.insert(images.end(), m.images.begin(), m.images.end());
  }
  std::optional<iqa::BrisqueModel> brisque;
  std::optional<iqa::NiqeModel> niqe;
  if (!cfg.iqa.brisque_model.empty()) brisque = iqa::BrisqueModel::load(cfg.iqa.brisque_model);
  if (!cfg.iqa.niqe_model.empty()) niqe = iqa::NiqeModel::load(cfg.iqa.niqe_model);

  std::vector<std::vector<iqa::ImageScore>> per_image(images.size());
  parallel_for(images.size(), cfg.workers, [&](std::size_t i) {
    const auto& e = images[i];
    const GrayImage img = read_gray_png(e.image.path);
    const std::string prov(to_string(e.image.provenance));
    if (brisque) {
      per_image[i].push_back(
          {e.image.id, "BRISQUE", iqa::brisque_score(iqa::brisque_features(img), *brisque), prov});
    }
    if (niqe) {
      if (img.rows() < niqe->patch_size || img.cols() < niqe->patch_size) {
        warn(fmt::format("image '{}' is smaller than one NIQE patch", e.image.id));
      } else {
        per_image[i].push_back({e.image.id, "NIQE", iqa::niqe_score(img, *niqe), prov});
      }
    }
  });
  std::vector<iqa::ImageScore> scores;
  for (auto& v : per_image) scores.insert(scores.end(), v.begin(), v.end());

  if (!cfg.iqa.external_scores.empty()) {
    std::map<std::string, std::string> prov_of;
    for (const auto& e : images) prov_of[e.image.id] = std::string(to_string(e.image.provenance));
    for (const auto& s : iqa::load_external_scores(cfg.iqa.external_scores)) {
      const auto it = prov_of.find(s.image_id);
      if (it == prov_of.end()) {
        warn("external score for unknown image " + s.image_id);
        continue;
      }
      std::string metric(iqa::to_string(s.metric));
      if (s.property) metric += "-" + *s.property;
      scores.push_back({s.image_id, metric, s.value, it->second});
    }
  }
  dir.text("scores.csv", iqa::image_scores_csv(scores));

  std::vector<std::string> metrics;
  for (const auto& s : scores) {
    if (std::find(metrics.begin(), metrics.end(), s.metric) == metrics.end()) {
      metrics.push_back(s.metric);
    }
  }
  nlohmann::json summary = nlohmann::json::object();
  std::vector<report::MetricSample> samples;
  for (const auto& s : scores) samples.push_back({s.provenance, "", 0, s.metric, s.value});
  std::string boxes_csv;
  for (const auto& metric : metrics) {
    std::map<std::string, std::vector<double>> by_prov;
    for (const auto& s : scores) {
      if (s.metric == metric) by_prov[s.provenance].push_back(s.value);
    }
    nlohmann::json entry = nlohmann::json::object();
    for (const auto& [prov, v] : by_prov) {
      entry[prov] = {{"n", v.size()}, {"mean", stats::mean(v)}, {"sd", stats::sample_sd(v)}};
    }
    if (by_prov.count("real") && by_prov.count("synthetic")) {
      try {
        entry["mann_whitney_u"] = stats::to_json(
            stats::mann_whitney_u(by_prov["real"], by_prov["synthetic"]));
      } catch (const Error& e) {
        entry["mann_whitney_u"] = {{"error", e.what()}};
      }
    }
    summary[metric] = std::move(entry);
    auto boxes = report::boxplot_export(samples, metric, report::GroupBy::Model);
    for (auto& b : boxes) b.group = metric + " / " + b.group;
    const auto csv = report::boxplot_csv(boxes);
    boxes_csv += boxes_csv.empty() ? csv : csv.substr(csv.find('\n') + 1);
  }
  dir.json("summary.json", summary);
  if (!boxes_csv.empty()) dir.text("boxplot.csv", boxes_csv);
}

}  // namespace

// --- config -----------------------------------------------------------------

nlohmann::json TrainingHyperparameters::to_json() const {
  return {{"epochs", epochs},         {"patience", patience}, {"batch", batch},
          {"learning_rate", learning_rate}, {"schedule", schedule}, {"augmentation", augmentation}};
}

TrainingHyperparameters TrainingHyperparameters::from_json(const nlohmann::json& j) {
  TrainingHyperparameters t;
  t.epochs = j.value("epochs", t.epochs);
  t.patience = j.value("patience", t.patience);
  t.batch = j.value("batch", t.batch);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.schedule = j.value("schedule", t.schedule);
  t.augmentation = j.value("augmentation", t.augmentation);
  return t;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  static const std::set<std::string> kKeys{
      "dataset_root", "real_manifest", "synthetic_manifest", "class_count", "split",
      "p_values",     "replicates",    "n_training",         "seed",        "baseline",
      "alpha",        "score_threshold", "models",           "offline_detections",
      "workers",      "training",      "iqa"};
  if (!j.is_object()) config_error("config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.count(key)) config_error("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  c.source = j;
  try {
    c.dataset_root = resolve(base_dir, j.at("dataset_root").get<std::string>());
    c.real_manifest = j.value("real_manifest", c.real_manifest.string());
    c.synthetic_manifest = j.value("synthetic_manifest", c.synthetic_manifest.string());
    c.class_count = j.value("class_count", c.class_count);
    if (j.contains("split")) {
      const auto& s = j["split"];
      c.split.train_frac = s.value("train", c.split.train_frac);
      c.split.val_frac = s.value("val", c.split.val_frac);
      c.split.test_frac = s.value("test", c.split.test_frac);
      c.split.seed = s.value("seed", c.split.seed);
    }
    if (j.contains("p_values")) c.p_values = j["p_values"].get<std::vector<double>>();
    c.replicates = j.value("replicates", c.replicates);
    c.n_training = j.value("n_training", c.n_training);
    c.seed = j.value("seed", c.seed);
    const std::string baseline = j.value("baseline", std::string("once"));
    if (baseline == "once") c.baseline = BaselineMode::Once;
    else if (baseline == "per-replicate") c.baseline = BaselineMode::PerReplicate;
    else if (baseline == "none") c.baseline = BaselineMode::None;
    else config_error("baseline must be once, per-replicate or none");
    c.alpha = j.value("alpha", c.alpha);
    c.score_threshold = j.value("score_threshold", c.score_threshold);
    c.workers = j.value("workers", c.workers);
    if (j.contains("offline_detections")) {
      c.offline_detections = resolve(base_dir, j["offline_detections"].get<std::string>());
    }
    for (const auto& m : j.at("models")) {
      ModelSpec spec;
      if (m.is_string()) {
        spec.name = m.get<std::string>();
      } else {
        spec.name = m.at("name").get<std::string>();
        if (m.contains("detector")) {
          const auto& d = m["detector"];
          if (d.is_string() && d.get<std::string>() == "stub") {
            spec.detector = AdapterSpec::stub(AdapterRole::Detector);
          } else {
            spec.detector = AdapterSpec::from_json(d, base_dir);
          }
        }
      }
      c.models.push_back(std::move(spec));
    }
    if (j.contains("training")) c.training = TrainingHyperparameters::from_json(j["training"]);
    if (j.contains("iqa")) {
      const auto& q = j["iqa"];
      c.iqa.enabled = q.value("enabled", true);
      c.iqa.brisque_model = resolve(base_dir, q.value("brisque_model", std::string{}));
      c.iqa.niqe_model = resolve(base_dir, q.value("niqe_model", std::string{}));
      c.iqa.external_scores = resolve(base_dir, q.value("external_scores", std::string{}));
    }
  } catch (const nlohmann::json::exception& e) {
    config_error(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    config_error(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const Error& e) {
    config_error(e.what());
  }
  return from_json(j, path.parent_path());
}

void ExperimentConfig::validate() const {
  if (class_count < 1) config_error("class_count must be >= 1");
  try {
    split.validate();
  } catch (const Error& e) {
    config_error(e.what());
  }
  for (double p : p_values) {
    if (!(p >= 0.0 && p < 1.0)) config_error(fmt::format("p value {} outside [0, 1)", p));
  }
  if (p_values.empty() && baseline == BaselineMode::None) config_error("nothing to evaluate");
  if (replicates < 1) config_error("replicates must be >= 1");
  if (n_training < 0) config_error("n_training must be >= 0");
  if (!(alpha > 0.0 && alpha < 1.0)) config_error("alpha must lie in (0, 1)");
  if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
    config_error("score_threshold must lie in [0, 1]");
  }
  if (workers < 1) config_error("workers must be >= 1");
  if (models.empty()) config_error("at least one model is required");
  std::set<std::string> names;
  for (const auto& m : models) {
    if (m.name.empty() || m.name.find_first_of("/\\") != std::string::npos || m.name == "." ||
        m.name == "..") {
      config_error("invalid model name '" + m.name + "'");
    }
    if (!names.insert(m.name).second) config_error("duplicate model '" + m.name + "'");
    if (!offline_detections && !m.detector) {
      config_error("model '" + m.name + "' needs a detector adapter or offline detections");
    }
    if (m.detector && m.detector->role != AdapterRole::Detector) {
      config_error("model '" + m.name + "' adapter must have role detector");
    }
  }
}

fs::path ExperimentConfig::real_manifest_path() const { return resolve(dataset_root, real_manifest); }

fs::path ExperimentConfig::synthetic_manifest_path() const {
  return resolve(dataset_root, synthetic_manifest);
}

// --- runner -----------------------------------------------------------------

const std::vector<std::string>& experiment_stages() {
  static const std::vector<std::string> kStages{"split", "plans", "detections", "eval",
                                                "stats", "report", "iqa"};
  return kStages;
}

RunSummary run_experiment(const ExperimentConfig& config, const fs::path& out_dir,
                          const RunOptions& options) {
  config.validate();
  RunSummary summary;
  const std::string config_text = config.source.dump(2) + "\n";
  const fs::path markers = out_dir / ".stages";
  const bool exists = fs::exists(out_dir) && !fs::is_empty(out_dir);
  if (exists && !options.resume) {
    throw Error(Errc::ConfigInvalid,
                fmt::format("output directory {} is not empty; resume or choose another",
                            out_dir.string()));
  }
  if (exists) {
    const fs::path stored = out_dir / "config.json";
    if (!fs::exists(stored) || read_text_file(stored) != config_text) {
      throw Error(Errc::ConfigInvalid, "cannot resume: configuration differs from the stored run");
    }
  } else {
    fs::create_directories(markers);
    write_text_file(out_dir / "config.json", config_text);
  }
  fs::create_directories(markers);

  const Context ctx{config, out_dir, summary};
  using StageFn = void (*)(const Context&);
  const std::map<std::string, StageFn> fns{{"split", stage_split},   {"plans", stage_plans},
                                           {"detections", stage_detections},
                                           {"eval", stage_eval},     {"stats", stage_stats},
                                           {"report", stage_report}, {"iqa", stage_iqa}};
  for (const auto& name : experiment_stages()) {
    if (name == "iqa" && !config.iqa.enabled) continue;
    const fs::path marker = markers / (name + ".done");
    if (fs::exists(marker)) {
      summary.skipped.push_back(name);
      continue;
    }
    // Partial output of an interrupted attempt belongs to this stage only.
    fs::remove_all(out_dir / name);
    if (name == "detections") fs::remove_all(out_dir / "adapter_runs");
    fns.at(name)(ctx);
    write_text_file(marker, "");
    summary.completed.push_back(name);
  }
  return summary;
}

}  // namespace synmix
