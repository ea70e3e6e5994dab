// synmix: command-line front end.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "synmix/adapter.hpp"
#include "synmix/annotation.hpp"
#include "synmix/detect.hpp"
#include "synmix/error.hpp"
#include "synmix/experiment.hpp"
#include "synmix/iqa.hpp"
#include "synmix/log.hpp"
#include "synmix/manifest.hpp"
#include "synmix/parallel.hpp"
#include "synmix/pipeline.hpp"
#include "synmix/report.hpp"
#include "synmix/sampler.hpp"
#include "synmix/stats.hpp"

namespace fs = std::filesystem;
using namespace synmix;

namespace {

AdapterSpec adapter_or_stub(const std::string& arg, AdapterRole role) {
  if (arg.empty() || arg == "stub") return AdapterSpec::stub(role);
  AdapterSpec spec = AdapterSpec::load(arg);
  if (spec.role != role) {
    throw Error(Errc::ConfigInvalid,
                fmt::format("{} is a {} adapter, need {}", arg, to_string(spec.role), to_string(role)));
  }
  return spec;
}

void emit(const std::string& text, const std::string& output) {
  if (output.empty() || output == "-") std::cout << text;
  else write_text_file(output, text);
}

// --- convert -----------------------------------------------------------------

struct ConvertArgs {
  std::string input, output, to = "polygons", segmenter, class_map;
  int class_count = 3;
  int workers = 1;
};

int cmd_convert(const ConvertArgs& a) {
  if (a.to != "polygons" && a.to != "boxes") {
    throw Error(Errc::ConfigInvalid, "--to must be polygons or boxes");
  }
  std::optional<ClassMap> cmap;
  if (a.class_map == "botanical") cmap = ClassMap::botanical();
  else if (!a.class_map.empty()) cmap = ClassMap::from_json(read_json_file(a.class_map));
  const int source_classes =
      cmap ? static_cast<int>(cmap->source_classes().size()) : a.class_count;

  auto convert_entries = [&](const std::vector<LabelEntry>& entries) {
    LabeledImage li;
    li.instances = to_instances(entries);
    if (cmap) li = remap_classes(li, *cmap);
    if (a.to == "polygons") {
      for (auto& inst : li.instances) {
        if (!inst.polygon) inst.polygon = polygon_from_bbox(inst.class_id, inst.box);
      }
    }
    return to_entries(li.instances, a.to == "polygons");
  };

  if (fs::path(a.input).extension() == ".json") {
    Manifest m = Manifest::load(a.input);
    const fs::path out(a.output);
    if (!a.segmenter.empty()) {
      if (a.to != "polygons") throw Error(Errc::ConfigInvalid, "segmentation produces polygons");
      m = segment_dataset(m, source_classes, adapter_or_stub(a.segmenter, AdapterRole::Segmenter),
                          out, a.workers);
    } else {
      for (auto& e : m.images) {
        if (e.labels_path.empty()) continue;
        const fs::path path = out / "labels" / (e.image.id + ".txt");
        write_label_file(path, convert_entries(read_label_file(e.labels_path, source_classes)));
        e.labels_path = path;
      }
    }
    m.relative_to(out).save(out / "manifest.json");
    std::cerr << fmt::format("converted {} images into {}\n", m.images.size(), out.string());
    return 0;
  }
  const auto entries = read_label_file(a.input, source_classes);
  emit(emit_label_file(convert_entries(entries)), a.output);
  return 0;
}

// --- mask ----------------------------------------------------------------------

struct MaskArgs {
  std::string image, labels, output;
  int class_count = 3;
  int target = 512;
};

int cmd_mask(const MaskArgs& a) {
  const GrayImage img = read_gray_png(a.image);
  const auto entries = read_label_file(a.labels, a.class_count);
  const auto instances = to_instances(entries);
  const std::string stem = fs::path(a.image).stem().string();
  int written = 0;
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const auto& inst = instances[k];
    const PolygonAnnotation poly = inst.polygon ? *inst.polygon : polygon_from_bbox(inst.class_id, inst.box);
    const BitMask mask = rasterize_polygon(poly, static_cast<int>(img.cols()), static_cast<int>(img.rows()));
    const auto extent = mask_extent(mask);
    if (!extent) {
      warn(fmt::format("instance {} of {} covers no pixel centre", k, a.image));
      continue;
    }
    const auto [x0, y0, w, h] = std::tuple{(*extent)(0), (*extent)(1), (*extent)(2), (*extent)(3)};
    const GrayImage crop = img.block(y0, x0, h, w) * mask.block(y0, x0, h, w).cast<double>();
    const BitMask crop_mask = mask.block(y0, x0, h, w);
    const fs::path out = fs::path(a.output) / fmt::format("{}_{:03d}_c{}", stem, k, inst.class_id);
    write_gray_png(out.string() + ".png", pad_to_square(crop, a.target));
    write_mask_png(out.string() + "_mask.png", pad_to_square(crop_mask, a.target));
    ++written;
  }
  std::cerr << fmt::format("wrote {} instance crops to {}\n", written, a.output);
  return 0;
}

// --- split / mix -----------------------------------------------------------------

struct SplitArgs {
  std::string manifest, output;
  SplitSpec spec;
};

int cmd_split(const SplitArgs& a) {
  const Manifest m = Manifest::load(a.manifest);
  std::vector<std::string> ids;
  for (const auto& e : m.images) ids.push_back(e.image.id);
  const Split s = split_ids(ids, a.spec);
  const fs::path out(a.output);
  const std::pair<const char*, const std::vector<std::string>*> parts[] = {
      {"train", &s.train}, {"val", &s.val}, {"test", &s.test}};
  for (const auto& [name, list] : parts) {
    Manifest sub;
    for (const auto& id : *list) sub.images.push_back(*m.find(id));
    sub.relative_to(out).save(out / (std::string(name) + ".json"));
  }
  write_json_file(out / "split.json", {{"train", s.train}, {"val", s.val}, {"test", s.test},
                                       {"seed", a.spec.seed}});
  std::cerr << fmt::format("train {} / val {} / test {}\n", s.train.size(), s.val.size(),
                           s.test.size());
  return 0;
}

struct MixArgs {
  std::string train, synthetic, output;
  std::vector<double> p_values{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int replicates = 10;
  std::uint64_t seed = 0;
  int n_training = 0;
};

int cmd_mix(const MixArgs& a) {
  const Manifest train = Manifest::load(a.train);
  const Manifest synthetic = Manifest::load(a.synthetic);
  MixtureRequest r;
  for (const auto& e : train.images) r.real_train_ids.push_back(e.image.id);
  for (const auto& e : synthetic.images) r.synthetic_pool_ids.push_back(e.image.id);
  r.p_values = a.p_values;
  r.replicates = a.replicates;
  r.base_seed = a.seed;
  r.n_training = a.n_training;
  const auto plans = build_mixture_plans(r);
  Manifest sources = train;
  sources.images.insert(sources.images.end(), synthetic.images.begin(), synthetic.images.end());
  nlohmann::json index = nlohmann::json::array();
  for (const auto& p : plans) {
    emit_mixture_manifest(p, sources, fs::path(a.output) / (p.key() + ".json"));
    index.push_back({{"key", p.key()}, {"p", p.p}, {"replicate_id", p.replicate_id},
                     {"combination", p.combination_label()}, {"n_synthetic", p.n_synthetic},
                     {"n_training", p.n_training}, {"seed", p.seed}});
  }
  write_json_file(fs::path(a.output) / "index.json", {{"plans", index}});
  std::cerr << fmt::format("wrote {} mixture manifests\n", plans.size());
  return 0;
}

// --- generate / annotate -----------------------------------------------------------

struct GenerateArgs {
  GenerationRequest request;
  std::string adapter, output;
};

int cmd_generate(const GenerateArgs& a) {
  const auto spec = adapter_or_stub(a.adapter, AdapterRole::Generator);
  const fs::path out(a.output);
  Manifest m;
  m.images = generate_images(std::span(&a.request, 1), spec, out);
  m.relative_to(out).save(out / "manifest.json");
  std::cerr << fmt::format("generated {} images\n", m.images.size());
  return 0;
}

struct AnnotateArgs {
  std::string manifest, adapter, output;
  int class_count = 3;
  double threshold = 0.25;
};

int cmd_annotate(const AnnotateArgs& a) {
  Manifest m = Manifest::load(a.manifest);
  std::vector<ImageRef> refs;
  for (const auto& e : m.images) refs.push_back(e.image);
  const fs::path out(a.output);
  const auto labeled = annotate_images(refs, a.class_count,
                                       adapter_or_stub(a.adapter, AdapterRole::Annotator), out,
                                       a.threshold);
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    const fs::path path = out / "labels" / (labeled[i].image.id + ".txt");
    write_label_file(path, to_entries(labeled[i].instances, false));
    m.images[i].labels_path = path;
    m.images[i].model_annotated = true;
  }
  m.relative_to(out).save(out / "manifest.json");
  std::cerr << fmt::format("annotated {} images\n", labeled.size());
  return 0;
}

// --- evaluation ---------------------------------------------------------------------

struct EvalDetArgs {
  std::string manifest, detections, output;
  int class_count = 3;
  double nms_iou = -1.0;
};

int cmd_eval_det(const EvalDetArgs& a) {
  const Manifest m = Manifest::load(a.manifest);
  const auto truths = truths_from(load_labeled_images(m, a.class_count));
  const auto dets = read_detections(a.detections);
  EvalConfig cfg;
  if (a.nms_iou >= 0) {
    cfg.apply_nms = true;
    cfg.nms_iou = a.nms_iou;
  }
  emit(map_scores_csv(map_scores(dets, truths, cfg)), a.output);
  return 0;
}

struct EvalIqaArgs {
  std::string manifest, brisque_model, niqe_model, external, output;
  int workers = 1;
};

int cmd_eval_iqa(const EvalIqaArgs& a) {
  const Manifest m = Manifest::load(a.manifest);
  std::optional<iqa::BrisqueModel> brisque;
  std::optional<iqa::NiqeModel> niqe;
  if (!a.brisque_model.empty()) brisque = iqa::BrisqueModel::load(a.brisque_model);
  if (!a.niqe_model.empty()) niqe = iqa::NiqeModel::load(a.niqe_model);
  if (!brisque && !niqe && a.external.empty()) {
    throw Error(Errc::ConfigInvalid, "nothing to compute: give a model or external scores");
  }
  std::vector<std::vector<iqa::ImageScore>> rows(m.images.size());
  parallel_for(m.images.size(), a.workers, [&](std::size_t i) {
    const auto& e = m.images[i];
    const GrayImage img = read_gray_png(e.image.path);
    const std::string prov(to_string(e.image.provenance));
    if (brisque) {
      rows[i].push_back(
          {e.image.id, "BRISQUE", iqa::brisque_score(iqa::brisque_features(img), *brisque), prov});
    }
    if (niqe) rows[i].push_back({e.image.id, "NIQE", iqa::niqe_score(img, *niqe), prov});
  });
  std::vector<iqa::ImageScore> scores;
  for (auto& r : rows) scores.insert(scores.end(), r.begin(), r.end());
  if (!a.external.empty()) {
    for (const auto& s : iqa::load_external_scores(a.external)) {
      const ManifestEntry* e = m.find(s.image_id);
      if (!e) {
        warn("external score for unknown image " + s.image_id);
        continue;
      }
      std::string metric(iqa::to_string(s.metric));
      if (s.property) metric += "-" + *s.property;
      scores.push_back({s.image_id, metric, s.value, std::string(to_string(e->image.provenance))});
    }
  }
  emit(iqa::image_scores_csv(scores), a.output);
  return 0;
}

// --- stats / report ----------------------------------------------------------------

std::vector<stats::Sample> groups_for(const std::vector<report::MetricSample>& samples,
                                      const std::string& model, const std::string& metric) {
  std::vector<stats::Sample> groups;
  for (const auto& s : samples) {
    if (s.model != model || s.metric != metric) continue;
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return g.label == s.dataset_combination; });
    if (it == groups.end()) {
      groups.push_back({s.dataset_combination, {}});
      it = groups.end() - 1;
    }
    it->values.push_back(s.value);
  }
  return groups;
}

std::vector<std::string> models_in(const std::vector<report::MetricSample>& samples) {
  std::vector<std::string> out;
  for (const auto& s : samples) {
    if (std::find(out.begin(), out.end(), s.model) == out.end()) out.push_back(s.model);
  }
  return out;
}

struct StatsArgs {
  std::string input, metric = "mAP50", model, output;
  double alpha = 0.05;
};

int cmd_stats(const StatsArgs& a) {
  const auto samples = report::parse_metric_samples_csv(read_text_file(a.input));
  const auto models = a.model.empty() ? models_in(samples) : std::vector<std::string>{a.model};
  nlohmann::json out = nlohmann::json::object();
  for (const auto& model : models) {
    const auto groups = groups_for(samples, model, a.metric);
    if (groups.size() < 2) {
      throw Error(Errc::InsufficientGroups,
                  fmt::format("{} has {} dataset combinations for {}", model, groups.size(), a.metric));
    }
    out[model] = stats::to_json(stats::branch_pipeline(groups, a.alpha), groups, a.alpha);
  }
  emit(out.dump(2) + "\n", a.output);
  return 0;
}

struct ReportArgs {
  std::string input, metric = "mAP50", format = "markdown", output, boxplot;
  double alpha = 0.05;
};

int cmd_report(const ReportArgs& a) {
  const auto samples = report::parse_metric_samples_csv(read_text_file(a.input));
  const auto models = models_in(samples);
  std::vector<std::string> rows;
  report::LetterMap letters;
  for (const auto& model : models) {
    const auto groups = groups_for(samples, model, a.metric);
    for (const auto& g : groups) {
      if (std::find(rows.begin(), rows.end(), g.label) == rows.end()) rows.push_back(g.label);
    }
    if (groups.size() < 2) continue;
    const auto result = stats::branch_pipeline(groups, a.alpha);
    for (std::size_t i = 0; i < groups.size(); ++i) {
      letters[model][groups[i].label] = result.letters.letters_string(i);
    }
  }
  const auto table = report::build_table(report::aggregate(samples, a.metric), a.metric, rows,
                                         models, letters);
  emit(report::render_table(table, report::format_from_string(a.format)), a.output);
  if (!a.boxplot.empty()) {
    const auto boxes =
        report::boxplot_export(samples, a.metric, report::GroupBy::ModelAndCombination);
    write_text_file(a.boxplot, report::boxplot_csv(boxes));
  }
  return 0;
}

// --- run ------------------------------------------------------------------------------

struct RunArgs {
  std::string config, output;
  bool resume = false;
  int workers = 0;
};

int cmd_run(const RunArgs& a) {
  ExperimentConfig cfg = ExperimentConfig::load(a.config);
  if (a.workers > 0) cfg.workers = a.workers;
  const auto summary = run_experiment(cfg, a.output, {a.resume});
  for (const auto& s : summary.skipped) std::cerr << "stage " << s << ": already complete\n";
  for (const auto& s : summary.completed) std::cerr << "stage " << s << ": done\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic/real data mixture experiments for object detection"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress warnings on stderr");

  ConvertArgs conv;
  auto* c = app.add_subcommand("convert", "Convert labels between boxes and polygons");
  c->add_option("-i,--input", conv.input, "Label file or manifest (.json)")->required();
  c->add_option("-o,--output", conv.output, "Output file or directory (manifest input)");
  c->add_option("--to", conv.to, "polygons or boxes")->capture_default_str();
  c->add_option("--class-count", conv.class_count)->capture_default_str();
  c->add_option("--class-map", conv.class_map, "Class map JSON or 'botanical'");
  c->add_option("--segmenter", conv.segmenter, "Segmenter adapter spec or 'stub'");
  c->add_option("--workers", conv.workers)->capture_default_str();

  MaskArgs mask;
  auto* mk = app.add_subcommand("mask", "Extract instance crops padded to a square tile");
  mk->add_option("--image", mask.image)->required();
  mk->add_option("--labels", mask.labels)->required();
  mk->add_option("-o,--output", mask.output)->required();
  mk->add_option("--class-count", mask.class_count)->capture_default_str();
  mk->add_option("--target", mask.target, "Tile side in pixels")->capture_default_str();

  SplitArgs split;
  auto* sp = app.add_subcommand("split", "Seeded train/val/test split of a manifest");
  sp->add_option("-m,--manifest", split.manifest)->required();
  sp->add_option("-o,--output", split.output)->required();
  sp->add_option("--train", split.spec.train_frac)->capture_default_str();
  sp->add_option("--val", split.spec.val_frac)->capture_default_str();
  sp->add_option("--test", split.spec.test_frac)->capture_default_str();
  sp->add_option("--seed", split.spec.seed)->capture_default_str();

  MixArgs mix;
  auto* mx = app.add_subcommand("mix", "Build synthetic/real training mixtures");
  mx->add_option("--train", mix.train, "Real training manifest")->required();
  mx->add_option("--synthetic", mix.synthetic, "Synthetic pool manifest")->required();
  mx->add_option("-o,--output", mix.output)->required();
  mx->add_option("--p", mix.p_values, "Synthetic shares")->delimiter(',');
  mx->add_option("--replicates", mix.replicates)->capture_default_str();
  mx->add_option("--seed", mix.seed)->capture_default_str();
  mx->add_option("--n-training", mix.n_training, "Training-set size (default: real count)");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate synthetic images through an adapter");
  g->add_option("--prompt", gen.request.prompt)->required();
  g->add_option("--count", gen.request.count)->capture_default_str();
  g->add_option("--seed", gen.request.seed)->capture_default_str();
  g->add_option("--steps", gen.request.steps)->capture_default_str();
  g->add_option("--guidance", gen.request.guidance)->capture_default_str();
  g->add_option("--scheduler", gen.request.scheduler)->capture_default_str();
  g->add_option("--width", gen.request.width)->capture_default_str();
  g->add_option("--height", gen.request.height)->capture_default_str();
  g->add_option("--adapter", gen.adapter, "Generator adapter spec (default: stub)");
  g->add_option("-o,--output", gen.output)->required();

  AnnotateArgs ann;
  auto* an = app.add_subcommand("annotate", "Label images with a detector adapter");
  an->add_option("-m,--manifest", ann.manifest)->required();
  an->add_option("-o,--output", ann.output)->required();
  an->add_option("--adapter", ann.adapter, "Annotator adapter spec (default: stub)");
  an->add_option("--threshold", ann.threshold)->capture_default_str();
  an->add_option("--class-count", ann.class_count)->capture_default_str();

  EvalDetArgs ed;
  auto* e = app.add_subcommand("eval-det", "mAP50 / mAP50-95 of a detection file");
  e->add_option("-m,--manifest", ed.manifest, "Ground-truth manifest")->required();
  e->add_option("-d,--detections", ed.detections)->required();
  e->add_option("-o,--output", ed.output);
  e->add_option("--class-count", ed.class_count)->capture_default_str();
  e->add_option("--nms", ed.nms_iou, "Apply per-class NMS at this IoU first");

  EvalIqaArgs ei;
  auto* q = app.add_subcommand("eval-iqa", "BRISQUE / NIQE scores and external score ingestion");
  q->add_option("-m,--manifest", ei.manifest)->required();
  q->add_option("--brisque-model", ei.brisque_model);
  q->add_option("--niqe-model", ei.niqe_model);
  q->add_option("--external", ei.external, "CSV image_id,metric,property,value");
  q->add_option("-o,--output", ei.output);
  q->add_option("--workers", ei.workers)->capture_default_str();

  StatsArgs st;
  auto* s = app.add_subcommand("stats", "Significance pipeline over dataset combinations");
  s->add_option("-i,--input", st.input, "Long-format metrics CSV")->required();
  s->add_option("--metric", st.metric)->capture_default_str();
  s->add_option("--model", st.model, "Restrict to one model");
  s->add_option("--alpha", st.alpha)->capture_default_str();
  s->add_option("-o,--output", st.output);

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Render a mean ± SD table with letter groups");
  r->add_option("-i,--input", rep.input, "Long-format metrics CSV")->required();
  r->add_option("--metric", rep.metric)->capture_default_str();
  r->add_option("--format", rep.format, "markdown, csv or latex")->capture_default_str();
  r->add_option("--alpha", rep.alpha)->capture_default_str();
  r->add_option("--boxplot", rep.boxplot, "Also write boxplot CSV here");
  r->add_option("-o,--output", rep.output);

  RunArgs run;
  auto* rn = app.add_subcommand("run", "Run a full experiment from a config file");
  rn->add_option("-c,--config", run.config)->required();
  rn->add_option("-o,--output", run.output)->required();
  rn->add_flag("--resume", run.resume, "Continue an interrupted run");
  rn->add_option("--workers", run.workers, "Override the configured worker count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }
  set_quiet(quiet);

  try {
    if (*c) return cmd_convert(conv);
    if (*mk) return cmd_mask(mask);
    if (*sp) return cmd_split(split);
    if (*mx) return cmd_mix(mix);
    if (*g) return cmd_generate(gen);
    if (*an) return cmd_annotate(ann);
    if (*e) return cmd_eval_det(ed);
    if (*q) return cmd_eval_iqa(ei);
    if (*s) return cmd_stats(st);
    if (*r) return cmd_report(rep);
    if (*rn) return cmd_run(run);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_status(err.code());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 4;
  }
  return 0;
}
