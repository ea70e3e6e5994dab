#include "synmix/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "synmix/random.hpp"

namespace synmix {

void SplitSpec::validate() const {
  if (!(train_frac > 0.0 && val_frac > 0.0 && test_frac > 0.0)) {
    throw Error(Errc::InvalidSpec, "split fractions must all be positive");
  }
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-12) {
    throw Error(Errc::InvalidSpec, "split fractions must sum to 1");
  }
}

Split split_ids(std::span<const std::string> ids, const SplitSpec& spec) {
  spec.validate();
  if (ids.empty()) throw Error(Errc::EmptyManifest, "nothing to split");

  std::unordered_map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!order.emplace(ids[i], i).second) throw Error(Errc::DuplicateId, ids[i]);
  }

  const auto n = static_cast<long long>(ids.size());
  const long long n_val = std::llround(spec.val_frac * static_cast<double>(n));
  const long long n_test = std::llround(spec.test_frac * static_cast<double>(n));
  if (n_val + n_test >= n) {
    throw Error(Errc::InvalidSpec, fmt::format("{} images too few for the split", n));
  }

  std::vector<std::string> shuffled(ids.begin(), ids.end());
  Rng rng(derive_seed(spec.seed, {0x5b11u}));
  rng.shuffle(std::span<std::string>(shuffled));

  auto by_manifest_order = [&](std::vector<std::string> part) {
    std::sort(part.begin(), part.end(),
              [&](const auto& a, const auto& b) { return order.at(a) < order.at(b); });
    return part;
  };
  Split out;
  out.val = by_manifest_order({shuffled.begin(), shuffled.begin() + n_val});
  out.test = by_manifest_order({shuffled.begin() + n_val, shuffled.begin() + n_val + n_test});
  out.train = by_manifest_order({shuffled.begin() + n_val + n_test, shuffled.end()});
  return out;
}

Split split_dataset(std::span<const LabeledImage> manifest, const SplitSpec& spec) {
  std::vector<std::string> ids;
  ids.reserve(manifest.size());
  for (const auto& li : manifest) ids.push_back(li.image.id);
  return split_ids(ids, spec);
}

long long synthetic_count(double p, long long n_training) {
  return std::llround(p * static_cast<double>(n_training));
}

std::string MixturePlan::combination_label() const {
  const long long pct = std::llround(p * 100.0);
  if (pct == 0) return "Real data only";
  return fmt::format("Syn{} Real{}", pct, 100 - pct);
}

std::string MixturePlan::key() const { return fmt::format("p{:.2f}_r{:02d}", p, replicate_id); }

std::uint64_t plan_seed(std::uint64_t base_seed, double p, int replicate_id) {
  const auto p_code = static_cast<std::uint64_t>(std::llround(p * 1e6));
  return derive_seed(base_seed, {p_code, static_cast<std::uint64_t>(replicate_id)});
}

namespace {

/// Draws k items without replacement, returned in pool order.
std::vector<std::string> sample_without_replacement(const std::vector<std::string>& pool,
                                                    std::size_t k, Rng& rng) {
  std::vector<std::size_t> index(pool.size());
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(index.size() - i));
    std::swap(index[i], index[j]);
  }
  index.resize(k);
  std::sort(index.begin(), index.end());
  std::vector<std::string> out;
  out.reserve(k);
  for (auto i : index) out.push_back(pool[i]);
  return out;
}

}  // namespace

std::vector<MixturePlan> build_mixture_plans(const MixtureRequest& request) {
  if (request.replicates < 1) throw Error(Errc::InvalidSpec, "replicates must be >= 1");
  const int n_training =
      request.n_training > 0 ? request.n_training : static_cast<int>(request.real_train_ids.size());
  if (n_training <= 0) throw Error(Errc::InsufficientRealPool, "empty real training set");

  std::unordered_set<std::string> real_set(request.real_train_ids.begin(),
                                           request.real_train_ids.end());
  for (const auto& id : request.synthetic_pool_ids) {
    if (real_set.count(id)) throw Error(Errc::DuplicateId, "id in both pools: " + id);
  }

  std::vector<MixturePlan> plans;
  for (double p : request.p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::InvalidSpec, fmt::format("p = {}", p));
    const auto n_syn = static_cast<int>(synthetic_count(p, n_training));
    const int n_real = n_training - n_syn;
    if (static_cast<std::size_t>(n_syn) > request.synthetic_pool_ids.size()) {
      throw Error(Errc::InsufficientSyntheticPool,
                  fmt::format("p = {} needs {} synthetic images, pool has {}", p, n_syn,
                              request.synthetic_pool_ids.size()));
    }
    if (static_cast<std::size_t>(n_real) > request.real_train_ids.size()) {
      throw Error(Errc::InsufficientRealPool,
                  fmt::format("p = {} needs {} real images, pool has {}", p, n_real,
                              request.real_train_ids.size()));
    }
    for (int r = 0; r < request.replicates; ++r) {
      MixturePlan plan;
      plan.p = p;
      plan.n_training = n_training;
      plan.n_synthetic = n_syn;
      plan.replicate_id = r;
      plan.seed = plan_seed(request.base_seed, p, r);
      Rng rng(plan.seed);
      plan.synthetic_ids =
          sample_without_replacement(request.synthetic_pool_ids, static_cast<std::size_t>(n_syn), rng);
      plan.real_ids =
          sample_without_replacement(request.real_train_ids, static_cast<std::size_t>(n_real), rng);
      plans.push_back(std::move(plan));
    }
  }
  return plans;
}

Manifest mixture_manifest(const MixturePlan& plan, const Manifest& sources,
                          const std::filesystem::path& output_dir) {
  Manifest out;
  auto relative = [&](const std::filesystem::path& p) {
    if (p.empty()) return p;
    return std::filesystem::path(std::filesystem::absolute(p).lexically_normal())
        .lexically_relative(std::filesystem::absolute(output_dir).lexically_normal());
  };
  auto add = [&](const std::string& id) {
    const ManifestEntry* src = sources.find(id);
    if (!src) throw Error(Errc::SchemaViolation, "plan id missing from sources: " + id);
    ManifestEntry e = *src;
    e.image.path = relative(e.image.path);
    e.labels_path = relative(e.labels_path);
    out.images.push_back(std::move(e));
  };
  for (const auto& id : plan.real_ids) add(id);
  for (const auto& id : plan.synthetic_ids) add(id);

  out.meta = {{"plan",
               {{"p", plan.p},
                {"n_training", plan.n_training},
                {"n_synthetic", plan.n_synthetic},
                {"replicate_id", plan.replicate_id},
                {"seed", plan.seed},
                {"combination", plan.combination_label()},
                {"real_ids", plan.real_ids},
                {"synthetic_ids", plan.synthetic_ids}}}};
  return out;
}

void emit_mixture_manifest(const MixturePlan& plan, const Manifest& sources,
                           const std::filesystem::path& output_path) {
  mixture_manifest(plan, sources, output_path.parent_path()).save(output_path);
}

MixturePlan plan_from_manifest(const Manifest& manifest) {
  try {
    const auto& j = manifest.meta.at("plan");
    MixturePlan plan;
    plan.p = j.at("p").get<double>();
    plan.n_training = j.at("n_training").get<int>();
    plan.n_synthetic = j.at("n_synthetic").get<int>();
    plan.replicate_id = j.at("replicate_id").get<int>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.real_ids = j.at("real_ids").get<std::vector<std::string>>();
    plan.synthetic_ids = j.at("synthetic_ids").get<std::vector<std::string>>();
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::SchemaViolation, std::string("mixture manifest: ") + e.what());
  }
}

}  // namespace synmix
