#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "synmix/manifest.hpp"

namespace synmix {

struct SplitSpec {
  double train_frac = 0.70;
  double val_frac = 0.15;
  double test_frac = 0.15;
  std::uint64_t seed = 0;

  /// Throws InvalidSpec unless all fractions are positive and sum to 1.
  void validate() const;
};

struct Split {
  std::vector<std::string> train, val, test;
};

/// Seeded shuffle, then val and test take round(frac * n) each and train
/// keeps the remainder. Ids keep manifest order inside each part.
Split split_dataset(std::span<const LabeledImage> manifest, const SplitSpec& spec);
Split split_ids(std::span<const std::string> ids, const SplitSpec& spec);

/// round(p * n) with halves away from zero.
long long synthetic_count(double p, long long n_training);

struct MixturePlan {
  double p = 0.0;
  int n_training = 0;
  int n_synthetic = 0;
  int replicate_id = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> real_ids;
  std::vector<std::string> synthetic_ids;

  /// "Real data only" for p == 0, otherwise e.g. "Syn10 Real90".
  std::string combination_label() const;
  /// File-system friendly key, e.g. "p0.10_r03".
  std::string key() const;
};

/// Replicate seed for one (p, replicate) unit.
std::uint64_t plan_seed(std::uint64_t base_seed, double p, int replicate_id);

struct MixtureRequest {
  std::vector<std::string> real_train_ids;
  std::vector<std::string> synthetic_pool_ids;
  std::vector<double> p_values;
  int replicates = 10;
  std::uint64_t base_seed = 0;
  /// Defaults to the real training-set size when zero.
  int n_training = 0;
};

std::vector<MixturePlan> build_mixture_plans(const MixtureRequest& request);

/// Manifest of the plan's images (paths made relative to the output file)
/// with plan metadata under "meta". `sources` must contain every plan id.
Manifest mixture_manifest(const MixturePlan& plan, const Manifest& sources,
                          const std::filesystem::path& output_dir);
void emit_mixture_manifest(const MixturePlan& plan, const Manifest& sources,
                           const std::filesystem::path& output_path);

/// Recovers the plan recorded in a mixture manifest.
MixturePlan plan_from_manifest(const Manifest& manifest);

}  // namespace synmix
