#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "adakd/adaptive.hpp"
#include "adakd/data.hpp"
#include "adakd/report.hpp"
#include "adakd/trainer.hpp"

namespace adakd::experiments {

/// alpha(x) sampled at the schedule's three reference slopes, over a
/// dense grid spanning the cache's loss range. The grid is 201 evenly
/// spaced points plus every distinct cached loss plus the threshold t
/// itself, so the pivot and the extremes are sampled exactly.
struct AlphaCurves {
  adaptive::ResolvedAdaptive resolved;
  std::vector<double> xs;
  std::vector<double> at_k_plus;
  std::vector<double> at_k_zero;
  std::vector<double> at_k_minus;
};

AlphaCurves alpha_curves(const adaptive::TeacherCache& cache,
                         const adaptive::AdaptiveParams& params);

/// CSV with header x,alpha_k_plus,alpha_k0,alpha_k_minus.
void write_curves_csv(const AlphaCurves& curves,
                      const std::filesystem::path& path);

struct SweepOutcome {
  std::vector<report::SweepCell> cells;      ///< mode-major, seeds inner
  std::vector<report::SweepMedian> medians;  ///< one per mode
};

/// One adaptive distillation per (threshold mode, seed), sharing the
/// cache and datasets. base supplies every other hyperparameter; its
/// variant and t_mode are overridden. Runs execute in parallel up to
/// the jobs bound; results land in deterministic slots, so the output
/// is independent of scheduling.
SweepOutcome sweep_t(const trainer::TrainConfig& base,
                     const data::Dataset& train, const data::Dataset& test,
                     const adaptive::TeacherCache& cache,
                     const std::vector<adaptive::ThresholdMode>& modes,
                     const std::vector<std::uint64_t>& seeds, std::size_t jobs);

/// The desk-scale benchmark: per seed, generate the blob problem, train
/// a teacher, cache it, then distill a student under all six variants.
struct ComparisonConfig {
  data::BlobSpec spec = data::default_benchmark_spec();
  std::vector<std::size_t> teacher_layers = {2, 64, 64, 3};
  std::vector<std::size_t> student_layers = {2, 3};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  /// Shared hyperparameters (batch, lr, epochs, tau, baseline knobs).
  /// layers, seed and variant are overridden per run. The adaptive runs
  /// solve k_plus from each seed's cache and mirror it for k_minus.
  trainer::TrainConfig base;
  std::size_t jobs = 1;
};

struct ComparisonOutcome {
  std::vector<std::uint64_t> seeds;
  std::vector<report::VariantSummary> variants;  ///< six, fixed order
};

ComparisonOutcome run_comparison(const ComparisonConfig& cfg);

}  // namespace adakd::experiments
