#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "adakd/trainer.hpp"

namespace adakd::report {

/// TrainConfig <-> JSON. Parsing is strict: unknown keys are rejected
/// so config typos fail loudly instead of silently using defaults.
nlohmann::json config_to_json(const trainer::TrainConfig& cfg);
trainer::TrainConfig config_from_json(const nlohmann::json& j);

nlohmann::json adaptive_params_to_json(const adaptive::AdaptiveParams& p);
adaptive::AdaptiveParams adaptive_params_from_json(const nlohmann::json& j);

/// RunReport <-> JSON. Alpha statistics and k appear in epoch entries
/// only for adaptive runs. Serialized keys are sorted, and doubles
/// round-trip, so identical runs produce identical bytes except for
/// wall_ms.
nlohmann::json report_to_json(const trainer::RunReport& rep);
trainer::RunReport report_from_json(const nlohmann::json& j);

void write_report_json(const trainer::RunReport& rep,
                       const std::filesystem::path& path);
trainer::RunReport load_report_json(const std::filesystem::path& path);

/// Flat per-epoch log with the fixed header
///   epoch,train_loss,test_error,k,alpha_mean,alpha_min,alpha_max
/// Inapplicable fields stay empty.
void write_epoch_csv(const trainer::RunReport& rep,
                     const std::filesystem::path& path);

/// Median with the usual even-count convention (mean of the middle two).
/// Empty input gives NaN, the table renderer's "missing" marker.
double median(std::vector<double> values);

/// One variant's final test errors across a shared seed set.
struct VariantSummary {
  trainer::Variant variant = trainer::Variant::finetune;
  std::vector<double> errors;  ///< aligned with the seed list
  double median_error = 0.0;
};

/// Per-seed errors plus a median row, one column per variant in the
/// fixed order finetune, normal, super, focal, annealing, adaptive.
/// Errors render as percentages.
std::string comparison_table_text(const std::vector<VariantSummary>& variants,
                                  const std::vector<std::uint64_t>& seeds);

/// One sweep run: a threshold mode evaluated under one seed.
struct SweepCell {
  std::string mode;
  double t_value = 0.0;
  std::uint64_t seed = 0;
  double final_error = 0.0;
};

struct SweepMedian {
  std::string mode;
  double t_value = 0.0;
  double median_error = 0.0;
};

/// Long-format CSV, one row per (mode, seed): mode,t,seed,final_test_error.
std::string sweep_csv(const std::vector<SweepCell>& cells);

/// Per-mode medians CSV: mode,t,median_test_error.
std::string sweep_medians_csv(const std::vector<SweepMedian>& medians);

std::string sweep_table_text(const std::vector<SweepCell>& cells,
                             const std::vector<SweepMedian>& medians);

}  // namespace adakd::report
