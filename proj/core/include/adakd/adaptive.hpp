#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace adakd::adaptive {

/// One frozen teacher evaluation: the task loss the teacher incurs on a
/// training instance plus the logits it produced. Losses are in nats.
struct CacheRecord {
  std::int64_t id = 0;
  double loss = 0.0;
  std::vector<double> logits;
};

/// Immutable store of per-instance teacher losses and logits, computed
/// once before distillation. Summary statistics are derived from the
/// records at construction and never serialized.
class TeacherCache {
 public:
  TeacherCache() = default;
  explicit TeacherCache(std::vector<CacheRecord> records);

  const std::vector<CacheRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  bool contains(std::int64_t id) const { return index_.count(id) != 0; }
  const CacheRecord& by_id(std::int64_t id) const;

  /// Arithmetic mean of the stored losses. Throws on an empty cache.
  double mean_loss() const;
  double min_loss() const;
  double max_loss() const;

  /// Percentile of the stored losses with linear interpolation between
  /// closest ranks: rank = p/100 * (n-1). p in [0, 100].
  double percentile_loss(double p) const;

  /// Line-delimited JSON, one record per line:
  ///   {"id":0,"logits":[...],"loss":...}
  /// Doubles round-trip bit-exactly.
  void save_jsonl(const std::filesystem::path& path) const;
  static TeacherCache load_jsonl(const std::filesystem::path& path);

 private:
  void require_nonempty(const char* who) const;

  std::vector<CacheRecord> records_;
  std::unordered_map<std::int64_t, std::size_t> index_;
  std::vector<double> sorted_losses_;
  double mean_ = 0.0;
};

/// How the threshold that splits easy from hard instances is chosen.
struct ThresholdMode {
  bool use_mean = true;
  double percentile = 50.0;  ///< only meaningful when use_mean is false

  static ThresholdMode mean() { return {true, 0.0}; }
  static ThresholdMode at_percentile(double p) { return {false, p}; }

  /// Parses "mean" or "p<number>" (e.g. "p25"). Throws on anything else.
  static ThresholdMode parse(const std::string& text);
  std::string str() const;
};

/// Threshold over the cached teacher losses per the chosen mode.
double threshold_t(const TeacherCache& cache, const ThresholdMode& mode);

/// exp(-k * (x - t)), clamped to [1e-30, 1e30] so later square roots and
/// reciprocals cannot overflow. Exactly 1 when k = 0 or x = t.
double difficulty_factor(double x, double k, double t);

/// exp(-1 / sqrt(d_f)). Strictly increasing in d_f, range (0, 1),
/// and exactly exp(-1) at d_f = 1.
double alpha_weight(double d_f);

/// Initial schedule slope such that the instance with the highest teacher
/// loss starts at distillation weight alpha_min:
///   k_plus = 2 * ln(ln(1/alpha_min)) / (x_max - t).
/// Requires x_max > t (degenerate_distribution_error otherwise) and
/// alpha_min in (0, 1/e), the range where the closed form is positive.
double solve_k_plus(double x_max, double t, double alpha_min);

/// Linear interpolation from k_plus at step 0 to k_minus at step = total,
/// exact at both endpoints. Requires total > 0 and step <= total.
double k_schedule(std::size_t step, std::size_t total, double k_plus, double k_minus);

/// Elementwise alpha_weight(difficulty_factor(x, k, t)); order preserving.
/// Requires a non-empty input.
std::vector<double> batch_alphas(std::span<const double> teacher_losses, double k,
                                 double t);

/// User-facing knobs of the adaptive schedule. k_plus may be left unset,
/// in which case it is solved from the cache via solve_k_plus.
struct AdaptiveParams {
  ThresholdMode t_mode = ThresholdMode::mean();
  std::optional<double> k_plus;  ///< explicit start slope; solved when unset
  double k_minus = 0.0;
  double alpha_min = 0.1;
  bool winsorize = false;  ///< cap x_max at the 99.9th percentile when solving
};

/// AdaptiveParams with everything resolved against a concrete cache.
struct ResolvedAdaptive {
  double t = 0.0;
  double k_plus = 0.0;
  double k_minus = 0.0;
  double alpha_min = 0.1;
  double x_max = 0.0;  ///< the loss used when k_plus was solved
};

ResolvedAdaptive resolve(const TeacherCache& cache, const AdaptiveParams& params);

/// Per-step schedule position owned by the training loop. Seeking past
/// total_steps clamps there (training may keep stepping after the decay
/// has finished); a zero-length schedule pins k at k_plus.
class ScheduleState {
 public:
  ScheduleState(std::size_t total_steps, double k_plus, double k_minus);

  /// k at an arbitrary step, without moving the state.
  double at(std::size_t step) const;

  void seek(std::size_t step);
  void advance() { seek(step_ + 1); }
  double current_k() const { return current_k_; }
  std::size_t step() const { return step_; }
  std::size_t total_steps() const { return total_; }

 private:
  std::size_t total_;
  double k_plus_;
  double k_minus_;
  std::size_t step_ = 0;
  double current_k_;
};

}  // namespace adakd::adaptive
