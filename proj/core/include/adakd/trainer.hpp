#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adakd/adaptive.hpp"
#include "adakd/data.hpp"
#include "adakd/model.hpp"

namespace adakd::trainer {

enum class Optimizer { adam, sgd };
enum class Variant { finetune, normal_kd, adaptive_kd, focal, super, annealing };

Optimizer parse_optimizer(const std::string& text);
std::string optimizer_str(Optimizer o);
Variant parse_variant(const std::string& text);
std::string variant_str(Variant v);

/// Everything a run needs besides the data. Unused per-variant fields
/// are ignored (e.g. focal_gamma outside focal runs).
struct TrainConfig {
  std::vector<std::size_t> layers;  ///< full architecture, input to output
  model::Activation activation = model::Activation::relu;
  std::size_t batch_size = 16;
  double learning_rate = 1e-4;
  Optimizer optimizer = Optimizer::adam;
  std::size_t epochs = 200;
  double tau = 2.0;  ///< distillation temperature of the KL term
  Variant variant = Variant::finetune;
  double alpha_fixed = 0.5;              ///< normal_kd blend weight
  adaptive::AdaptiveParams adaptive;     ///< adaptive_kd schedule knobs
  double focal_gamma = 2.0;              ///< focal modulation exponent
  std::optional<double> super_tau;       ///< fixed tau_sl; running mean when unset
  double super_lambda = 1.0;             ///< super-loss regularizer
  double annealing_tau_max = 7.0;        ///< max annealing temperature
  double annealing_phase1_frac = 0.5;    ///< share of epochs spent regressing
  std::uint64_t seed = 1;
};

/// One row of the per-epoch log. Alpha statistics and k are meaningful
/// only when has_alpha is set (adaptive runs); the hard/easy means
/// split the epoch's instances at the resolved threshold t.
struct EpochStats {
  std::size_t epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  double test_error = 0.0;
  double k = 0.0;
  double alpha_mean = 0.0;
  double alpha_min = 0.0;
  double alpha_max = 0.0;
  double alpha_mean_hard = 0.0;
  double alpha_mean_easy = 0.0;
  bool has_alpha = false;
};

struct RunReport {
  TrainConfig config;  ///< fully resolved, as run
  std::vector<EpochStats> epochs;
  double final_train_loss = 0.0;
  double final_test_error = 0.0;
  double wall_ms = 0.0;
  std::optional<adaptive::ResolvedAdaptive> resolved;  ///< adaptive runs only
};

struct TrainResult {
  model::DenseNet net;
  RunReport report;
};

/// Snapshot of one optimizer step, offered to an observer for logging
/// and replay-style verification. alphas aligns with batch_ids and is
/// empty outside adaptive runs.
struct StepInfo {
  std::size_t step = 0;   ///< global, 0-based
  std::size_t epoch = 0;  ///< 0-based
  double k = 0.0;
  double batch_loss = 0.0;
  std::vector<std::int64_t> batch_ids;
  std::vector<double> alphas;
};
using StepObserver = std::function<void(const StepInfo&)>;

/// ceil(n / batch_size): the last batch of an epoch keeps the remainder.
std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size);

/// Instance ids of the given optimizer step. Epoch-wise shuffle without
/// replacement: each epoch draws a fresh permutation from a substream of
/// seed keyed by the epoch index, so the batch is a pure function of
/// (seed, step) for a fixed dataset size.
std::vector<std::int64_t> minibatch_sampler(const data::Dataset& ds,
                                            std::size_t batch_size,
                                            std::uint64_t seed, std::size_t step);

/// Cross-entropy-only training of the configured architecture. The
/// variant field is ignored. epochs = 0 returns the initialized net.
TrainResult train_teacher(const TrainConfig& config, const data::Dataset& train,
                          const data::Dataset& test);

/// Frozen per-instance teacher losses and logits over a dataset.
adaptive::TeacherCache build_teacher_cache(const model::DenseNet& teacher,
                                           const data::Dataset& ds);

/// Student training under config.variant. adaptive_kd, normal_kd and
/// annealing require a cache; annealing additionally needs the live
/// teacher for its regression targets. Throws numeric_error with the
/// step index if a loss goes non-finite.
TrainResult distill(const TrainConfig& config, const data::Dataset& train,
                    const data::Dataset& test,
                    const adaptive::TeacherCache* cache,
                    const model::DenseNet* teacher,
                    const StepObserver& observer = nullptr);

/// Fraction of argmax misclassifications; ties pick the lowest class.
double evaluate(const model::DenseNet& net, const data::Dataset& ds);

/// Canonical Adam with bias correction; state is lazily shaped to the
/// first gradient it sees.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(model::DenseNet& net, const model::GradientSet& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  model::GradientSet m_, v_;
  bool shaped_ = false;
};

class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(model::DenseNet& net, const model::GradientSet& grads);

 private:
  double lr_;
};

}  // namespace adakd::trainer
