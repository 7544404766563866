#include "adakd/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "adakd/errors.hpp"
#include "adakd/losses.hpp"
#include "adakd/rng.hpp"

namespace adakd::trainer {

namespace {

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                           std::size_t epoch) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng::Engine eng(rng::mix(rng::mix(seed, rng::kStreamSampler), epoch));
  rng::shuffle(perm, eng);
  return perm;
}

void validate_config(const TrainConfig& cfg, const data::Dataset& train,
                     const data::Dataset& test, const char* who) {
  auto bad = [&](const std::string& why) -> std::invalid_argument {
    return std::invalid_argument(std::string(who) + ": " + why);
  };
  if (train.instances.empty()) throw bad("empty training set");
  if (test.instances.empty()) throw bad("empty test set");
  if (cfg.layers.size() < 2) throw bad("architecture needs at least two layers");
  if (cfg.layers.front() != train.dim) {
    throw bad("input layer width " + std::to_string(cfg.layers.front()) +
              " does not match feature dim " + std::to_string(train.dim));
  }
  if (cfg.layers.back() != train.num_classes) {
    throw bad("output layer width " + std::to_string(cfg.layers.back()) +
              " does not match class count " + std::to_string(train.num_classes));
  }
  if (cfg.batch_size == 0) throw bad("batch_size must be positive");
  if (cfg.batch_size > train.size()) {
    throw bad("batch_size exceeds training set size");
  }
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw bad("learning_rate must be positive and finite");
  }
  switch (cfg.variant) {
    case Variant::normal_kd:
      if (!(cfg.alpha_fixed >= 0.0 && cfg.alpha_fixed <= 1.0)) {
        throw bad("alpha_fixed must lie in [0, 1]");
      }
      [[fallthrough]];
    case Variant::adaptive_kd:
      if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) {
        throw bad("tau must be positive and finite");
      }
      break;
    case Variant::focal:
      if (!(cfg.focal_gamma >= 0.0) || !std::isfinite(cfg.focal_gamma)) {
        throw bad("focal_gamma must be >= 0");
      }
      break;
    case Variant::super:
      if (!(cfg.super_lambda > 0.0) || !std::isfinite(cfg.super_lambda)) {
        throw bad("super_lambda must be positive");
      }
      if (cfg.super_tau && !std::isfinite(*cfg.super_tau)) {
        throw bad("super_tau must be finite");
      }
      break;
    case Variant::annealing:
      if (!(cfg.annealing_tau_max >= 1.0) || !std::isfinite(cfg.annealing_tau_max)) {
        throw bad("annealing_tau_max must be >= 1");
      }
      if (!(cfg.annealing_phase1_frac > 0.0 && cfg.annealing_phase1_frac <= 1.0)) {
        throw bad("annealing_phase1_frac must lie in (0, 1]");
      }
      break;
    case Variant::finetune:
      break;
  }
}

/// Teacher data re-keyed by training-set position for O(1) batch access.
struct TeacherView {
  std::vector<double> losses;
  std::vector<const std::vector<double>*> logits;
};

TeacherView index_cache(const adaptive::TeacherCache& cache,
                        const data::Dataset& train, const char* who) {
  TeacherView view;
  view.losses.reserve(train.size());
  view.logits.reserve(train.size());
  for (const data::Instance& inst : train.instances) {
    if (!cache.contains(inst.id)) {
      throw std::invalid_argument(std::string(who) + ": instance " +
                                  std::to_string(inst.id) +
                                  " missing from teacher cache");
    }
    const adaptive::CacheRecord& rec = cache.by_id(inst.id);
    if (rec.logits.size() != train.num_classes) {
      throw std::invalid_argument(std::string(who) + ": cached logits for " +
                                  std::to_string(inst.id) +
                                  " have wrong dimension");
    }
    view.losses.push_back(rec.loss);
    view.logits.push_back(&rec.logits);
  }
  return view;
}

/// Divergence surfaces here first: once a forward pass overflows, the
/// loss ops would reject the logits as a precondition violation, which
/// maps to the wrong failure class. Catch it as the numeric abort the
/// training contract promises, step index included.
void check_logits_finite(const std::vector<double>& logits, const char* who,
                         std::size_t step) {
  for (const double v : logits) {
    if (!std::isfinite(v)) {
      throw numeric_error(std::string(who) + ": non-finite loss at step " +
                          std::to_string(step));
    }
  }
}

void assert_blend(const std::vector<double>& blended,
                  const losses::LossGrad& task, const losses::LossGrad& distill,
                  double alpha, std::size_t step) {
  for (std::size_t j = 0; j < blended.size(); ++j) {
    const double expect = (1.0 - alpha) * task.grad[j] + alpha * distill.grad[j];
    if (blended[j] != expect) {
      throw std::logic_error("blend gradient assertion failed at step " +
                             std::to_string(step));
    }
  }
}

TrainResult run_training(const TrainConfig& cfg, const data::Dataset& train,
                         const data::Dataset& test,
                         const adaptive::TeacherCache* cache,
                         const model::DenseNet* teacher,
                         const StepObserver& observer, const char* who) {
  validate_config(cfg, train, test, who);
  const auto t0 = std::chrono::steady_clock::now();

  const std::size_t n = train.size();
  const std::size_t spe = steps_per_epoch(n, cfg.batch_size);
  const std::size_t n_epochs = cfg.epochs;

  TrainResult result;
  result.net = model::DenseNet::make(cfg.layers, cfg.activation, cfg.seed);
  result.report.config = cfg;

  const bool is_adaptive = cfg.variant == Variant::adaptive_kd;
  const bool uses_cache =
      is_adaptive || cfg.variant == Variant::normal_kd;

  TeacherView view;
  if (uses_cache) view = index_cache(*cache, train, who);

  adaptive::ResolvedAdaptive resolved;
  std::size_t schedule_steps = 0;
  if (is_adaptive) {
    resolved = adaptive::resolve(*cache, cfg.adaptive);
    result.report.resolved = resolved;
    // The schedule spans all but the final epoch, so the per-epoch log
    // opens at k_plus and the last epoch runs entirely at k_minus.
    schedule_steps = n_epochs >= 1 ? (n_epochs - 1) * spe : 0;
  }
  const adaptive::ScheduleState sched(schedule_steps, resolved.k_plus,
                                      resolved.k_minus);

  std::size_t phase1_epochs = 1;
  if (cfg.variant == Variant::annealing && n_epochs > 0) {
    phase1_epochs = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(
               cfg.annealing_phase1_frac * static_cast<double>(n_epochs))));
  }

  Adam adam(cfg.learning_rate);
  Sgd sgd(cfg.learning_rate);
  model::GradientSet grads = result.net.zero_gradients();
  model::Trace trace;

  // Super-loss running threshold: cumulative mean of every per-instance
  // task loss seen so far, current batch included.
  double super_sum = 0.0;
  double super_count = 0.0;

  std::vector<losses::LossGrad> batch_task;  // super: deferred scaling
  std::vector<model::Trace> batch_traces;
  std::vector<double> batch_losses_x;  // adaptive: teacher losses of the batch
  std::vector<double> scaled_grad;

  for (std::size_t epoch = 0; epoch < n_epochs; ++epoch) {
    const std::vector<std::size_t> perm = epoch_permutation(n, cfg.seed, epoch);
    double epoch_loss_sum = 0.0;
    double a_sum = 0.0, a_min = 0.0, a_max = 0.0;
    double a_sum_hard = 0.0, a_sum_easy = 0.0;
    std::size_t n_hard = 0, n_easy = 0, n_alpha = 0;
    const double epoch_k = sched.at(epoch * spe);

    for (std::size_t pos = 0; pos < spe; ++pos) {
      const std::size_t step = epoch * spe + pos;
      const std::size_t begin = pos * cfg.batch_size;
      const std::size_t end = std::min(begin + cfg.batch_size, n);
      const std::size_t bsz = end - begin;

      const double k = is_adaptive ? sched.at(step) : 0.0;
      std::vector<double> alphas;
      if (is_adaptive) {
        batch_losses_x.clear();
        for (std::size_t b = begin; b < end; ++b) {
          batch_losses_x.push_back(view.losses[perm[b]]);
        }
        alphas = adaptive::batch_alphas(batch_losses_x, k, resolved.t);
      }

      grads.zero();
      double loss_sum = 0.0;

      if (cfg.variant == Variant::super) {
        batch_task.clear();
        if (batch_traces.size() < bsz) batch_traces.resize(bsz);
        for (std::size_t b = begin; b < end; ++b) {
          const data::Instance& inst = train.instances[perm[b]];
          result.net.forward(inst.features, batch_traces[b - begin]);
          check_logits_finite(batch_traces[b - begin].pre.back(), who, step);
          batch_task.push_back(losses::cross_entropy_grad(
              batch_traces[b - begin].pre.back(),
              static_cast<std::size_t>(inst.label)));
        }
        double tau_sl;
        if (cfg.super_tau) {
          tau_sl = *cfg.super_tau;
        } else {
          for (const losses::LossGrad& tg : batch_task) {
            super_sum += tg.value;
            super_count += 1.0;
          }
          tau_sl = super_sum / super_count;
        }
        for (std::size_t b = 0; b < bsz; ++b) {
          const losses::SuperLossResult sl =
              losses::super_loss(batch_task[b].value, tau_sl, cfg.super_lambda);
          loss_sum += sl.value;
          scaled_grad.assign(batch_task[b].grad.begin(), batch_task[b].grad.end());
          for (double& g : scaled_grad) g *= sl.sigma;
          result.net.backward_into(batch_traces[b], scaled_grad, grads);
        }
      } else {
        for (std::size_t b = begin; b < end; ++b) {
          const std::size_t p = perm[b];
          const data::Instance& inst = train.instances[p];
          const std::vector<double> logits =
              result.net.forward(inst.features, trace);
          check_logits_finite(logits, who, step);
          const std::size_t label = static_cast<std::size_t>(inst.label);

          double value = 0.0;
          std::vector<double> dlogits;
          switch (cfg.variant) {
            case Variant::finetune: {
              losses::LossGrad tg = losses::cross_entropy_grad(logits, label);
              value = tg.value;
              dlogits = std::move(tg.grad);
              break;
            }
            case Variant::focal: {
              losses::LossGrad fg =
                  losses::focal_loss_grad(logits, label, cfg.focal_gamma);
              value = fg.value;
              dlogits = std::move(fg.grad);
              break;
            }
            case Variant::normal_kd:
            case Variant::adaptive_kd: {
              const losses::LossGrad tg = losses::cross_entropy_grad(logits, label);
              const losses::LossGrad kg = losses::kl_distill_grad(
                  logits, *view.logits[p], cfg.tau);
              const double a =
                  is_adaptive ? alphas[b - begin] : cfg.alpha_fixed;
              value = losses::combined_loss(tg.value, kg.value, a);
              dlogits = losses::combined_grad(tg.grad, kg.grad, a);
              if (step % 256 == 0 && b == begin) {
                assert_blend(dlogits, tg, kg, a, step);
              }
              break;
            }
            case Variant::annealing: {
              if (epoch < phase1_epochs) {
                const std::vector<double> target = losses::annealing_target(
                    teacher->forward(inst.features), epoch, phase1_epochs,
                    cfg.annealing_tau_max);
                losses::LossGrad mg = losses::mse_loss_grad(logits, target);
                value = mg.value;
                dlogits = std::move(mg.grad);
              } else {
                losses::LossGrad tg = losses::cross_entropy_grad(logits, label);
                value = tg.value;
                dlogits = std::move(tg.grad);
              }
              break;
            }
            case Variant::super:
              break;  // handled above
          }
          loss_sum += value;
          result.net.backward_into(trace, dlogits, grads);
        }
      }

      const double batch_loss = loss_sum / static_cast<double>(bsz);
      if (!std::isfinite(batch_loss)) {
        throw numeric_error(std::string(who) + ": non-finite loss at step " +
                            std::to_string(step));
      }
      grads.scale(1.0 / static_cast<double>(bsz));
      if (cfg.optimizer == Optimizer::adam) {
        adam.step(result.net, grads);
      } else {
        sgd.step(result.net, grads);
      }

      epoch_loss_sum += batch_loss;
      if (is_adaptive) {
        for (std::size_t b = 0; b < bsz; ++b) {
          const double a = alphas[b];
          const double x = batch_losses_x[b];
          if (n_alpha == 0) {
            a_min = a_max = a;
          } else {
            a_min = std::min(a_min, a);
            a_max = std::max(a_max, a);
          }
          ++n_alpha;
          a_sum += a;
          if (x > resolved.t) {
            a_sum_hard += a;
            ++n_hard;
          } else if (x < resolved.t) {
            a_sum_easy += a;
            ++n_easy;
          }
        }
      }

      if (observer) {
        StepInfo info;
        info.step = step;
        info.epoch = epoch;
        info.k = k;
        info.batch_loss = batch_loss;
        for (std::size_t b = begin; b < end; ++b) {
          info.batch_ids.push_back(train.instances[perm[b]].id);
        }
        info.alphas = alphas;
        observer(info);
      }
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.train_loss = epoch_loss_sum / static_cast<double>(spe);
    stats.test_error = evaluate(result.net, test);
    if (is_adaptive) {
      stats.has_alpha = true;
      stats.k = epoch_k;
      // summation rounding can push the raw mean a ulp past the extremes;
      // the clamped value is never farther from the true mean
      stats.alpha_mean = std::clamp(a_sum / static_cast<double>(n_alpha), a_min, a_max);
      stats.alpha_min = a_min;
      stats.alpha_max = a_max;
      stats.alpha_mean_hard =
          n_hard > 0 ? a_sum_hard / static_cast<double>(n_hard) : 0.0;
      stats.alpha_mean_easy =
          n_easy > 0 ? a_sum_easy / static_cast<double>(n_easy) : 0.0;
    }
    result.report.epochs.push_back(stats);
  }

  if (!result.report.epochs.empty()) {
    result.report.final_train_loss = result.report.epochs.back().train_loss;
    result.report.final_test_error = result.report.epochs.back().test_error;
  } else {
    result.report.final_test_error = evaluate(result.net, test);
  }
  const auto t1 = std::chrono::steady_clock::now();
  result.report.wall_ms =
      std::chrono::duration<double, std::milli>(t1 - t0).count();
  return result;
}

}  // namespace

Optimizer parse_optimizer(const std::string& text) {
  if (text == "adam") return Optimizer::adam;
  if (text == "sgd") return Optimizer::sgd;
  throw std::invalid_argument("parse_optimizer: expected \"adam\" or \"sgd\", got \"" +
                              text + "\"");
}

std::string optimizer_str(Optimizer o) {
  return o == Optimizer::adam ? "adam" : "sgd";
}

Variant parse_variant(const std::string& text) {
  if (text == "finetune") return Variant::finetune;
  if (text == "normal_kd") return Variant::normal_kd;
  if (text == "adaptive_kd") return Variant::adaptive_kd;
  if (text == "focal") return Variant::focal;
  if (text == "super") return Variant::super;
  if (text == "annealing") return Variant::annealing;
  throw std::invalid_argument("parse_variant: unknown loss variant \"" + text +
                              "\"");
}

std::string variant_str(Variant v) {
  switch (v) {
    case Variant::finetune: return "finetune";
    case Variant::normal_kd: return "normal_kd";
    case Variant::adaptive_kd: return "adaptive_kd";
    case Variant::focal: return "focal";
    case Variant::super: return "super";
    case Variant::annealing: return "annealing";
  }
  return "finetune";
}

std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size) {
  if (n == 0) {
    throw std::invalid_argument("steps_per_epoch: need at least one instance");
  }
  if (batch_size == 0) {
    throw std::invalid_argument("steps_per_epoch: batch_size must be positive");
  }
  return (n + batch_size - 1) / batch_size;
}

std::vector<std::int64_t> minibatch_sampler(const data::Dataset& ds,
                                            std::size_t batch_size,
                                            std::uint64_t seed,
                                            std::size_t step) {
  const std::size_t n = ds.size();
  if (batch_size == 0 || batch_size > n) {
    throw std::invalid_argument(
        "minibatch_sampler: batch_size must lie in [1, dataset size]");
  }
  const std::size_t spe = steps_per_epoch(n, batch_size);
  const std::size_t epoch = step / spe;
  const std::size_t pos = step % spe;
  const std::vector<std::size_t> perm = epoch_permutation(n, seed, epoch);
  const std::size_t begin = pos * batch_size;
  const std::size_t end = std::min(begin + batch_size, n);
  std::vector<std::int64_t> ids;
  ids.reserve(end - begin);
  for (std::size_t b = begin; b < end; ++b) {
    ids.push_back(ds.instances[perm[b]].id);
  }
  return ids;
}

TrainResult train_teacher(const TrainConfig& config, const data::Dataset& train,
                          const data::Dataset& test) {
  TrainConfig cfg = config;
  cfg.variant = Variant::finetune;
  return run_training(cfg, train, test, nullptr, nullptr, nullptr,
                      "train_teacher");
}

adaptive::TeacherCache build_teacher_cache(const model::DenseNet& teacher,
                                           const data::Dataset& ds) {
  if (ds.instances.empty()) {
    throw std::invalid_argument("build_teacher_cache: empty dataset");
  }
  if (teacher.input_dim() != ds.dim || teacher.num_classes() != ds.num_classes) {
    throw std::invalid_argument(
        "build_teacher_cache: teacher shape does not match dataset");
  }
  std::vector<adaptive::CacheRecord> records;
  records.reserve(ds.size());
  for (const data::Instance& inst : ds.instances) {
    adaptive::CacheRecord rec;
    rec.id = inst.id;
    rec.logits = teacher.forward(inst.features);
    rec.loss =
        losses::cross_entropy(rec.logits, static_cast<std::size_t>(inst.label));
    records.push_back(std::move(rec));
  }
  return adaptive::TeacherCache(std::move(records));
}

TrainResult distill(const TrainConfig& config, const data::Dataset& train,
                    const data::Dataset& test,
                    const adaptive::TeacherCache* cache,
                    const model::DenseNet* teacher, const StepObserver& observer) {
  const bool needs_cache = config.variant == Variant::adaptive_kd ||
                           config.variant == Variant::normal_kd ||
                           config.variant == Variant::annealing;
  if (needs_cache && (cache == nullptr || cache->empty())) {
    throw std::invalid_argument("distill: " + variant_str(config.variant) +
                                " requires a non-empty teacher cache");
  }
  if (config.variant == Variant::annealing) {
    if (teacher == nullptr) {
      throw std::invalid_argument("distill: annealing requires the teacher net");
    }
    if (teacher->input_dim() != train.dim ||
        teacher->num_classes() != train.num_classes) {
      throw std::invalid_argument(
          "distill: teacher shape does not match dataset");
    }
  }
  return run_training(config, train, test, cache, teacher, observer, "distill");
}

double evaluate(const model::DenseNet& net, const data::Dataset& ds) {
  if (ds.instances.empty()) {
    throw std::invalid_argument("evaluate: empty dataset");
  }
  std::size_t wrong = 0;
  for (const data::Instance& inst : ds.instances) {
    const std::vector<double> logits = net.forward(inst.features);
    std::size_t pred = 0;
    for (std::size_t j = 1; j < logits.size(); ++j) {
      if (logits[j] > logits[pred]) pred = j;
    }
    if (pred != static_cast<std::size_t>(inst.label)) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(model::DenseNet& net, const model::GradientSet& grads) {
  if (!shaped_) {
    m_ = net.zero_gradients();
    v_ = net.zero_gradients();
    shaped_ = true;
  }
  if (grads.blocks.size() != net.blocks().size()) {
    throw std::invalid_argument("Adam::step: gradient shape mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t l = 0; l < net.blocks().size(); ++l) {
    model::ParamBlock& blk = net.blocks()[l];
    const model::ParamBlock& g = grads.blocks[l];
    auto update = [&](std::vector<double>& p, const std::vector<double>& gv,
                      std::vector<double>& m, std::vector<double>& v) {
      if (gv.size() != p.size()) {
        throw std::invalid_argument("Adam::step: gradient shape mismatch");
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * gv[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * gv[i] * gv[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    };
    update(blk.w, g.w, m_.blocks[l].w, v_.blocks[l].w);
    update(blk.b, g.b, m_.blocks[l].b, v_.blocks[l].b);
  }
}

void Sgd::step(model::DenseNet& net, const model::GradientSet& grads) {
  if (grads.blocks.size() != net.blocks().size()) {
    throw std::invalid_argument("Sgd::step: gradient shape mismatch");
  }
  for (std::size_t l = 0; l < net.blocks().size(); ++l) {
    model::ParamBlock& blk = net.blocks()[l];
    const model::ParamBlock& g = grads.blocks[l];
    for (std::size_t i = 0; i < blk.w.size(); ++i) blk.w[i] -= lr_ * g.w[i];
    for (std::size_t i = 0; i < blk.b.size(); ++i) blk.b[i] -= lr_ * g.b[i];
  }
}

}  // namespace adakd::trainer
