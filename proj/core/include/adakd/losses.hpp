#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace adakd::losses {

/// A scalar loss together with its gradient with respect to the logits
/// it was evaluated at. Losses are reported in nats.
struct LossGrad {
  double value = 0.0;
  std::vector<double> grad;
};

/// Temperature-scaled softmax, stabilized by subtracting the max logit
/// before exponentiation. Throws std::invalid_argument for non-positive
/// temperature or logits with fewer than two finite entries.
std::vector<double> softmax(std::span<const double> logits, double temperature);

/// log(softmax(logits / temperature)), same stabilization.
std::vector<double> log_softmax(std::span<const double> logits, double temperature);

/// -log softmax(logits)[label]. Gradient is softmax - one_hot(label).
double cross_entropy(std::span<const double> logits, std::size_t label);
LossGrad cross_entropy_grad(std::span<const double> logits, std::size_t label);

/// tau^2 * KL(teacher || student) with both distributions softened at
/// temperature tau. Zero iff the softened distributions coincide.
/// Gradient is with respect to the student logits: tau * (p_student - p_teacher).
double kl_distill(std::span<const double> student_logits,
                  std::span<const double> teacher_logits, double tau);
LossGrad kl_distill_grad(std::span<const double> student_logits,
                         std::span<const double> teacher_logits, double tau);

/// (1 - alpha) * task_loss + alpha * distill_loss. Affine in alpha, and
/// the same blend applies to the gradients.
double combined_loss(double task_loss, double distill_loss, double alpha);
std::vector<double> combined_grad(std::span<const double> task_grad,
                                  std::span<const double> distill_grad,
                                  double alpha);

/// (1 - p_label)^gamma * (-log p_label) with p = softmax(logits).
/// Reduces to cross_entropy at gamma = 0; never exceeds it for gamma >= 0.
double focal_loss(std::span<const double> logits, std::size_t label, double gamma);
LossGrad focal_loss_grad(std::span<const double> logits, std::size_t label,
                         double gamma);

/// Principal branch of the Lambert W function: the w with w * e^w = x,
/// for x >= -1/e. Halley iteration from a piecewise initial guess
/// (branch-point series below -0.32, w = x/(1+x) in the middle, the
/// log-log asymptote above 4). Residual |w e^w - x| stays below
/// 1e-10 * max(1, |x|) over the whole domain.
double lambert_w0(double x);

/// Confidence-weighted loss: sigma* minimizes
///   (task_loss - tau_sl) * sigma + lambda * (log sigma)^2
/// and has the closed form exp(-W(0.5 * max(-2/e, beta))) with
/// beta = (task_loss - tau_sl) / lambda. The returned value can be
/// negative; sigma is capped at e for very easy instances.
struct SuperLossResult {
  double value = 0.0;
  double sigma = 1.0;  ///< optimal confidence, also d(value)/d(task_loss)
};
SuperLossResult super_loss(double task_loss, double tau_sl, double lambda);

/// Regression target for two-phase annealed distillation. During phase 1
/// the teacher logits are scaled by a factor that ramps linearly from
/// (epoch+1)/phase1_epochs up to one, floored at 1/tau_max so the earliest
/// targets are never softer than temperature tau_max.
std::vector<double> annealing_target(std::span<const double> teacher_logits,
                                     std::size_t epoch, std::size_t phase1_epochs,
                                     double tau_max);

/// Mean squared error against a fixed target vector; gradient 2/n * (logits - target).
double mse_loss(std::span<const double> logits, std::span<const double> target);
LossGrad mse_loss_grad(std::span<const double> logits, std::span<const double> target);

}  // namespace adakd::losses
