#include "adakd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace adakd::losses {

namespace {

constexpr double kNegInvE = -0.36787944117144233;  // -1/e

void check_logits(std::span<const double> logits, const char* who) {
  if (logits.size() < 2) {
    throw std::invalid_argument(std::string(who) + ": need at least 2 logits");
  }
  for (double v : logits) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument(std::string(who) + ": non-finite logit");
    }
  }
}

void check_label(std::span<const double> logits, std::size_t label, const char* who) {
  if (label >= logits.size()) {
    throw std::invalid_argument(std::string(who) + ": label " +
                                std::to_string(label) + " out of range for " +
                                std::to_string(logits.size()) + " classes");
  }
}

}  // namespace

std::vector<double> log_softmax(std::span<const double> logits, double temperature) {
  check_logits(logits, "log_softmax");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("log_softmax: temperature must be positive");
  }
  std::vector<double> out(logits.size());
  double hi = logits[0];
  for (double v : logits) hi = std::max(hi, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = (logits[i] - hi) / temperature;
    sum += std::exp(out[i]);
  }
  const double lse = std::log(sum);
  for (double& v : out) v -= lse;
  return out;
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
  std::vector<double> out = log_softmax(logits, temperature);
  for (double& v : out) v = std::exp(v);
  return out;
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
  check_label(logits, label, "cross_entropy");
  return -log_softmax(logits, 1.0)[label];
}

LossGrad cross_entropy_grad(std::span<const double> logits, std::size_t label) {
  check_label(logits, label, "cross_entropy");
  const std::vector<double> lp = log_softmax(logits, 1.0);
  LossGrad out;
  out.value = -lp[label];
  out.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out.grad[i] = std::exp(lp[i]) - (i == label ? 1.0 : 0.0);
  }
  return out;
}

double kl_distill(std::span<const double> student_logits,
                  std::span<const double> teacher_logits, double tau) {
  if (student_logits.size() != teacher_logits.size()) {
    throw std::invalid_argument("kl_distill: logit length mismatch");
  }
  const std::vector<double> lp_s = log_softmax(student_logits, tau);
  const std::vector<double> lp_t = log_softmax(teacher_logits, tau);
  double kl = 0.0;
  for (std::size_t i = 0; i < lp_s.size(); ++i) {
    kl += std::exp(lp_t[i]) * (lp_t[i] - lp_s[i]);
  }
  // KL >= 0 analytically; rounding can leave a tiny negative residue.
  return std::max(0.0, tau * tau * kl);
}

LossGrad kl_distill_grad(std::span<const double> student_logits,
                         std::span<const double> teacher_logits, double tau) {
  if (student_logits.size() != teacher_logits.size()) {
    throw std::invalid_argument("kl_distill: logit length mismatch");
  }
  const std::vector<double> lp_s = log_softmax(student_logits, tau);
  const std::vector<double> lp_t = log_softmax(teacher_logits, tau);
  LossGrad out;
  double kl = 0.0;
  out.grad.resize(lp_s.size());
  for (std::size_t i = 0; i < lp_s.size(); ++i) {
    const double pt = std::exp(lp_t[i]);
    kl += pt * (lp_t[i] - lp_s[i]);
    out.grad[i] = tau * (std::exp(lp_s[i]) - pt);
  }
  out.value = std::max(0.0, tau * tau * kl);
  return out;
}

double combined_loss(double task_loss, double distill_loss, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("combined_loss: alpha must lie in [0, 1]");
  }
  return (1.0 - alpha) * task_loss + alpha * distill_loss;
}

std::vector<double> combined_grad(std::span<const double> task_grad,
                                  std::span<const double> distill_grad,
                                  double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("combined_grad: alpha must lie in [0, 1]");
  }
  if (task_grad.size() != distill_grad.size()) {
    throw std::invalid_argument("combined_grad: gradient length mismatch");
  }
  std::vector<double> out(task_grad.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 - alpha) * task_grad[i] + alpha * distill_grad[i];
  }
  return out;
}

double focal_loss(std::span<const double> logits, std::size_t label, double gamma) {
  check_label(logits, label, "focal_loss");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("focal_loss: gamma must be >= 0");
  }
  const std::vector<double> lp = log_softmax(logits, 1.0);
  // 1 - p_label accumulated from the other classes; avoids cancellation
  // when p_label is close to one.
  double miss = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    if (i != label) miss += std::exp(lp[i]);
  }
  return std::pow(miss, gamma) * (-lp[label]);
}

LossGrad focal_loss_grad(std::span<const double> logits, std::size_t label,
                         double gamma) {
  check_label(logits, label, "focal_loss");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("focal_loss: gamma must be >= 0");
  }
  const std::vector<double> lp = log_softmax(logits, 1.0);
  std::vector<double> p(lp.size());
  double miss = 0.0;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    p[i] = std::exp(lp[i]);
    if (i != label) miss += p[i];
  }
  LossGrad out;
  out.value = std::pow(miss, gamma) * (-lp[label]);
  out.grad.resize(p.size());
  if (gamma > 0.0 && miss == 0.0) {
    // p_label rounded to 1: the modulating factor and its derivative vanish.
    return out;
  }
  // d/dz_j = A * (one_hot_j - p_j) with
  // A = gamma * p_label * log(p_label) * miss^(gamma-1) - miss^gamma.
  const double a = gamma == 0.0
                       ? -1.0
                       : gamma * p[label] * lp[label] * std::pow(miss, gamma - 1.0) -
                             std::pow(miss, gamma);
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.grad[i] = a * ((i == label ? 1.0 : 0.0) - p[i]);
  }
  return out;
}

double lambert_w0(double x) {
  if (!(x >= kNegInvE - 1e-12)) {
    throw std::invalid_argument("lambert_w0: x below -1/e");
  }
  x = std::max(x, kNegInvE);
  if (x == 0.0) return 0.0;

  // 2*(e*x + 1) = p^2 of the branch-point expansion w = -1 + p - p^2/3 + ...
  const double p2 = 2.0 * (std::exp(1.0) * x + 1.0);
  if (p2 < 1e-6) {
    // So close to the branch point that the series is already beyond
    // double precision; Halley would divide by ~0 here.
    const double p = std::sqrt(p2);
    return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)));
  }

  double w;
  if (x < -0.32) {
    const double p = std::sqrt(p2);
    w = -1.0 + p * (1.0 + p * (-1.0 / 3.0));
  } else if (x < 4.0) {
    w = x / (1.0 + x);
  } else {
    const double l = std::log(x);
    const double ll = std::log(l);
    w = l - ll + ll / l;
  }

  const double tol = 1e-13 * std::max(1.0, std::abs(x));
  for (int it = 0; it < 50; ++it) {
    const double e = std::exp(w);
    const double f = w * e - x;
    if (std::abs(f) <= tol) break;
    const double denom = x * (w + 2.0) + e * (w * (w + 2.0) + 2.0);
    double step;
    if (denom != 0.0) {
      step = 2.0 * (w + 1.0) * f / denom;  // Halley
    } else {
      step = f / (e * (w + 1.0));  // Newton fallback
    }
    w -= step;
    if (std::abs(step) <= 4e-16 * (1.0 + std::abs(w))) break;
  }
  return w;
}

SuperLossResult super_loss(double task_loss, double tau_sl, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("super_loss: lambda must be positive");
  }
  if (!std::isfinite(task_loss) || !std::isfinite(tau_sl)) {
    throw std::invalid_argument("super_loss: non-finite input");
  }
  const double beta = (task_loss - tau_sl) / lambda;
  const double w = lambert_w0(0.5 * std::max(2.0 * kNegInvE, beta));
  SuperLossResult out;
  out.sigma = std::exp(-w);
  // log(sigma) == -w by construction; using w directly avoids a re-rounding.
  out.value = (task_loss - tau_sl) * out.sigma + lambda * w * w;
  return out;
}

std::vector<double> annealing_target(std::span<const double> teacher_logits,
                                     std::size_t epoch, std::size_t phase1_epochs,
                                     double tau_max) {
  check_logits(teacher_logits, "annealing_target");
  if (phase1_epochs == 0) {
    throw std::invalid_argument("annealing_target: phase1_epochs must be >= 1");
  }
  if (!(tau_max > 0.0) || !std::isfinite(tau_max)) {
    throw std::invalid_argument("annealing_target: tau_max must be positive");
  }
  const double ramp =
      static_cast<double>(epoch + 1) / static_cast<double>(phase1_epochs);
  const double scale = std::min(1.0, std::max(1.0 / tau_max, ramp));
  std::vector<double> out(teacher_logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * teacher_logits[i];
  return out;
}

double mse_loss(std::span<const double> logits, std::span<const double> target) {
  if (logits.size() != target.size()) {
    throw std::invalid_argument("mse_loss: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double d = logits[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(logits.size());
}

LossGrad mse_loss_grad(std::span<const double> logits, std::span<const double> target) {
  if (logits.size() != target.size()) {
    throw std::invalid_argument("mse_loss: length mismatch");
  }
  LossGrad out;
  out.grad.resize(logits.size());
  const double inv_n = 1.0 / static_cast<double>(logits.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double d = logits[i] - target[i];
    acc += d * d;
    out.grad[i] = 2.0 * inv_n * d;
  }
  out.value = acc * inv_n;
  return out;
}

}  // namespace adakd::losses
