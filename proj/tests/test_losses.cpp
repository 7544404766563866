#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "adakd/losses.hpp"
#include "adakd/rng.hpp"

using namespace adakd;

namespace {

// Frozen from a 50-digit mpmath evaluation, rounded to nearest double.
constexpr double kSoftmax210_0 = 0.6652409557748219;
constexpr double kSoftmax210_1 = 0.24472847105479764;
constexpr double kSoftmax210_2 = 0.09003057317038046;
constexpr double kCe210Label2 = 2.40760596444438;
constexpr double kKl20_02_Tau2 = 1.848468629040039;
constexpr double kKlGrad = 0.9242343145200195;
constexpr double kW0Half = 0.35173371124919584;
constexpr double kOmega = 0.5671432904097838;
constexpr double kW0Ten = 1.7455280027406994;
constexpr double kW0Million = 11.383358086140053;
constexpr double kW0NearBranch = -0.8060843159708178;  // W0(-0.36)
constexpr double kSigmaBeta1 = 0.7034674224983917;
constexpr double kSuperAtTauPlusLambda = 0.8271840261275243;
constexpr double kFocalHalfGamma2 = 0.17328679513998632;  // 0.25 ln 2

// Independent W0 oracle: bisection on the monotone w e^w over [-1, 710].
double w0_bisect(double x) {
  double lo = -1.0, hi = 710.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid * std::exp(mid) < x) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Central finite difference of a scalar function of the logit vector.
template <typename F>
std::vector<double> fd_grad(F f, std::vector<double> z, double h = 1e-6) {
  std::vector<double> g(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double keep = z[i];
    z[i] = keep + h;
    const double up = f(z);
    z[i] = keep - h;
    const double dn = f(z);
    z[i] = keep;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

double max_rel_err(const std::vector<double>& got, const std::vector<double>& want) {
  double worst = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double denom = std::max({1e-8, std::fabs(got[i]), std::fabs(want[i])});
    worst = std::max(worst, std::fabs(got[i] - want[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("softmax matches frozen oracle and sums to one") {
  const std::vector<double> z = {2.0, 1.0, 0.0};
  const std::vector<double> p = losses::softmax(z, 1.0);
  CHECK(p[0] == doctest::Approx(kSoftmax210_0).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(kSoftmax210_1).epsilon(1e-15));
  CHECK(p[2] == doctest::Approx(kSoftmax210_2).epsilon(1e-15));
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-15));

  // shift invariance: softmax(z + c) == softmax(z) bitwise (max-subtraction)
  const std::vector<double> shifted = {2.0 + 100.0, 1.0 + 100.0, 0.0 + 100.0};
  const std::vector<double> ps = losses::softmax(shifted, 1.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(ps[i] == p[i]);
}

TEST_CASE("softmax handles extreme logits without overflow") {
  const std::vector<double> z = {1000.0, 0.0, -1000.0};
  const std::vector<double> p = losses::softmax(z, 1.0);
  CHECK(std::isfinite(p[0]));
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p[2] >= 0.0);

  const std::vector<double> lp = losses::log_softmax(z, 1.0);
  CHECK(lp[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(lp[2] == doctest::Approx(-2000.0).epsilon(1e-12));
}

TEST_CASE("temperature flattens the distribution") {
  const std::vector<double> z = {2.0, 1.0, 0.0};
  const std::vector<double> sharp = losses::softmax(z, 0.5);
  const std::vector<double> p = losses::softmax(z, 1.0);
  const std::vector<double> soft = losses::softmax(z, 4.0);
  CHECK(sharp[0] > p[0]);
  CHECK(soft[0] < p[0]);
  // tau=2 halves the logits
  const std::vector<double> half = {1.0, 0.5, 0.0};
  const std::vector<double> via_half = losses::softmax(half, 1.0);
  const std::vector<double> via_tau = losses::softmax(z, 2.0);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(via_tau[i] == doctest::Approx(via_half[i]).epsilon(1e-15));
}

TEST_CASE("softmax precondition failures") {
  CHECK_THROWS_AS(losses::softmax(std::vector<double>{1.0}, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(losses::softmax(std::vector<double>{1.0, 2.0}, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(losses::softmax(std::vector<double>{1.0, 2.0}, -1.0),
                  std::invalid_argument);
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(losses::softmax(std::vector<double>{inf, 0.0}, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(losses::softmax(std::vector<double>{std::nan(""), 0.0}, 1.0),
                  std::invalid_argument);
}

TEST_CASE("cross entropy matches frozen oracle") {
  const std::vector<double> z = {2.0, 1.0, 0.0};
  CHECK(losses::cross_entropy(z, 2) == doctest::Approx(kCe210Label2).epsilon(1e-15));
  CHECK(losses::cross_entropy(z, 0) ==
        doctest::Approx(-std::log(kSoftmax210_0)).epsilon(1e-14));
  CHECK_THROWS_AS(losses::cross_entropy(z, 3), std::invalid_argument);
}

TEST_CASE("cross entropy gradient equals softmax minus one-hot and FD") {
  const std::vector<double> z = {0.3, -1.2, 2.1, 0.0};
  const losses::LossGrad lg = losses::cross_entropy_grad(z, 1);
  const std::vector<double> p = losses::softmax(z, 1.0);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double want = p[i] - (i == 1 ? 1.0 : 0.0);
    CHECK(lg.grad[i] == doctest::Approx(want).epsilon(1e-14));
  }
  const std::vector<double> fd =
      fd_grad([](const std::vector<double>& v) { return losses::cross_entropy(v, 1); }, z);
  CHECK(max_rel_err(lg.grad, fd) < 1e-7);
  // gradient sums to zero: logit shifts do not change the loss
  double s = 0.0;
  for (double g : lg.grad) s += g;
  CHECK(std::fabs(s) < 1e-14);
}

TEST_CASE("kl distill matches frozen oracle") {
  const std::vector<double> t = {2.0, 0.0};
  const std::vector<double> s = {0.0, 2.0};
  CHECK(losses::kl_distill(s, t, 2.0) == doctest::Approx(kKl20_02_Tau2).epsilon(1e-15));
  const losses::LossGrad lg = losses::kl_distill_grad(s, t, 2.0);
  CHECK(lg.value == doctest::Approx(kKl20_02_Tau2).epsilon(1e-15));
  CHECK(lg.grad[0] == doctest::Approx(-kKlGrad).epsilon(1e-14));
  CHECK(lg.grad[1] == doctest::Approx(kKlGrad).epsilon(1e-14));
}

TEST_CASE("kl distill is zero iff distributions coincide") {
  const std::vector<double> t = {1.5, -0.5, 0.25};
  CHECK(losses::kl_distill(t, t, 3.0) == doctest::Approx(0.0).epsilon(1e-15));
  // shifted student logits give the same softened distribution
  const std::vector<double> shifted = {1.5 + 7.0, -0.5 + 7.0, 0.25 + 7.0};
  CHECK(std::fabs(losses::kl_distill(shifted, t, 3.0)) < 1e-12);
  const std::vector<double> other = {0.0, 0.0, 1.0};
  CHECK(losses::kl_distill(other, t, 3.0) > 1e-3);
}

TEST_CASE("kl distill gradient against long-double oracle and FD") {
  // independent evaluation in long double, no shared code with the library
  auto oracle = [](const std::vector<double>& s, const std::vector<double>& t,
                   double tau) {
    const std::size_t n = s.size();
    std::vector<long double> pt(n), ps(n);
    long double zt = 0.0L, zs = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      pt[i] = expl(static_cast<long double>(t[i]) / tau);
      ps[i] = expl(static_cast<long double>(s[i]) / tau);
      zt += pt[i];
      zs += ps[i];
    }
    long double kl = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
      pt[i] /= zt;
      ps[i] /= zs;
      kl += pt[i] * logl(pt[i] / ps[i]);
    }
    return static_cast<double>(tau * tau * kl);
  };

  rng::Engine eng(rng::mix(7, 0xfeed));
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(4), t(4);
    for (double& v : s) v = 4.0 * eng.uniform01() - 2.0;
    for (double& v : t) v = 4.0 * eng.uniform01() - 2.0;
    const double tau = 0.5 + 3.0 * eng.uniform01();
    const double got = losses::kl_distill(s, t, tau);
    CHECK(got == doctest::Approx(oracle(s, t, tau)).epsilon(1e-12));

    const losses::LossGrad lg = losses::kl_distill_grad(s, t, tau);
    const std::vector<double> fd = fd_grad(
        [&](const std::vector<double>& v) { return losses::kl_distill(v, t, tau); }, s);
    CHECK(max_rel_err(lg.grad, fd) < 1e-6);
  }
}

TEST_CASE("combined loss blends affinely") {
  CHECK(losses::combined_loss(2.0, 4.0, 0.0) == 2.0);
  CHECK(losses::combined_loss(2.0, 4.0, 1.0) == 4.0);
  CHECK(losses::combined_loss(2.0, 4.0, 0.25) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK_THROWS_AS(losses::combined_loss(1.0, 1.0, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(losses::combined_loss(1.0, 1.0, 1.1), std::invalid_argument);

  const std::vector<double> a = {1.0, -2.0};
  const std::vector<double> b = {3.0, 5.0};
  const std::vector<double> g = losses::combined_grad(a, b, 0.5);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(g[1] == doctest::Approx(1.5).epsilon(1e-15));
  // alpha = 0 reproduces the task gradient bitwise
  const std::vector<double> g0 = losses::combined_grad(a, b, 0.0);
  CHECK(g0[0] == a[0]);
  CHECK(g0[1] == a[1]);
}

TEST_CASE("focal loss matches frozen oracle and collapses at gamma zero") {
  // two equal logits put p = 0.5 on the label
  const std::vector<double> z = {0.0, 0.0};
  CHECK(losses::focal_loss(z, 0, 2.0) ==
        doctest::Approx(kFocalHalfGamma2).epsilon(1e-14));

  const std::vector<double> z2 = {1.0, -0.5, 0.25};
  CHECK(losses::focal_loss(z2, 1, 0.0) ==
        doctest::Approx(losses::cross_entropy(z2, 1)).epsilon(1e-14));
  // down-weighting: gamma > 0 never exceeds cross entropy
  for (const double gamma : {0.5, 1.0, 2.0, 5.0}) {
    CHECK(losses::focal_loss(z2, 1, gamma) <= losses::cross_entropy(z2, 1));
  }
  CHECK_THROWS_AS(losses::focal_loss(z2, 1, -1.0), std::invalid_argument);
}

TEST_CASE("focal gradient against FD over random draws") {
  rng::Engine eng(rng::mix(11, 0xf0ca1));
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> z(3);
    for (double& v : z) v = 4.0 * eng.uniform01() - 2.0;
    const double gamma = 3.0 * eng.uniform01();
    const std::size_t label = trial % 3;
    const losses::LossGrad lg = losses::focal_loss_grad(z, label, gamma);
    CHECK(lg.value == doctest::Approx(losses::focal_loss(z, label, gamma)).epsilon(1e-14));
    const std::vector<double> fd = fd_grad(
        [&](const std::vector<double>& v) { return losses::focal_loss(v, label, gamma); },
        z);
    CHECK(max_rel_err(lg.grad, fd) < 1e-6);
  }
}

TEST_CASE("lambert w0 matches frozen points") {
  CHECK(losses::lambert_w0(0.0) == 0.0);
  CHECK(losses::lambert_w0(std::exp(1.0)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(losses::lambert_w0(0.5) == doctest::Approx(kW0Half).epsilon(1e-14));
  CHECK(losses::lambert_w0(1.0) == doctest::Approx(kOmega).epsilon(1e-14));
  CHECK(losses::lambert_w0(10.0) == doctest::Approx(kW0Ten).epsilon(1e-14));
  CHECK(losses::lambert_w0(1e6) == doctest::Approx(kW0Million).epsilon(1e-14));
  CHECK(losses::lambert_w0(-0.36) == doctest::Approx(kW0NearBranch).epsilon(1e-12));
  CHECK(losses::lambert_w0(-std::exp(-1.0)) == doctest::Approx(-1.0).epsilon(1e-7));
  CHECK_THROWS_AS(losses::lambert_w0(-0.5), std::invalid_argument);
}

TEST_CASE("lambert w0 residual bound across the domain") {
  // log-spaced positive grid, linear grid through the branch region
  std::vector<double> xs;
  for (int i = -300; i <= 300; i += 3) xs.push_back(std::pow(10.0, i / 10.0));
  for (int i = 0; i <= 1000; ++i) {
    xs.push_back(-std::exp(-1.0) + i * (std::exp(-1.0) / 1000.0));
  }
  for (const double x : xs) {
    const double w = losses::lambert_w0(x);
    const double resid = std::fabs(w * std::exp(w) - x);
    CHECK(resid <= 1e-10 * std::max(1.0, std::fabs(x)));
  }
}

TEST_CASE("lambert w0 agrees with bisection oracle") {
  for (const double x : {-0.3, -0.1, 0.01, 0.7, 3.0, 42.0, 1e4, 1e8}) {
    CHECK(losses::lambert_w0(x) == doctest::Approx(w0_bisect(x)).epsilon(1e-11));
  }
}

TEST_CASE("super loss frozen values and identities") {
  // beta = 1: sigma* = exp(-W(1/2)) and the wx e^w identity gives 2 W(1/2)
  const losses::SuperLossResult r = losses::super_loss(2.0, 1.0, 1.0);
  CHECK(r.sigma == doctest::Approx(kSigmaBeta1).epsilon(1e-14));
  CHECK(r.sigma == doctest::Approx(2.0 * kW0Half).epsilon(1e-14));
  CHECK(r.value == doctest::Approx(kSuperAtTauPlusLambda).epsilon(1e-14));

  // at the running threshold, beta = 0: full confidence, zero penalty
  const losses::SuperLossResult at_tau = losses::super_loss(1.5, 1.5, 1.0);
  CHECK(at_tau.sigma == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(at_tau.value == doctest::Approx(0.0).epsilon(1e-14));

  // cap: beta <= -2/e pins sigma at e
  const losses::SuperLossResult capped = losses::super_loss(0.0, 10.0, 1.0);
  CHECK(capped.sigma == doctest::Approx(std::exp(1.0)).epsilon(1e-12));

  CHECK_THROWS_AS(losses::super_loss(1.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(losses::super_loss(std::nan(""), 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("super loss sigma is the argmin of the objective") {
  // perturb around the closed form: (l - tau) sigma + lambda (log sigma)^2
  auto objective = [](double sigma, double excess, double lambda) {
    return excess * sigma + lambda * std::log(sigma) * std::log(sigma);
  };
  rng::Engine eng(rng::mix(3, 0x5afe));
  for (int trial = 0; trial < 100; ++trial) {
    const double lambda = 0.25 + 2.0 * eng.uniform01();
    const double beta = 6.0 * eng.uniform01() - 0.7;  // keep above the cap
    const double excess = beta * lambda;              // task - tau_sl
    const losses::SuperLossResult r = losses::super_loss(1.0 + excess, 1.0, lambda);
    const double at = objective(r.sigma, excess, lambda);
    CHECK(objective(r.sigma * (1.0 + 1e-5), excess, lambda) >= at - 1e-12);
    CHECK(objective(r.sigma * (1.0 - 1e-5), excess, lambda) >= at - 1e-12);
  }
}

TEST_CASE("super loss sigma decreases in task loss") {
  double prev = std::numeric_limits<double>::infinity();
  for (double task = -2.0; task <= 6.0; task += 0.05) {
    const double sigma = losses::super_loss(task, 1.0, 1.0).sigma;
    CHECK(sigma <= prev + 1e-15);
    prev = sigma;
  }
}

TEST_CASE("annealing target ramps the teacher logits") {
  const std::vector<double> t = {4.0, -2.0, 0.5};
  // epoch 0 of 10 with tau_max 5: phi = max(1/5, 1/10) = 0.2
  const std::vector<double> first = losses::annealing_target(t, 0, 10, 5.0);
  for (std::size_t i = 0; i < t.size(); ++i)
    CHECK(first[i] == doctest::Approx(0.2 * t[i]).epsilon(1e-15));
  // early epochs are floored at 1/tau_max
  const std::vector<double> floored = losses::annealing_target(t, 0, 100, 5.0);
  for (std::size_t i = 0; i < t.size(); ++i)
    CHECK(floored[i] == doctest::Approx(0.2 * t[i]).epsilon(1e-15));
  // final phase-1 epoch reproduces the teacher exactly
  const std::vector<double> last = losses::annealing_target(t, 9, 10, 5.0);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(last[i] == t[i]);
  CHECK_THROWS_AS(losses::annealing_target(t, 0, 0, 5.0), std::invalid_argument);
  CHECK_THROWS_AS(losses::annealing_target(t, 0, 10, 0.0), std::invalid_argument);
}

TEST_CASE("mse loss value and gradient") {
  const std::vector<double> z = {1.0, 2.0};
  const std::vector<double> t = {0.0, 4.0};
  CHECK(losses::mse_loss(z, t) == doctest::Approx(2.5).epsilon(1e-15));
  const losses::LossGrad lg = losses::mse_loss_grad(z, t);
  CHECK(lg.grad[0] == doctest::Approx(1.0).epsilon(1e-15));   // 2/2 * (1-0)
  CHECK(lg.grad[1] == doctest::Approx(-2.0).epsilon(1e-15));  // 2/2 * (2-4)
  const std::vector<double> fd = fd_grad(
      [&](const std::vector<double>& v) { return losses::mse_loss(v, t); }, z);
  CHECK(max_rel_err(lg.grad, fd) < 1e-8);
  CHECK_THROWS_AS(losses::mse_loss(z, std::vector<double>{1.0}), std::invalid_argument);
}
