#include "adakd/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <thread>

namespace adakd::experiments {

namespace {

/// Runs fn(0..n-1) across up to `jobs` threads. The first exception to
/// occur is rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&, t] {
      try {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= n) break;
          fn(i);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (std::thread& th : pool) th.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

AlphaCurves alpha_curves(const adaptive::TeacherCache& cache,
                         const adaptive::AdaptiveParams& params) {
  AlphaCurves curves;
  curves.resolved = adaptive::resolve(cache, params);
  const double lo = cache.min_loss();
  const double hi = cache.max_loss();

  std::vector<double> xs;
  xs.reserve(201 + cache.size() + 1);
  if (hi > lo) {
    for (std::size_t i = 0; i <= 200; ++i) {
      xs.push_back(lo + (hi - lo) * static_cast<double>(i) / 200.0);
    }
    xs[200] = hi;
  } else {
    xs.push_back(lo);
  }
  for (const adaptive::CacheRecord& rec : cache.records()) {
    xs.push_back(rec.loss);
  }
  xs.push_back(curves.resolved.t);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  curves.xs = std::move(xs);
  const double t = curves.resolved.t;
  curves.at_k_plus.reserve(curves.xs.size());
  curves.at_k_zero.reserve(curves.xs.size());
  curves.at_k_minus.reserve(curves.xs.size());
  for (double x : curves.xs) {
    curves.at_k_plus.push_back(
        adaptive::alpha_weight(adaptive::difficulty_factor(x, curves.resolved.k_plus, t)));
    curves.at_k_zero.push_back(
        adaptive::alpha_weight(adaptive::difficulty_factor(x, 0.0, t)));
    curves.at_k_minus.push_back(
        adaptive::alpha_weight(adaptive::difficulty_factor(x, curves.resolved.k_minus, t)));
  }
  return curves;
}

void write_curves_csv(const AlphaCurves& curves,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("write_curves_csv: cannot open " + path.string());
  }
  out << "x,alpha_k_plus,alpha_k0,alpha_k_minus\n";
  char buf[40];
  auto field = [&](double v, char sep) {
    std::snprintf(buf, sizeof buf, "%.17g%c", v, sep);
    out << buf;
  };
  for (std::size_t i = 0; i < curves.xs.size(); ++i) {
    field(curves.xs[i], ',');
    field(curves.at_k_plus[i], ',');
    field(curves.at_k_zero[i], ',');
    field(curves.at_k_minus[i], '\n');
  }
  if (!out) {
    throw std::runtime_error("write_curves_csv: write failed for " +
                             path.string());
  }
}

SweepOutcome sweep_t(const trainer::TrainConfig& base,
                     const data::Dataset& train, const data::Dataset& test,
                     const adaptive::TeacherCache& cache,
                     const std::vector<adaptive::ThresholdMode>& modes,
                     const std::vector<std::uint64_t>& seeds,
                     std::size_t jobs) {
  if (modes.empty() || seeds.empty()) {
    throw std::invalid_argument("sweep_t: modes and seeds must be non-empty");
  }
  SweepOutcome outcome;
  outcome.cells.resize(modes.size() * seeds.size());
  parallel_for(outcome.cells.size(), jobs, [&](std::size_t idx) {
    const std::size_t m = idx / seeds.size();
    const std::size_t s = idx % seeds.size();
    trainer::TrainConfig cfg = base;
    cfg.variant = trainer::Variant::adaptive_kd;
    cfg.adaptive.t_mode = modes[m];
    cfg.seed = seeds[s];
    const trainer::TrainResult res =
        trainer::distill(cfg, train, test, &cache, nullptr);
    report::SweepCell& cell = outcome.cells[idx];
    cell.mode = modes[m].str();
    cell.t_value = res.report.resolved->t;
    cell.seed = seeds[s];
    cell.final_error = res.report.final_test_error;
  });
  for (std::size_t m = 0; m < modes.size(); ++m) {
    std::vector<double> errs;
    errs.reserve(seeds.size());
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      errs.push_back(outcome.cells[m * seeds.size() + s].final_error);
    }
    report::SweepMedian med;
    med.mode = modes[m].str();
    med.t_value = outcome.cells[m * seeds.size()].t_value;
    med.median_error = report::median(std::move(errs));
    outcome.medians.push_back(std::move(med));
  }
  return outcome;
}

ComparisonOutcome run_comparison(const ComparisonConfig& cfg) {
  if (cfg.seeds.empty()) {
    throw std::invalid_argument("run_comparison: empty seed set");
  }
  static const trainer::Variant kVariants[] = {
      trainer::Variant::finetune,  trainer::Variant::normal_kd,
      trainer::Variant::super,     trainer::Variant::focal,
      trainer::Variant::annealing, trainer::Variant::adaptive_kd,
  };
  constexpr std::size_t kNumVariants = 6;

  ComparisonOutcome outcome;
  outcome.seeds = cfg.seeds;
  outcome.variants.resize(kNumVariants);
  for (std::size_t v = 0; v < kNumVariants; ++v) {
    outcome.variants[v].variant = kVariants[v];
    outcome.variants[v].errors.assign(cfg.seeds.size(), 0.0);
  }

  parallel_for(cfg.seeds.size(), cfg.jobs, [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    const data::TrainTest tt = data::generate_blobs(cfg.spec, seed);

    trainer::TrainConfig tcfg = cfg.base;
    tcfg.layers = cfg.teacher_layers;
    tcfg.variant = trainer::Variant::finetune;
    tcfg.seed = seed;
    const trainer::TrainResult teacher =
        trainer::train_teacher(tcfg, tt.train, tt.test);
    const adaptive::TeacherCache cache =
        trainer::build_teacher_cache(teacher.net, tt.train);

    // Solve the schedule once per seed and mirror it: decay from the
    // solved k_plus down to its negative, the paper-style symmetric range.
    adaptive::AdaptiveParams probe = cfg.base.adaptive;
    probe.k_plus.reset();
    const adaptive::ResolvedAdaptive resolved = adaptive::resolve(cache, probe);

    for (std::size_t v = 0; v < kNumVariants; ++v) {
      trainer::TrainConfig scfg = cfg.base;
      scfg.layers = cfg.student_layers;
      scfg.variant = kVariants[v];
      scfg.seed = seed;
      if (kVariants[v] == trainer::Variant::adaptive_kd) {
        scfg.adaptive.k_plus = resolved.k_plus;
        scfg.adaptive.k_minus = -resolved.k_plus;
      }
      const trainer::TrainResult res =
          trainer::distill(scfg, tt.train, tt.test, &cache, &teacher.net);
      outcome.variants[v].errors[i] = res.report.final_test_error;
    }
  });

  for (report::VariantSummary& vs : outcome.variants) {
    vs.median_error = report::median(vs.errors);
  }
  return outcome;
}

}  // namespace adakd::experiments
