#include "adakd/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "adakd/errors.hpp"
#include "json.hpp"

namespace adakd::adaptive {

namespace {

constexpr double kInvE = 0.36787944117144233;  // nearest double to exp(-1)

void check_finite(const char* who, double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string(who) + ": non-finite " + what);
  }
}

}  // namespace

TeacherCache::TeacherCache(std::vector<CacheRecord> records)
    : records_(std::move(records)) {
  index_.reserve(records_.size());
  sorted_losses_.reserve(records_.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const CacheRecord& r = records_[i];
    check_finite("TeacherCache", r.loss, "loss");
    if (r.loss < 0.0) {
      throw std::invalid_argument("TeacherCache: negative loss for id " +
                                  std::to_string(r.id));
    }
    if (r.logits.empty()) {
      throw std::invalid_argument("TeacherCache: record " + std::to_string(r.id) +
                                  " has no logits");
    }
    for (double z : r.logits) check_finite("TeacherCache", z, "logit");
    if (!index_.emplace(r.id, i).second) {
      throw std::invalid_argument("TeacherCache: duplicate id " +
                                  std::to_string(r.id));
    }
    sorted_losses_.push_back(r.loss);
    sum += r.loss;
  }
  std::sort(sorted_losses_.begin(), sorted_losses_.end());
  if (!records_.empty()) mean_ = sum / static_cast<double>(records_.size());
}

const CacheRecord& TeacherCache::by_id(std::int64_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw std::out_of_range("TeacherCache: unknown id " + std::to_string(id));
  }
  return records_[it->second];
}

void TeacherCache::require_nonempty(const char* who) const {
  if (records_.empty()) {
    throw std::invalid_argument(std::string(who) + ": cache is empty");
  }
}

double TeacherCache::mean_loss() const {
  require_nonempty("mean_loss");
  return mean_;
}

double TeacherCache::min_loss() const {
  require_nonempty("min_loss");
  return sorted_losses_.front();
}

double TeacherCache::max_loss() const {
  require_nonempty("max_loss");
  return sorted_losses_.back();
}

double TeacherCache::percentile_loss(double p) const {
  require_nonempty("percentile_loss");
  if (!(p >= 0.0 && p <= 100.0)) {
    throw std::invalid_argument("percentile_loss: p must lie in [0, 100]");
  }
  const std::size_t n = sorted_losses_.size();
  const double rank = p / 100.0 * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(rank);
  if (lo + 1 >= n) return sorted_losses_.back();
  const double frac = rank - static_cast<double>(lo);
  return sorted_losses_[lo] + (sorted_losses_[lo + 1] - sorted_losses_[lo]) * frac;
}

void TeacherCache::save_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("save_jsonl: cannot open " + path.string());
  }
  for (const CacheRecord& r : records_) {
    nlohmann::json line;
    line["id"] = r.id;
    line["loss"] = r.loss;
    line["logits"] = r.logits;
    out << line.dump() << '\n';
  }
  if (!out) {
    throw std::runtime_error("save_jsonl: write failed for " + path.string());
  }
}

TeacherCache TeacherCache::load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_jsonl: cannot open " + path.string());
  }
  std::vector<CacheRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("load_jsonl: " + path.string() + " line " +
                               std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("loss") ||
        !j.contains("logits") || !j["logits"].is_array()) {
      throw std::runtime_error("load_jsonl: " + path.string() + " line " +
                               std::to_string(lineno) + ": bad record shape");
    }
    CacheRecord r;
    r.id = j["id"].get<std::int64_t>();
    r.loss = j["loss"].get<double>();
    r.logits = j["logits"].get<std::vector<double>>();
    records.push_back(std::move(r));
  }
  return TeacherCache(std::move(records));
}

ThresholdMode ThresholdMode::parse(const std::string& text) {
  if (text == "mean") return mean();
  if (text.size() >= 2 && text[0] == 'p') {
    char* end = nullptr;
    const double p = std::strtod(text.c_str() + 1, &end);
    if (end != nullptr && *end == '\0' && std::isfinite(p) && p >= 0.0 &&
        p <= 100.0) {
      return at_percentile(p);
    }
  }
  throw std::invalid_argument("ThresholdMode: expected \"mean\" or \"p<0..100>\", got \"" +
                              text + "\"");
}

std::string ThresholdMode::str() const {
  if (use_mean) return "mean";
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%g", percentile);
  return buf;
}

double threshold_t(const TeacherCache& cache, const ThresholdMode& mode) {
  return mode.use_mean ? cache.mean_loss() : cache.percentile_loss(mode.percentile);
}

double difficulty_factor(double x, double k, double t) {
  check_finite("difficulty_factor", x, "x");
  check_finite("difficulty_factor", k, "k");
  check_finite("difficulty_factor", t, "t");
  const double d = std::exp(-k * (x - t));
  return std::min(1e30, std::max(1e-30, d));
}

double alpha_weight(double d_f) {
  if (!(d_f > 0.0) || !std::isfinite(d_f)) {
    throw std::invalid_argument("alpha_weight: d_f must be finite and positive");
  }
  return std::exp(-1.0 / std::sqrt(d_f));
}

double solve_k_plus(double x_max, double t, double alpha_min) {
  check_finite("solve_k_plus", x_max, "x_max");
  check_finite("solve_k_plus", t, "t");
  if (!(alpha_min > 0.0 && alpha_min < kInvE)) {
    throw std::invalid_argument("solve_k_plus: alpha_min must lie in (0, 1/e)");
  }
  if (!(x_max > t)) {
    throw degenerate_distribution_error(
        "solve_k_plus: x_max must exceed t; teacher losses are degenerate");
  }
  return 2.0 * std::log(std::log(1.0 / alpha_min)) / (x_max - t);
}

double k_schedule(std::size_t step, std::size_t total, double k_plus,
                  double k_minus) {
  if (total == 0) {
    throw std::invalid_argument("k_schedule: total must be positive");
  }
  if (step > total) {
    throw std::invalid_argument("k_schedule: step exceeds total");
  }
  if (step == 0) return k_plus;
  if (step == total) return k_minus;
  const double frac = static_cast<double>(step) / static_cast<double>(total);
  return k_plus + (k_minus - k_plus) * frac;
}

std::vector<double> batch_alphas(std::span<const double> teacher_losses, double k,
                                 double t) {
  if (teacher_losses.empty()) {
    throw std::invalid_argument("batch_alphas: empty loss sequence");
  }
  std::vector<double> alphas;
  alphas.reserve(teacher_losses.size());
  for (double x : teacher_losses) {
    alphas.push_back(alpha_weight(difficulty_factor(x, k, t)));
  }
  return alphas;
}

ResolvedAdaptive resolve(const TeacherCache& cache, const AdaptiveParams& params) {
  check_finite("resolve", params.k_minus, "k_minus");
  if (!(params.alpha_min > 0.0 && params.alpha_min < 1.0)) {
    throw std::invalid_argument("resolve: alpha_min must lie in (0, 1)");
  }
  ResolvedAdaptive r;
  r.t = threshold_t(cache, params.t_mode);
  r.k_minus = params.k_minus;
  r.alpha_min = params.alpha_min;
  r.x_max = params.winsorize ? cache.percentile_loss(99.9) : cache.max_loss();
  if (params.k_plus) {
    check_finite("resolve", *params.k_plus, "k_plus");
    r.k_plus = *params.k_plus;
  } else {
    r.k_plus = solve_k_plus(r.x_max, r.t, params.alpha_min);
  }
  if (r.k_plus < r.k_minus) {
    throw std::invalid_argument("resolve: k_plus must be >= k_minus");
  }
  return r;
}

ScheduleState::ScheduleState(std::size_t total_steps, double k_plus,
                             double k_minus)
    : total_(total_steps), k_plus_(k_plus), k_minus_(k_minus),
      current_k_(k_plus) {
  check_finite("ScheduleState", k_plus, "k_plus");
  check_finite("ScheduleState", k_minus, "k_minus");
}

double ScheduleState::at(std::size_t step) const {
  if (total_ == 0) return k_plus_;
  return k_schedule(std::min(step, total_), total_, k_plus_, k_minus_);
}

void ScheduleState::seek(std::size_t step) {
  step_ = std::min(step, total_);
  current_k_ = at(step_);
}

}  // namespace adakd::adaptive
