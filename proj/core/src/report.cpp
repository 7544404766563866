#include "adakd/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace adakd::report {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void reject_unknown_keys(const nlohmann::json& j,
                         std::initializer_list<const char*> allowed,
                         const char* where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw std::invalid_argument(std::string(where) + ": unknown key \"" +
                                  item.key() + "\"");
    }
  }
}

}  // namespace

nlohmann::json adaptive_params_to_json(const adaptive::AdaptiveParams& p) {
  nlohmann::json j;
  j["t_mode"] = p.t_mode.str();
  if (p.k_plus) {
    j["k_plus"] = *p.k_plus;
  } else {
    j["k_plus"] = nullptr;
  }
  j["k_minus"] = p.k_minus;
  j["alpha_min"] = p.alpha_min;
  j["winsorize"] = p.winsorize;
  return j;
}

adaptive::AdaptiveParams adaptive_params_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"t_mode", "k_plus", "k_minus", "alpha_min", "winsorize"},
                      "config.adaptive");
  adaptive::AdaptiveParams p;
  if (j.contains("t_mode")) {
    p.t_mode = adaptive::ThresholdMode::parse(j.at("t_mode").get<std::string>());
  }
  if (j.contains("k_plus") && !j.at("k_plus").is_null()) {
    p.k_plus = j.at("k_plus").get<double>();
  }
  if (j.contains("k_minus")) p.k_minus = j.at("k_minus").get<double>();
  if (j.contains("alpha_min")) p.alpha_min = j.at("alpha_min").get<double>();
  if (j.contains("winsorize")) p.winsorize = j.at("winsorize").get<bool>();
  return p;
}

nlohmann::json config_to_json(const trainer::TrainConfig& cfg) {
  nlohmann::json j;
  j["layers"] = cfg.layers;
  j["activation"] = model::activation_str(cfg.activation);
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["optimizer"] = trainer::optimizer_str(cfg.optimizer);
  j["epochs"] = cfg.epochs;
  j["tau"] = cfg.tau;
  j["variant"] = trainer::variant_str(cfg.variant);
  j["alpha_fixed"] = cfg.alpha_fixed;
  j["adaptive"] = adaptive_params_to_json(cfg.adaptive);
  j["focal_gamma"] = cfg.focal_gamma;
  if (cfg.super_tau) {
    j["super_tau"] = *cfg.super_tau;
  } else {
    j["super_tau"] = nullptr;
  }
  j["super_lambda"] = cfg.super_lambda;
  j["annealing_tau_max"] = cfg.annealing_tau_max;
  j["annealing_phase1_frac"] = cfg.annealing_phase1_frac;
  j["seed"] = cfg.seed;
  return j;
}

trainer::TrainConfig config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(
      j,
      {"layers", "activation", "batch_size", "learning_rate", "optimizer",
       "epochs", "tau", "variant", "alpha_fixed", "adaptive", "focal_gamma",
       "super_tau", "super_lambda", "annealing_tau_max", "annealing_phase1_frac",
       "seed"},
      "config");
  trainer::TrainConfig cfg;
  if (!j.contains("layers")) {
    throw std::invalid_argument("config: missing required key \"layers\"");
  }
  cfg.layers = j.at("layers").get<std::vector<std::size_t>>();
  if (j.contains("activation")) {
    cfg.activation = model::parse_activation(j.at("activation").get<std::string>());
  }
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("learning_rate")) {
    cfg.learning_rate = j.at("learning_rate").get<double>();
  }
  if (j.contains("optimizer")) {
    cfg.optimizer = trainer::parse_optimizer(j.at("optimizer").get<std::string>());
  }
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("tau")) cfg.tau = j.at("tau").get<double>();
  if (j.contains("variant")) {
    cfg.variant = trainer::parse_variant(j.at("variant").get<std::string>());
  }
  if (j.contains("alpha_fixed")) cfg.alpha_fixed = j.at("alpha_fixed").get<double>();
  if (j.contains("adaptive")) {
    cfg.adaptive = adaptive_params_from_json(j.at("adaptive"));
  }
  if (j.contains("focal_gamma")) cfg.focal_gamma = j.at("focal_gamma").get<double>();
  if (j.contains("super_tau") && !j.at("super_tau").is_null()) {
    cfg.super_tau = j.at("super_tau").get<double>();
  }
  if (j.contains("super_lambda")) cfg.super_lambda = j.at("super_lambda").get<double>();
  if (j.contains("annealing_tau_max")) {
    cfg.annealing_tau_max = j.at("annealing_tau_max").get<double>();
  }
  if (j.contains("annealing_phase1_frac")) {
    cfg.annealing_phase1_frac = j.at("annealing_phase1_frac").get<double>();
  }
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

nlohmann::json report_to_json(const trainer::RunReport& rep) {
  nlohmann::json j;
  j["config"] = config_to_json(rep.config);
  auto& epochs = j["epochs"] = nlohmann::json::array();
  for (const trainer::EpochStats& e : rep.epochs) {
    nlohmann::json je;
    je["epoch"] = e.epoch;
    je["train_loss"] = e.train_loss;
    je["test_error"] = e.test_error;
    if (e.has_alpha) {
      je["k"] = e.k;
      je["alpha_mean"] = e.alpha_mean;
      je["alpha_min"] = e.alpha_min;
      je["alpha_max"] = e.alpha_max;
      je["alpha_mean_hard"] = e.alpha_mean_hard;
      je["alpha_mean_easy"] = e.alpha_mean_easy;
    }
    epochs.push_back(std::move(je));
  }
  j["final_train_loss"] = rep.final_train_loss;
  j["final_test_error"] = rep.final_test_error;
  if (rep.resolved) {
    nlohmann::json jr;
    jr["t"] = rep.resolved->t;
    jr["k_plus"] = rep.resolved->k_plus;
    jr["k_minus"] = rep.resolved->k_minus;
    jr["alpha_min"] = rep.resolved->alpha_min;
    jr["x_max"] = rep.resolved->x_max;
    j["resolved"] = std::move(jr);
  } else {
    j["resolved"] = nullptr;
  }
  j["wall_ms"] = rep.wall_ms;
  return j;
}

trainer::RunReport report_from_json(const nlohmann::json& j) {
  trainer::RunReport rep;
  rep.config = config_from_json(j.at("config"));
  for (const auto& je : j.at("epochs")) {
    trainer::EpochStats e;
    e.epoch = je.at("epoch").get<std::size_t>();
    e.train_loss = je.at("train_loss").get<double>();
    e.test_error = je.at("test_error").get<double>();
    if (je.contains("alpha_mean")) {
      e.has_alpha = true;
      e.k = je.at("k").get<double>();
      e.alpha_mean = je.at("alpha_mean").get<double>();
      e.alpha_min = je.at("alpha_min").get<double>();
      e.alpha_max = je.at("alpha_max").get<double>();
      e.alpha_mean_hard = je.at("alpha_mean_hard").get<double>();
      e.alpha_mean_easy = je.at("alpha_mean_easy").get<double>();
    }
    rep.epochs.push_back(e);
  }
  rep.final_train_loss = j.at("final_train_loss").get<double>();
  rep.final_test_error = j.at("final_test_error").get<double>();
  if (j.contains("resolved") && !j.at("resolved").is_null()) {
    const auto& jr = j.at("resolved");
    adaptive::ResolvedAdaptive r;
    r.t = jr.at("t").get<double>();
    r.k_plus = jr.at("k_plus").get<double>();
    r.k_minus = jr.at("k_minus").get<double>();
    r.alpha_min = jr.at("alpha_min").get<double>();
    r.x_max = jr.at("x_max").get<double>();
    rep.resolved = r;
  }
  if (j.contains("wall_ms")) rep.wall_ms = j.at("wall_ms").get<double>();
  return rep;
}

void write_report_json(const trainer::RunReport& rep,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("write_report_json: cannot open " + path.string());
  }
  out << report_to_json(rep).dump(2) << '\n';
  if (!out) {
    throw std::runtime_error("write_report_json: write failed for " +
                             path.string());
  }
}

trainer::RunReport load_report_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_report_json: cannot open " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_report_json: " + path.string() + ": " +
                             e.what());
  }
  return report_from_json(j);
}

void write_epoch_csv(const trainer::RunReport& rep,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("write_epoch_csv: cannot open " + path.string());
  }
  out << "epoch,train_loss,test_error,k,alpha_mean,alpha_min,alpha_max\n";
  for (const trainer::EpochStats& e : rep.epochs) {
    out << e.epoch << ',' << fmt17(e.train_loss) << ',' << fmt17(e.test_error)
        << ',';
    if (e.has_alpha) {
      out << fmt17(e.k) << ',' << fmt17(e.alpha_mean) << ','
          << fmt17(e.alpha_min) << ',' << fmt17(e.alpha_max);
    } else {
      out << ",,,";
    }
    out << '\n';
  }
  if (!out) {
    throw std::runtime_error("write_epoch_csv: write failed for " +
                             path.string());
  }
}

double median(std::vector<double> values) {
  if (values.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

std::string comparison_table_text(const std::vector<VariantSummary>& variants,
                                  const std::vector<std::uint64_t>& seeds) {
  // Fixed presentation order, matching the usual comparison layout.
  static const trainer::Variant order[] = {
      trainer::Variant::finetune,  trainer::Variant::normal_kd,
      trainer::Variant::super,     trainer::Variant::focal,
      trainer::Variant::annealing, trainer::Variant::adaptive_kd,
  };
  static const char* names[] = {"Finetune",   "Normal KD",    "Super Loss",
                                "Focal Loss", "Annealing KD", "Adaptive KD"};
  std::vector<const VariantSummary*> cols;
  std::vector<std::string> headers;
  for (std::size_t i = 0; i < 6; ++i) {
    for (const VariantSummary& vs : variants) {
      if (vs.variant == order[i]) {
        cols.push_back(&vs);
        headers.push_back(names[i]);
      }
    }
  }
  const int width = 14;
  std::string out = "Final test error (%) by variant\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-10s", "seed");
  out += buf;
  for (const std::string& h : headers) {
    std::snprintf(buf, sizeof buf, "%*s", width, h.c_str());
    out += buf;
  }
  out += '\n';
  out.append(10 + cols.size() * width, '-');
  out += '\n';
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    std::snprintf(buf, sizeof buf, "%-10llu",
                  static_cast<unsigned long long>(seeds[s]));
    out += buf;
    for (const VariantSummary* vs : cols) {
      if (s < vs->errors.size() && !std::isnan(vs->errors[s])) {
        std::snprintf(buf, sizeof buf, "%*.2f", width, 100.0 * vs->errors[s]);
      } else {
        std::snprintf(buf, sizeof buf, "%*s", width, "-");
      }
      out += buf;
    }
    out += '\n';
  }
  out.append(10 + cols.size() * width, '-');
  out += '\n';
  std::snprintf(buf, sizeof buf, "%-10s", "median");
  out += buf;
  for (const VariantSummary* vs : cols) {
    std::snprintf(buf, sizeof buf, "%*.2f", width, 100.0 * vs->median_error);
    out += buf;
  }
  out += '\n';
  return out;
}

std::string sweep_csv(const std::vector<SweepCell>& cells) {
  std::string out = "mode,t,seed,final_test_error\n";
  for (const SweepCell& c : cells) {
    out += c.mode;
    out += ',';
    out += fmt17(c.t_value);
    out += ',';
    out += std::to_string(c.seed);
    out += ',';
    out += fmt17(c.final_error);
    out += '\n';
  }
  return out;
}

std::string sweep_medians_csv(const std::vector<SweepMedian>& medians) {
  std::string out = "mode,t,median_test_error\n";
  for (const SweepMedian& m : medians) {
    out += m.mode;
    out += ',';
    out += fmt17(m.t_value);
    out += ',';
    out += fmt17(m.median_error);
    out += '\n';
  }
  return out;
}

std::string sweep_table_text(const std::vector<SweepCell>& cells,
                             const std::vector<SweepMedian>& medians) {
  std::string out = "t-threshold sweep: final test error (%) per mode and seed\n";
  char buf[96];
  std::snprintf(buf, sizeof buf, "%-6s %-22s %-6s %s\n", "mode", "t", "seed",
                "error");
  out += buf;
  for (const SweepCell& c : cells) {
    std::snprintf(buf, sizeof buf, "%-6s %-22.15g %-6llu %6.2f\n",
                  c.mode.c_str(), c.t_value,
                  static_cast<unsigned long long>(c.seed),
                  100.0 * c.final_error);
    out += buf;
  }
  out += "per-mode medians\n";
  for (const SweepMedian& m : medians) {
    std::snprintf(buf, sizeof buf, "%-6s %-22.15g %6.2f\n", m.mode.c_str(),
                  m.t_value, 100.0 * m.median_error);
    out += buf;
  }
  return out;
}

}  // namespace adakd::report
