// adakd: config-driven experiment runner for adaptive knowledge
// distillation. Every subcommand reads one JSON config, writes its
// outputs into --out, and drops a manifest.json recording input and
// output digests so downstream commands can detect tampered files.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "adakd/adaptive.hpp"
#include "adakd/data.hpp"
#include "adakd/errors.hpp"
#include "adakd/experiments.hpp"
#include "adakd/manifest.hpp"
#include "adakd/model.hpp"
#include "adakd/report.hpp"
#include "adakd/trainer.hpp"
#include "adakd/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Args {
  std::string config;
  std::string out;
  std::size_t jobs = 1;
  std::string seed_set;
};

void add_common(CLI::App* sub, Args& args) {
  sub->add_option("--config", args.config, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--out", args.out, "output directory")->required();
}

json read_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open config " + path);
  }
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config " + path + ": " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw std::invalid_argument("config: unknown key \"" + item.key() + "\"");
    }
  }
}

std::string need_path(const json& j, const char* key) {
  if (!j.contains(key)) {
    throw std::invalid_argument("config: missing required key \"" +
                                std::string(key) + "\"");
  }
  return j.at(key).get<std::string>();
}

/// Checks the file against the manifest of the run that produced it,
/// then returns the path for later digest recording.
fs::path input_file(const std::string& path) {
  if (!fs::exists(path)) {
    throw std::runtime_error("input file does not exist: " + path);
  }
  adakd::manifest::verify_against_producer(path);
  return path;
}

void write_run_manifest(const std::string& command, const json& config,
                        const std::vector<fs::path>& inputs,
                        const std::vector<fs::path>& outputs,
                        const fs::path& out_dir) {
  adakd::manifest::Manifest m;
  m.tool_version = adakd::kVersion;
  m.command = command;
  m.config = config;
  for (const fs::path& p : inputs) {
    m.inputs.push_back({p.string(), adakd::manifest::file_digest(p)});
  }
  for (const fs::path& p : outputs) {
    m.outputs.push_back(
        {p.filename().string(), adakd::manifest::file_digest(p)});
  }
  adakd::manifest::write(m, out_dir / "manifest.json");
}

fs::path make_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::uint64_t> parse_seed_set(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string tok =
        text.substr(start, comma == std::string::npos ? comma : comma - start);
    if (tok.empty()) {
      throw std::invalid_argument("--seed-set: empty entry");
    }
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(tok, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("--seed-set: bad entry \"" + tok + "\"");
    }
    if (used != tok.size()) {
      throw std::invalid_argument("--seed-set: bad entry \"" + tok + "\"");
    }
    seeds.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (seeds.empty()) {
    throw std::invalid_argument("--seed-set: no seeds given");
  }
  return seeds;
}

void cmd_gen_data(const Args& args) {
  const json j = read_config(args.config);
  reject_unknown(j, {"blob_spec", "seed"});
  if (!j.contains("blob_spec")) {
    throw std::invalid_argument("config: missing required key \"blob_spec\"");
  }
  const adakd::data::BlobSpec spec = j.at("blob_spec").get<adakd::data::BlobSpec>();
  const std::uint64_t seed =
      j.contains("seed") ? j.at("seed").get<std::uint64_t>() : 1;

  const adakd::data::TrainTest tt = adakd::data::generate_blobs(spec, seed);
  const fs::path out = make_out_dir(args.out);
  adakd::data::save_csv(tt.train, out / "train.csv");
  adakd::data::save_csv(tt.test, out / "test.csv");
  write_run_manifest("gen-data", j, {}, {out / "train.csv", out / "test.csv"},
                     out);
  std::cout << "gen-data: wrote " << tt.train.size() << " train and "
            << tt.test.size() << " test instances to " << out.string() << "\n";
}

void cmd_train_teacher(const Args& args) {
  const json j = read_config(args.config);
  reject_unknown(j, {"train_csv", "test_csv", "config"});
  const fs::path train_csv = input_file(need_path(j, "train_csv"));
  const fs::path test_csv = input_file(need_path(j, "test_csv"));
  if (!j.contains("config")) {
    throw std::invalid_argument("config: missing required key \"config\"");
  }
  const adakd::trainer::TrainConfig cfg =
      adakd::report::config_from_json(j.at("config"));

  const adakd::data::Dataset train = adakd::data::load_csv(train_csv);
  const adakd::data::Dataset test = adakd::data::load_csv(test_csv);
  const adakd::trainer::TrainResult res =
      adakd::trainer::train_teacher(cfg, train, test);

  const fs::path out = make_out_dir(args.out);
  res.net.save(out / "teacher.ckpt");
  adakd::report::write_report_json(res.report, out / "report.json");
  adakd::report::write_epoch_csv(res.report, out / "epochs.csv");
  write_run_manifest(
      "train-teacher", j, {train_csv, test_csv},
      {out / "teacher.ckpt", out / "report.json", out / "epochs.csv"}, out);
  std::cout << "train-teacher: final test error "
            << res.report.final_test_error << "\n";
}

void cmd_cache_teacher(const Args& args) {
  const json j = read_config(args.config);
  reject_unknown(j, {"teacher_ckpt", "train_csv"});
  const fs::path ckpt = input_file(need_path(j, "teacher_ckpt"));
  const fs::path train_csv = input_file(need_path(j, "train_csv"));

  const adakd::model::DenseNet teacher = adakd::model::DenseNet::load(ckpt);
  const adakd::data::Dataset train = adakd::data::load_csv(train_csv);
  const adakd::adaptive::TeacherCache cache =
      adakd::trainer::build_teacher_cache(teacher, train);

  const fs::path out = make_out_dir(args.out);
  cache.save_jsonl(out / "cache.jsonl");
  write_run_manifest("cache-teacher", j, {ckpt, train_csv},
                     {out / "cache.jsonl"}, out);
  std::cout << "cache-teacher: cached " << cache.size()
            << " records, mean loss " << cache.mean_loss() << "\n";
}

void cmd_distill(const Args& args) {
  const json j = read_config(args.config);
  reject_unknown(j, {"train_csv", "test_csv", "cache_jsonl", "teacher_ckpt",
                     "config"});
  const fs::path train_csv = input_file(need_path(j, "train_csv"));
  const fs::path test_csv = input_file(need_path(j, "test_csv"));
  if (!j.contains("config")) {
    throw std::invalid_argument("config: missing required key \"config\"");
  }
  const adakd::trainer::TrainConfig cfg =
      adakd::report::config_from_json(j.at("config"));

  std::vector<fs::path> inputs = {train_csv, test_csv};
  std::optional<adakd::adaptive::TeacherCache> cache;
  if (j.contains("cache_jsonl")) {
    const fs::path cache_path = input_file(j.at("cache_jsonl").get<std::string>());
    cache = adakd::adaptive::TeacherCache::load_jsonl(cache_path);
    inputs.push_back(cache_path);
  }
  std::optional<adakd::model::DenseNet> teacher;
  if (j.contains("teacher_ckpt")) {
    const fs::path ckpt = input_file(j.at("teacher_ckpt").get<std::string>());
    teacher = adakd::model::DenseNet::load(ckpt);
    inputs.push_back(ckpt);
  }

  const adakd::data::Dataset train = adakd::data::load_csv(train_csv);
  const adakd::data::Dataset test = adakd::data::load_csv(test_csv);
  const adakd::trainer::TrainResult res = adakd::trainer::distill(
      cfg, train, test, cache ? &*cache : nullptr,
      teacher ? &*teacher : nullptr);

  const fs::path out = make_out_dir(args.out);
  res.net.save(out / "student.ckpt");
  adakd::report::write_report_json(res.report, out / "report.json");
  adakd::report::write_epoch_csv(res.report, out / "epochs.csv");
  write_run_manifest(
      "distill", j, inputs,
      {out / "student.ckpt", out / "report.json", out / "epochs.csv"}, out);
  std::cout << "distill[" << adakd::trainer::variant_str(cfg.variant)
            << "]: final test error " << res.report.final_test_error << "\n";
}

void cmd_sweep_t(const Args& args) {
  const json j = read_config(args.config);
  reject_unknown(j, {"train_csv", "test_csv", "cache_jsonl", "config", "modes",
                     "seeds"});
  const fs::path train_csv = input_file(need_path(j, "train_csv"));
  const fs::path test_csv = input_file(need_path(j, "test_csv"));
  const fs::path cache_path = input_file(need_path(j, "cache_jsonl"));
  if (!j.contains("config")) {
    throw std::invalid_argument("config: missing required key \"config\"");
  }
  const adakd::trainer::TrainConfig cfg =
      adakd::report::config_from_json(j.at("config"));

  std::vector<adakd::adaptive::ThresholdMode> modes;
  if (j.contains("modes")) {
    for (const auto& m : j.at("modes")) {
      modes.push_back(adakd::adaptive::ThresholdMode::parse(m.get<std::string>()));
    }
  } else {
    modes = {adakd::adaptive::ThresholdMode::mean(),
             adakd::adaptive::ThresholdMode::at_percentile(25),
             adakd::adaptive::ThresholdMode::at_percentile(50),
             adakd::adaptive::ThresholdMode::at_percentile(75)};
  }
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  if (j.contains("seeds")) {
    seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  }
  if (!args.seed_set.empty()) seeds = parse_seed_set(args.seed_set);

  const adakd::data::Dataset train = adakd::data::load_csv(train_csv);
  const adakd::data::Dataset test = adakd::data::load_csv(test_csv);
  const adakd::adaptive::TeacherCache cache =
      adakd::adaptive::TeacherCache::load_jsonl(cache_path);

  const adakd::experiments::SweepOutcome outcome = adakd::experiments::sweep_t(
      cfg, train, test, cache, modes, seeds, args.jobs);

  const fs::path out = make_out_dir(args.out);
  auto write_text = [&](const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + p.string());
    f << text;
    if (!f) throw std::runtime_error("write failed for " + p.string());
  };
  write_text(out / "sweep.csv", adakd::report::sweep_csv(outcome.cells));
  write_text(out / "sweep_medians.csv",
             adakd::report::sweep_medians_csv(outcome.medians));
  const std::string table =
      adakd::report::sweep_table_text(outcome.cells, outcome.medians);
  write_text(out / "sweep.txt", table);
  write_run_manifest(
      "sweep-t", j, {train_csv, test_csv, cache_path},
      {out / "sweep.csv", out / "sweep_medians.csv", out / "sweep.txt"}, out);
  std::cout << table;
}

void cmd_alpha_curves(const Args& args) {
  const json j = read_config(args.config);
  reject_unknown(j, {"cache_jsonl", "adaptive"});
  const fs::path cache_path = input_file(need_path(j, "cache_jsonl"));
  adakd::adaptive::AdaptiveParams params;
  if (j.contains("adaptive")) {
    params = adakd::report::adaptive_params_from_json(j.at("adaptive"));
  }

  const adakd::adaptive::TeacherCache cache =
      adakd::adaptive::TeacherCache::load_jsonl(cache_path);
  const adakd::experiments::AlphaCurves curves =
      adakd::experiments::alpha_curves(cache, params);

  const fs::path out = make_out_dir(args.out);
  adakd::experiments::write_curves_csv(curves, out / "curves.csv");
  json config_used = j;
  config_used["resolved"] = {{"t", curves.resolved.t},
                             {"k_plus", curves.resolved.k_plus},
                             {"k_minus", curves.resolved.k_minus},
                             {"alpha_min", curves.resolved.alpha_min},
                             {"x_max", curves.resolved.x_max}};
  write_run_manifest("alpha-curves", config_used, {cache_path},
                     {out / "curves.csv"}, out);
  std::cout << "alpha-curves: " << curves.xs.size() << " grid points, t = "
            << curves.resolved.t << ", k_plus = " << curves.resolved.k_plus
            << "\n";
}

void cmd_report(const Args& args) {
  const json j = read_config(args.config);
  reject_unknown(j, {"reports"});
  if (!j.contains("reports") || !j.at("reports").is_array() ||
      j.at("reports").empty()) {
    throw std::invalid_argument(
        "config: \"reports\" must be a non-empty array of report paths");
  }

  struct Run {
    adakd::trainer::Variant variant;
    std::uint64_t seed;
    double error;
  };
  std::vector<Run> runs;
  std::vector<fs::path> inputs;
  for (const auto& entry : j.at("reports")) {
    const fs::path path = input_file(entry.get<std::string>());
    const adakd::trainer::RunReport rep = adakd::report::load_report_json(path);
    runs.push_back({rep.config.variant, rep.config.seed,
                    rep.final_test_error});
    inputs.push_back(path);
  }

  std::vector<std::uint64_t> seeds;
  for (const Run& r : runs) seeds.push_back(r.seed);
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());

  std::map<adakd::trainer::Variant, std::vector<double>> by_variant;
  const double nan = std::nan("");
  for (const Run& r : runs) {
    auto& errs = by_variant[r.variant];
    if (errs.empty()) errs.assign(seeds.size(), nan);
    const std::size_t idx =
        std::lower_bound(seeds.begin(), seeds.end(), r.seed) - seeds.begin();
    errs[idx] = r.error;
  }

  std::vector<adakd::report::VariantSummary> variants;
  for (const auto& [variant, errs] : by_variant) {
    adakd::report::VariantSummary vs;
    vs.variant = variant;
    vs.errors = errs;
    std::vector<double> present;
    for (double e : errs) {
      if (!std::isnan(e)) present.push_back(e);
    }
    vs.median_error = adakd::report::median(present);
    variants.push_back(std::move(vs));
  }

  const std::string table = adakd::report::comparison_table_text(variants, seeds);
  std::string csv = "variant,seed,final_test_error\n";
  for (const Run& r : runs) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s,%llu,%.17g\n",
                  adakd::trainer::variant_str(r.variant).c_str(),
                  static_cast<unsigned long long>(r.seed), r.error);
    csv += buf;
  }

  const fs::path out = make_out_dir(args.out);
  auto write_text = [&](const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + p.string());
    f << text;
    if (!f) throw std::runtime_error("write failed for " + p.string());
  };
  write_text(out / "comparison.txt", table);
  write_text(out / "comparison.csv", csv);
  write_run_manifest("report", j, inputs,
                     {out / "comparison.txt", out / "comparison.csv"}, out);
  std::cout << table;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive knowledge distillation experiments"};
  app.set_version_flag("--version", adakd::kVersion);
  app.require_subcommand(1);

  Args gen_args, teacher_args, cache_args, distill_args, sweep_args,
      curves_args, report_args;

  add_common(app.add_subcommand("gen-data", "generate a blob dataset"),
             gen_args);
  add_common(app.add_subcommand("train-teacher",
                                "train the teacher with cross-entropy"),
             teacher_args);
  add_common(app.add_subcommand("cache-teacher",
                                "freeze per-instance teacher losses and logits"),
             cache_args);
  add_common(app.add_subcommand("distill", "train a student under any variant"),
             distill_args);
  CLI::App* sweep =
      app.add_subcommand("sweep-t", "compare threshold modes across seeds");
  add_common(sweep, sweep_args);
  sweep->add_option("--jobs", sweep_args.jobs, "parallel runs")
      ->check(CLI::PositiveNumber);
  sweep->add_option("--seed-set", sweep_args.seed_set,
                    "comma-separated seed list overriding the config");
  add_common(app.add_subcommand("alpha-curves",
                                "emit alpha(x) at k_plus, 0 and k_minus"),
             curves_args);
  add_common(app.add_subcommand("report",
                                "combine run reports into a comparison table"),
             report_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("gen-data")) {
      cmd_gen_data(gen_args);
    } else if (app.got_subcommand("train-teacher")) {
      cmd_train_teacher(teacher_args);
    } else if (app.got_subcommand("cache-teacher")) {
      cmd_cache_teacher(cache_args);
    } else if (app.got_subcommand("distill")) {
      cmd_distill(distill_args);
    } else if (app.got_subcommand("sweep-t")) {
      cmd_sweep_t(sweep_args);
    } else if (app.got_subcommand("alpha-curves")) {
      cmd_alpha_curves(curves_args);
    } else if (app.got_subcommand("report")) {
      cmd_report(report_args);
    }
  } catch (const adakd::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
