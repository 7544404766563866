#include "adakd/data.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include "adakd/rng.hpp"
#include "json.hpp"

namespace adakd::data {

namespace {

void check_spec(const BlobSpec& spec) {
  if (spec.dim == 0) throw std::invalid_argument("BlobSpec: dim must be positive");
  if (spec.classes.empty()) {
    throw std::invalid_argument("BlobSpec: need at least one class");
  }
  if (spec.train_per_class == 0 || spec.test_per_class == 0) {
    throw std::invalid_argument("BlobSpec: per-class counts must be positive");
  }
  for (const ClassBlob& c : spec.classes) {
    if (c.center.size() != spec.dim) {
      throw std::invalid_argument("BlobSpec: center dimension mismatch");
    }
    if (!(c.cov_scale > 0.0)) {
      throw std::invalid_argument("BlobSpec: cov_scale must be positive");
    }
  }
}

Dataset draw_split(const BlobSpec& spec, std::uint64_t seed, std::uint64_t stream,
                   std::size_t per_class) {
  Dataset ds;
  ds.dim = spec.dim;
  ds.num_classes = spec.classes.size();
  ds.instances.reserve(per_class * spec.classes.size());
  const double center_scale = 1.0 / std::max(spec.overlap, 1e-9);
  std::int64_t next_id = 0;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    rng::Engine eng(rng::mix(rng::mix(seed, stream), c));
    const ClassBlob& blob = spec.classes[c];
    for (std::size_t s = 0; s < per_class; ++s) {
      Instance inst;
      inst.id = next_id++;
      inst.label = static_cast<int>(c);
      inst.features.resize(spec.dim);
      for (std::size_t d = 0; d < spec.dim; ++d) {
        inst.features[d] = blob.center[d] * center_scale + blob.cov_scale * eng.normal();
      }
      ds.instances.push_back(std::move(inst));
    }
  }
  return ds;
}

}  // namespace

BlobSpec default_benchmark_spec() {
  BlobSpec spec;
  spec.dim = 2;
  spec.classes = {
      {{-4.0, 0.0}, 0.9},
      {{1.6, 0.9}, 1.0},
      {{3.1, -0.7}, 1.1},
  };
  spec.train_per_class = 200;
  spec.test_per_class = 500;
  spec.overlap = 1.0;
  return spec;
}

TrainTest generate_blobs(const BlobSpec& spec, std::uint64_t seed) {
  check_spec(spec);
  TrainTest tt;
  tt.train = draw_split(spec, seed, rng::kStreamBlobTrain, spec.train_per_class);
  tt.train.split = "train";
  tt.test = draw_split(spec, seed, rng::kStreamBlobTest, spec.test_per_class);
  tt.test.split = "test";
  return tt;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("save_csv: cannot open " + path.string());
  }
  out << "id";
  for (std::size_t d = 0; d < ds.dim; ++d) out << ",f" << d;
  out << ",label\n";
  char buf[40];
  for (const Instance& inst : ds.instances) {
    if (inst.features.size() != ds.dim) {
      throw std::invalid_argument("save_csv: instance dimension mismatch");
    }
    out << inst.id;
    for (double v : inst.features) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      out << buf;
    }
    out << ',' << inst.label << '\n';
  }
  if (!out) {
    throw std::runtime_error("save_csv: write failed for " + path.string());
  }
}

Dataset load_csv(const std::filesystem::path& path, const TableSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_csv: cannot open " + path.string());
  }
  auto fail = [&](std::size_t lineno, const std::string& why) -> std::runtime_error {
    return std::runtime_error("load_csv: " + path.string() + " line " +
                              std::to_string(lineno) + ": " + why);
  };
  std::string line;
  if (!std::getline(in, line)) throw fail(1, "missing header");
  std::vector<std::string> cols;
  {
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cols.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  if (cols.size() < 3 || cols.front() != "id" || cols.back() != "label") {
    throw fail(1, "expected header id,f0,...,label");
  }
  const std::size_t dim = cols.size() - 2;
  for (std::size_t d = 0; d < dim; ++d) {
    if (cols[d + 1] != "f" + std::to_string(d)) {
      throw fail(1, "expected feature column f" + std::to_string(d) + ", got " +
                 cols[d + 1]);
    }
  }
  if (schema.dim != 0 && schema.dim != dim) {
    throw fail(1, "header declares " + std::to_string(dim) +
               " features, schema expects " + std::to_string(schema.dim));
  }
  Dataset ds;
  ds.dim = dim;
  std::unordered_set<std::int64_t> seen;
  int max_label = -1;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Instance inst;
    inst.features.reserve(dim);
    const char* p = line.c_str();
    char* end = nullptr;
    inst.id = std::strtoll(p, &end, 10);
    if (end == p || *end != ',') throw fail(lineno, "bad id field");
    p = end + 1;
    for (std::size_t d = 0; d < dim; ++d) {
      const double v = std::strtod(p, &end);
      if (end == p || *end != ',') {
        throw fail(lineno, "bad value in column f" + std::to_string(d));
      }
      inst.features.push_back(v);
      p = end + 1;
    }
    inst.label = static_cast<int>(std::strtol(p, &end, 10));
    if (end == p || *end != '\0') throw fail(lineno, "bad label field");
    if (inst.label < 0) throw fail(lineno, "negative label");
    if (schema.num_classes != 0 &&
        static_cast<std::size_t>(inst.label) >= schema.num_classes) {
      throw fail(lineno, "label " + std::to_string(inst.label) +
                 " out of range for " + std::to_string(schema.num_classes) +
                 " classes");
    }
    if (!seen.insert(inst.id).second) {
      throw fail(lineno, "duplicate id " + std::to_string(inst.id));
    }
    max_label = std::max(max_label, inst.label);
    ds.instances.push_back(std::move(inst));
  }
  if (ds.instances.empty()) {
    throw std::runtime_error("load_csv: " + path.string() + ": no data rows");
  }
  ds.num_classes = schema.num_classes != 0 ? schema.num_classes
                                           : static_cast<std::size_t>(max_label + 1);
  return ds;
}

void to_json(nlohmann::json& j, const BlobSpec& spec) {
  j = nlohmann::json::object();
  j["dim"] = spec.dim;
  j["train_per_class"] = spec.train_per_class;
  j["test_per_class"] = spec.test_per_class;
  j["overlap"] = spec.overlap;
  auto& classes = j["classes"] = nlohmann::json::array();
  for (const ClassBlob& c : spec.classes) {
    classes.push_back({{"center", c.center}, {"cov_scale", c.cov_scale}});
  }
}

void from_json(const nlohmann::json& j, BlobSpec& spec) {
  spec = BlobSpec{};
  spec.dim = j.at("dim").get<std::size_t>();
  if (j.contains("train_per_class")) {
    spec.train_per_class = j.at("train_per_class").get<std::size_t>();
  }
  if (j.contains("test_per_class")) {
    spec.test_per_class = j.at("test_per_class").get<std::size_t>();
  }
  if (j.contains("overlap")) spec.overlap = j.at("overlap").get<double>();
  spec.classes.clear();
  for (const auto& c : j.at("classes")) {
    ClassBlob blob;
    blob.center = c.at("center").get<std::vector<double>>();
    blob.cov_scale = c.at("cov_scale").get<double>();
    spec.classes.push_back(std::move(blob));
  }
}

}  // namespace adakd::data
