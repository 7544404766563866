#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <unistd.h>
#include <vector>

#include "adakd/data.hpp"

using namespace adakd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int c = 0;
    path = fs::temp_directory_path() /
           ("adakd_data_" + std::to_string(::getpid()) + "_" + std::to_string(c++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("generate_blobs shapes, ids and labels") {
  const data::BlobSpec spec = data::default_benchmark_spec();
  const data::TrainTest tt = data::generate_blobs(spec, 1);
  CHECK(tt.train.size() == 600);
  CHECK(tt.test.size() == 1500);
  CHECK(tt.train.dim == 2);
  CHECK(tt.train.num_classes == 3);
  CHECK(tt.train.split == "train");
  CHECK(tt.test.split == "test");

  // ids run 0..n-1 per split, class-major
  for (std::size_t i = 0; i < tt.train.size(); ++i) {
    CHECK(tt.train.instances[i].id == static_cast<std::int64_t>(i));
    CHECK(tt.train.instances[i].label == static_cast<int>(i / 200));
    CHECK(tt.train.instances[i].features.size() == 2);
  }
}

TEST_CASE("generate_blobs is deterministic and split-independent") {
  const data::BlobSpec spec = data::default_benchmark_spec();
  const data::TrainTest a = data::generate_blobs(spec, 7);
  const data::TrainTest b = data::generate_blobs(spec, 7);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train.instances[i].features == b.train.instances[i].features);
  }
  const data::TrainTest c = data::generate_blobs(spec, 8);
  CHECK(a.train.instances[0].features != c.train.instances[0].features);

  // substream isolation: resizing the test split leaves train draws alone
  data::BlobSpec small = spec;
  small.test_per_class = 10;
  const data::TrainTest d = data::generate_blobs(small, 7);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train.instances[i].features == d.train.instances[i].features);
  }
  // and the surviving test draws are unchanged per class
  for (std::size_t cls = 0; cls < 3; ++cls) {
    for (std::size_t j = 0; j < 10; ++j) {
      CHECK(a.test.instances[cls * 500 + j].features ==
            d.test.instances[cls * 10 + j].features);
    }
  }
}

TEST_CASE("class means land near the centers") {
  data::BlobSpec spec = data::default_benchmark_spec();
  spec.train_per_class = 4000;
  const data::TrainTest tt = data::generate_blobs(spec, 3);
  for (std::size_t cls = 0; cls < spec.classes.size(); ++cls) {
    double mx = 0.0, my = 0.0;
    for (std::size_t j = 0; j < spec.train_per_class; ++j) {
      const data::Instance& inst = tt.train.instances[cls * spec.train_per_class + j];
      mx += inst.features[0];
      my += inst.features[1];
    }
    mx /= static_cast<double>(spec.train_per_class);
    my /= static_cast<double>(spec.train_per_class);
    // mean of n draws has stddev cov_scale/sqrt(n) ~ 0.017
    CHECK(std::fabs(mx - spec.classes[cls].center[0]) < 0.1);
    CHECK(std::fabs(my - spec.classes[cls].center[1]) < 0.1);
  }
}

TEST_CASE("overlap squeezes centers toward the origin") {
  data::BlobSpec spec = data::default_benchmark_spec();
  spec.overlap = 2.0;
  spec.train_per_class = 4000;
  const data::TrainTest tt = data::generate_blobs(spec, 3);
  double mx = 0.0;
  for (std::size_t j = 0; j < spec.train_per_class; ++j) {
    mx += tt.train.instances[j].features[0];
  }
  mx /= static_cast<double>(spec.train_per_class);
  CHECK(std::fabs(mx - spec.classes[0].center[0] / 2.0) < 0.1);
}

TEST_CASE("generate_blobs precondition failures") {
  data::BlobSpec spec = data::default_benchmark_spec();
  spec.classes[0].center = {1.0};  // wrong dim
  CHECK_THROWS_AS(data::generate_blobs(spec, 1), std::invalid_argument);
  data::BlobSpec empty;
  empty.classes.clear();
  CHECK_THROWS_AS(data::generate_blobs(empty, 1), std::invalid_argument);
  data::BlobSpec none = data::default_benchmark_spec();
  none.train_per_class = 0;
  CHECK_THROWS_AS(data::generate_blobs(none, 1), std::invalid_argument);
}

TEST_CASE("csv round trip is value exact and byte stable") {
  TempDir tmp;
  const data::TrainTest tt = data::generate_blobs(data::default_benchmark_spec(), 11);
  const fs::path path = tmp.path / "train.csv";
  data::save_csv(tt.train, path);

  const data::Dataset back = data::load_csv(path);
  REQUIRE(back.size() == tt.train.size());
  CHECK(back.dim == tt.train.dim);
  CHECK(back.num_classes == tt.train.num_classes);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back.instances[i].id == tt.train.instances[i].id);
    CHECK(back.instances[i].label == tt.train.instances[i].label);
    // 17 significant digits round-trip doubles exactly
    CHECK(back.instances[i].features == tt.train.instances[i].features);
  }

  // saving the loaded dataset reproduces the file byte for byte
  const fs::path path2 = tmp.path / "again.csv";
  data::save_csv(back, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), {});
  const std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);

  // header shape
  CHECK(b1.rfind("id,f0,f1,label\n", 0) == 0);
}

TEST_CASE("load_csv schema enforcement") {
  TempDir tmp;
  const fs::path p = tmp.path / "t.csv";

  write_file(p, "id,f0,f1,label\n0,1.0,2.0,0\n1,0.5,0.25,1\n");
  const data::Dataset ds = data::load_csv(p);
  CHECK(ds.dim == 2);
  CHECK(ds.num_classes == 2);  // inferred max(label)+1

  const data::Dataset wider = data::load_csv(p, {.dim = 0, .num_classes = 5});
  CHECK(wider.num_classes == 5);

  CHECK_THROWS_WITH_AS(static_cast<void>(data::load_csv(p, {.dim = 3})),
                       doctest::Contains("schema expects 3"), std::runtime_error);
  CHECK_THROWS_AS(static_cast<void>(data::load_csv(p, {.dim = 0, .num_classes = 1})),
                  std::runtime_error);  // label 1 out of range
}

TEST_CASE("load_csv malformed input diagnostics") {
  TempDir tmp;
  const fs::path p = tmp.path / "bad.csv";

  write_file(p, "id,f0,label\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(data::load_csv(p)),
                       doctest::Contains("no data rows"), std::runtime_error);

  write_file(p, "id,x0,label\n0,1.0,0\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(data::load_csv(p)),
                       doctest::Contains("x0"), std::runtime_error);

  write_file(p, "id,f0,label\n0,1.0,0\n1,oops,1\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(data::load_csv(p)),
                       doctest::Contains("line 3"), std::runtime_error);

  write_file(p, "id,f0,label\n0,1.0,0\n0,2.0,1\n");
  CHECK_THROWS_WITH_AS(static_cast<void>(data::load_csv(p)),
                       doctest::Contains("duplicate"), std::runtime_error);

  write_file(p, "id,f0,label\n0,1.0\n");
  CHECK_THROWS_AS(static_cast<void>(data::load_csv(p)), std::runtime_error);

  write_file(p, "id,f0,label\n0,1.0,-1\n");
  CHECK_THROWS_AS(static_cast<void>(data::load_csv(p)), std::runtime_error);

  CHECK_THROWS_AS(static_cast<void>(data::load_csv(tmp.path / "absent.csv")),
                  std::runtime_error);
}

TEST_CASE("blob spec json round trip") {
  const data::BlobSpec spec = data::default_benchmark_spec();
  nlohmann::json j;
  data::to_json(j, spec);
  data::BlobSpec back;
  data::from_json(j, back);
  CHECK(back.dim == spec.dim);
  CHECK(back.train_per_class == spec.train_per_class);
  CHECK(back.test_per_class == spec.test_per_class);
  CHECK(back.overlap == spec.overlap);
  REQUIRE(back.classes.size() == spec.classes.size());
  for (std::size_t i = 0; i < spec.classes.size(); ++i) {
    CHECK(back.classes[i].center == spec.classes[i].center);
    CHECK(back.classes[i].cov_scale == spec.classes[i].cov_scale);
  }
  // generated data from the round-tripped spec is identical
  const data::TrainTest a = data::generate_blobs(spec, 5);
  const data::TrainTest b = data::generate_blobs(back, 5);
  CHECK(a.train.instances[17].features == b.train.instances[17].features);
}
