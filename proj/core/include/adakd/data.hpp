#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace adakd::data {

struct Instance {
  std::int64_t id = 0;
  std::vector<double> features;
  int label = 0;
};

struct Dataset {
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::string split;  ///< "train", "test", or "" for loaded tables
  std::vector<Instance> instances;

  std::size_t size() const { return instances.size(); }
};

/// One Gaussian class cluster: isotropic with stddev cov_scale.
struct ClassBlob {
  std::vector<double> center;
  double cov_scale = 1.0;
};

/// Mixture-of-Gaussians classification problem. overlap squeezes the
/// class centers toward the origin: each center is divided by
/// max(overlap, 1e-9), so larger values make the classes harder to
/// separate.
struct BlobSpec {
  std::size_t dim = 2;
  std::vector<ClassBlob> classes;
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 500;
  double overlap = 1.0;
};

/// The desk-scale benchmark: three anisotropically scaled clusters in
/// the plane, two of which nearly touch.
BlobSpec default_benchmark_spec();

struct TrainTest {
  Dataset train;
  Dataset test;
};

/// Draws both splits. Each (split, class) pair owns an independent RNG
/// substream, so resizing one class never shifts the draws of another.
/// Instances are id'd 0..n-1 per split in class-major order.
TrainTest generate_blobs(const BlobSpec& spec, std::uint64_t seed);

/// CSV with header "id,f0,...,f{d-1},label"; features at 17 significant
/// digits so values survive a round trip.
void save_csv(const Dataset& ds, const std::filesystem::path& path);

/// Expected shape of a loaded table. dim 0 means "take whatever the
/// header declares"; num_classes 0 means "infer as max(label)+1".
struct TableSchema {
  std::size_t dim = 0;
  std::size_t num_classes = 0;
};

/// Parses the schema written by save_csv. Malformed rows, duplicate
/// ids, header/schema mismatches, out-of-range labels and files with
/// no data rows all raise std::runtime_error naming the offending
/// line or column.
Dataset load_csv(const std::filesystem::path& path, const TableSchema& schema = {});

void to_json(nlohmann::json& j, const BlobSpec& spec);
void from_json(const nlohmann::json& j, BlobSpec& spec);

}  // namespace adakd::data
