#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace adakd::manifest {

/// FNV-1a 64-bit digest of a file's bytes.
std::uint64_t file_digest(const std::filesystem::path& path);

std::string digest_hex(std::uint64_t digest);

struct Entry {
  std::string path;  ///< as recorded: relative to the manifest's directory
  std::uint64_t digest = 0;
};

/// Provenance record written next to every command's outputs. Inputs
/// and outputs carry digests so reruns and downstream consumers can
/// detect tampering or drift.
struct Manifest {
  std::string tool_version;
  std::string command;
  nlohmann::json config;
  std::vector<Entry> inputs;
  std::vector<Entry> outputs;
};

void write(const Manifest& m, const std::filesystem::path& path);
Manifest load(const std::filesystem::path& path);

/// Recomputes every digest against the files on disk, resolving
/// relative entries against the manifest's own directory. Any mismatch
/// or missing file raises std::runtime_error naming the entry.
void verify(const Manifest& m, const std::filesystem::path& manifest_path);

/// Checks a file against the manifest of the run that produced it: if
/// manifest.json exists in the file's directory and lists the file as
/// an output, the digest must match. Files without a producer manifest
/// pass silently (hand-made inputs stay usable).
void verify_against_producer(const std::filesystem::path& file);

}  // namespace adakd::manifest
