#include "adakd/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace adakd::manifest {

std::uint64_t file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("file_digest: cannot open " + path.string());
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string digest_hex(std::uint64_t digest) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(digest));
  return buf;
}

namespace {

std::uint64_t parse_hex(const std::string& text) {
  if (text.size() != 16) {
    throw std::runtime_error("manifest: bad digest \"" + text + "\"");
  }
  std::uint64_t v = 0;
  for (char c : text) {
    v <<= 4;
    if (c >= '0' && c <= '9') {
      v |= static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      v |= static_cast<std::uint64_t>(c - 'a' + 10);
    } else {
      throw std::runtime_error("manifest: bad digest \"" + text + "\"");
    }
  }
  return v;
}

nlohmann::json entries_to_json(const std::vector<Entry>& entries) {
  nlohmann::json j = nlohmann::json::array();
  for (const Entry& e : entries) {
    j.push_back({{"path", e.path}, {"digest", digest_hex(e.digest)}});
  }
  return j;
}

std::vector<Entry> entries_from_json(const nlohmann::json& j) {
  std::vector<Entry> entries;
  for (const auto& je : j) {
    Entry e;
    e.path = je.at("path").get<std::string>();
    e.digest = parse_hex(je.at("digest").get<std::string>());
    entries.push_back(std::move(e));
  }
  return entries;
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& recorded) {
  const std::filesystem::path p(recorded);
  return p.is_absolute() ? p : base / p;
}

}  // namespace

void write(const Manifest& m, const std::filesystem::path& path) {
  nlohmann::json j;
  j["tool_version"] = m.tool_version;
  j["command"] = m.command;
  j["config"] = m.config;
  j["inputs"] = entries_to_json(m.inputs);
  j["outputs"] = entries_to_json(m.outputs);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("manifest: cannot open " + path.string());
  }
  out << j.dump(2) << '\n';
  if (!out) {
    throw std::runtime_error("manifest: write failed for " + path.string());
  }
}

Manifest load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("manifest: cannot open " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("manifest: " + path.string() + ": " + e.what());
  }
  Manifest m;
  m.tool_version = j.at("tool_version").get<std::string>();
  m.command = j.at("command").get<std::string>();
  m.config = j.at("config");
  m.inputs = entries_from_json(j.at("inputs"));
  m.outputs = entries_from_json(j.at("outputs"));
  return m;
}

void verify(const Manifest& m, const std::filesystem::path& manifest_path) {
  const std::filesystem::path base = manifest_path.parent_path();
  auto check = [&](const std::vector<Entry>& entries, const char* kind) {
    for (const Entry& e : entries) {
      const std::filesystem::path p = resolve(base, e.path);
      const std::uint64_t got = file_digest(p);
      if (got != e.digest) {
        throw std::runtime_error("manifest: " + std::string(kind) + " " +
                                 e.path + " digest mismatch (expected " +
                                 digest_hex(e.digest) + ", got " +
                                 digest_hex(got) + ")");
      }
    }
  };
  check(m.inputs, "input");
  check(m.outputs, "output");
}

void verify_against_producer(const std::filesystem::path& file) {
  const std::filesystem::path dir =
      file.has_parent_path() ? file.parent_path() : std::filesystem::path(".");
  const std::filesystem::path mpath = dir / "manifest.json";
  if (!std::filesystem::exists(mpath)) return;
  const Manifest m = load(mpath);
  const std::string name = file.filename().string();
  for (const Entry& e : m.outputs) {
    if (std::filesystem::path(e.path).filename().string() != name) continue;
    const std::uint64_t got = file_digest(file);
    if (got != e.digest) {
      throw std::runtime_error(
          "manifest: " + file.string() +
          " does not match the digest recorded by its producing run (" +
          m.command + "); file may have been modified");
    }
    return;
  }
}

}  // namespace adakd::manifest
