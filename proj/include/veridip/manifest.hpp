#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace veridip {

inline constexpr const char* kToolVersion = "0.1.0";

/// Reproducibility record written next to every CLI run's outputs.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> input_hashes;  // path -> crc32 hex
  std::vector<std::string> output_paths;
  double wall_clock_seconds = 0;
  std::string tool_version = kToolVersion;
};

/// CRC32 of a file's bytes as 8 hex digits.
std::string file_crc32_hex(const std::string& path);

std::string manifest_to_json(const RunManifest& manifest);
void write_manifest(const RunManifest& manifest, const std::string& path);

}  // namespace veridip
