#include "veridip/manifest.hpp"

#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "veridip/errors.hpp"

namespace veridip {

std::string file_crc32_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(buf.data()),
                  static_cast<uInt>(in.gcount()));
  }
  char hex[16];
  std::snprintf(hex, sizeof(hex), "%08lx", static_cast<unsigned long>(crc));
  return hex;
}

std::string manifest_to_json(const RunManifest& manifest) {
  nlohmann::json j;
  j["command"] = manifest.command;
  j["config"] = manifest.config;
  j["seeds"] = manifest.seeds;
  j["input_hashes"] = manifest.input_hashes;
  j["output_paths"] = manifest.output_paths;
  j["wall_clock_seconds"] = manifest.wall_clock_seconds;
  j["tool_version"] = manifest.tool_version;
  return j.dump(2);
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest '" + path + "'");
  out << manifest_to_json(manifest) << '\n';
}

}  // namespace veridip
