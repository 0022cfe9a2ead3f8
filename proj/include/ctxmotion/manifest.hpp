#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ctxmotion {

/// SHA-1 of "blob <size>\0<content>", as `git hash-object` prints it.
std::string git_blob_sha1(std::string_view content);
/// Throws ResourceError when the file cannot be read.
std::string file_blob_sha1(const std::string& path);

/// Everything needed to rerun a command: seed, model config, option values
/// and content hashes of every input file.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::string config_json;  // ModelConfig::to_json(), or empty
  std::vector<std::pair<std::string, std::string>> options;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, blob hash

  void add_input(const std::string& path);
  std::string to_json() const;
  void write(const std::string& path) const;
};

}  // namespace ctxmotion
