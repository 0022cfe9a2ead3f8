#include "ctxmotion/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iterator>
#include <new>
#include <nlohmann/json.hpp>

#include "ctxmotion/errors.hpp"

namespace ctxmotion {

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::bad_alloc();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &length) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("SHA-1 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    const unsigned char b = digest[i];
    out += hex[b >> 4];
    out += hex[b & 15];
  }
  return out;
}

std::string file_blob_sha1(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResourceError("cannot read " + path);
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return git_blob_sha1(content);
}

void RunManifest::add_input(const std::string& path) { inputs.emplace_back(path, file_blob_sha1(path)); }

std::string RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = config_json.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json::parse(config_json);
  auto& opts = j["options"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : options) opts[k] = v;
  auto& in = j["inputs"] = nlohmann::ordered_json::array();
  for (const auto& [p, h] : inputs) in.push_back({{"path", p}, {"blob_sha1", h}});
  return j.dump(2) + "\n";
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ResourceError("cannot write " + path);
  out << to_json();
}

}  // namespace ctxmotion
