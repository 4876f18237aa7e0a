#include "bdt/manifest.hpp"

#include <fstream>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "bdt/errors.hpp"
#include "bdt/version.hpp"

namespace bdt {

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw std::runtime_error("sha256: OpenSSL digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for hashing");
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

RunManifest::RunManifest(std::string command, std::vector<std::string> argv, std::uint64_t seed)
    : command_(std::move(command)), argv_(std::move(argv)), seed_(seed) {}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs_.push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
}

void RunManifest::add_artifact(const std::filesystem::path& out_dir, const std::string& name) {
  artifacts_.push_back(name);
  artifact_entries_.push_back({{"path", name}, {"sha256", sha256_file(out_dir / name)}});
}

std::string RunManifest::to_json_text() const {
  nlohmann::ordered_json doc;
  doc["tool"] = "bdt";
  doc["version"] = kVersion;
  doc["command"] = command_;
  doc["argv"] = argv_;
  doc["seed"] = seed_;
  doc["config"] = config_;
  doc["inputs"] = inputs_;
  doc["artifacts"] = artifact_entries_;
  return doc.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << to_json_text();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace bdt
