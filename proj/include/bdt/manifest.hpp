#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace bdt {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Record of one CLI invocation: enough to re-run it and to check its outputs.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> argv, std::uint64_t seed);

  nlohmann::ordered_json& config() { return config_; }
  void add_input(const std::filesystem::path& path);
  // `name` is relative to the output directory.
  void add_artifact(const std::filesystem::path& out_dir, const std::string& name);

  const std::vector<std::string>& artifacts() const { return artifacts_; }
  std::string to_json_text() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::uint64_t seed_;
  nlohmann::ordered_json config_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json inputs_ = nlohmann::ordered_json::array();
  nlohmann::ordered_json artifact_entries_ = nlohmann::ordered_json::array();
  std::vector<std::string> artifacts_;
};

}  // namespace bdt
