#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace chatcad {

/// Append-only newline-delimited JSON file. Each append is a single write(2)
/// on an O_APPEND descriptor followed by fsync, so a crash leaves at most one
/// torn trailing line, which replay() skips.
class JsonlFile {
 public:
  explicit JsonlFile(std::filesystem::path path);
  ~JsonlFile();
  JsonlFile(const JsonlFile&) = delete;
  JsonlFile& operator=(const JsonlFile&) = delete;

  void append(const nlohmann::json& row);
  void append_raw(const std::string& line);

  /// Parsed rows in file order.
  [[nodiscard]] std::vector<nlohmann::json> replay() const;
  [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  bool fsync_ = true;
  mutable std::mutex mutex_;
};

}  // namespace chatcad
