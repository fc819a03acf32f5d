#include "chatcad/jsonl.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>

#include "chatcad/error.hpp"

namespace chatcad {

JsonlFile::JsonlFile(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  // Drop a torn final line so the next append starts on a fresh line.
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!data.empty() && data.back() != '\n') {
      const auto keep = data.rfind('\n');
      std::filesystem::resize_file(path_, keep == std::string::npos ? 0 : keep + 1);
    }
  }
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(ErrorCode::IoError, "cannot open " + path_.string() + ": " + std::strerror(errno));
}

JsonlFile::~JsonlFile() {
  if (fd_ >= 0) ::close(fd_);
}

void JsonlFile::append(const nlohmann::json& row) { append_raw(row.dump()); }

void JsonlFile::append_raw(const std::string& line) {
  std::string buf = line;
  buf.push_back('\n');
  std::lock_guard lock(mutex_);
  std::size_t written = 0;
  while (written < buf.size()) {
    const auto n = ::write(fd_, buf.data() + written, buf.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::IoError, "write to " + path_.string() + " failed: " + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  if (fsync_) ::fsync(fd_);
}

std::vector<nlohmann::json> JsonlFile::replay() const {
  std::lock_guard lock(mutex_);
  std::vector<nlohmann::json> rows;
  std::ifstream in(path_, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (in.eof()) break;  // no trailing newline: torn write
    if (line.empty()) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error&) {
      // corrupt line from an interrupted write
    }
  }
  return rows;
}

}  // namespace chatcad
