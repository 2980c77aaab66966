#pragma once

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sgscan/error.hpp"

namespace sgscan {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

/// Line reader over plain or gzip-compressed (".gz") files.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path) : path_(path.string()) {
    if (ends_with(path_, ".gz")) {
      gz_ = gzopen(path_.c_str(), "rb");
      if (gz_ == nullptr) throw Error("cannot open " + path_);
    } else {
      in_.open(path, std::ios::binary);
      if (!in_) throw Error("cannot open " + path_);
    }
  }
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;
  ~LineReader() {
    if (gz_ != nullptr) gzclose(gz_);
  }

  /// Reads the next line without its terminator. Returns false at end of input.
  bool next(std::string& line) {
    ++line_no_;
    if (gz_ == nullptr) {
      if (!std::getline(in_, line)) return false;
    } else {
      line.clear();
      char buf[4096];
      bool any = false;
      while (gzgets(gz_, buf, sizeof buf) != nullptr) {
        any = true;
        line.append(buf);
        if (!line.empty() && line.back() == '\n') break;
      }
      if (!any) return false;
      if (!line.empty() && line.back() == '\n') line.pop_back();
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  std::size_t line_number() const noexcept { return line_no_; }
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  gzFile gz_ = nullptr;
  std::size_t line_no_ = 0;
};

/// Writes a file by streaming into a temporary sibling and renaming it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    body(out);
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_text_file(const std::filesystem::path& path) {
  LineReader reader(path);
  std::string all, line;
  while (reader.next(line)) {
    all += line;
    all += '\n';
  }
  return all;
}

}  // namespace sgscan
