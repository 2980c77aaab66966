#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sgscan {

/// Base class for data errors: bad input files, malformed records, unknown hosts.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A syslog line that cannot be parsed. `offset` is the byte offset of the fault.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownNodeError : public Error {
 public:
  explicit UnknownNodeError(std::string hostname)
      : Error("unknown node '" + hostname + "'"), hostname_(std::move(hostname)) {}
  const std::string& hostname() const noexcept { return hostname_; }

 private:
  std::string hostname_;
};

/// A file loader rejected a record. `line` is 1-based.
class LoadError : public Error {
 public:
  LoadError(const std::string& source, std::size_t line, const std::string& why)
      : Error(source + ":" + std::to_string(line) + ": " + why), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A caller broke a documented precondition (unsorted input, bad parameter).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace sgscan
