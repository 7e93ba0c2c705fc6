#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace e2edet {

/// Invalid arguments or violated invariants. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// File-system failures (missing file, unwritable output). Maps to CLI exit code 2.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Malformed input file; carries the byte offset where parsing stopped.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : ValidationError("parse error at byte offset " + std::to_string(offset) + ": " + what),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace e2edet
