#pragma once

#include <stdexcept>
#include <string>

namespace xrayqc {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// File or stream failure outside the data itself.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error("i/o error: " + msg) {}
};

// Malformed syntax; message carries the byte offset where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t byte_offset)
      : Error("parse error at byte offset " + std::to_string(byte_offset) + ": " + msg) {}
  explicit ParseError(const std::string& msg) : Error("parse error: " + msg) {}
};

class UnsupportedDepthError : public Error {
 public:
  explicit UnsupportedDepthError(const std::string& msg) : Error("unsupported depth: " + msg) {}
};

class SizeMismatchError : public Error {
 public:
  explicit SizeMismatchError(const std::string& msg) : Error("size mismatch: " + msg) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& msg) : Error("invalid argument: " + msg) {}
};

class DegenerateBoundsError : public Error {
 public:
  explicit DegenerateBoundsError(const std::string& msg) : Error("degenerate bounds: " + msg) {}
};

// Bad checkpoint / feature-file contents.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error("format error: " + msg) {}
};

// Bad configuration or usage; CLI maps this to exit status 2.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

}  // namespace xrayqc
