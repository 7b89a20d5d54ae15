#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lmkbqa {

// Base of every error raised by the library. Callers that only need a
// message catch this; tests match the concrete type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedLine : public Error {
 public:
  explicit MalformedLine(std::size_t line)
      : Error("malformed line " + std::to_string(line)), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class MalformedRecord : public Error {
 public:
  MalformedRecord(std::size_t line, const std::string& why)
      : Error("malformed record at line " + std::to_string(line) + ": " + why), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class NoTopicEntity : public Error {
 public:
  NoTopicEntity() : Error("no alias of any entity matches the question") {}
};

class EmptyQuestion : public Error {
 public:
  EmptyQuestion() : Error("question is blank") {}
};

class MissingEmbedding : public Error {
 public:
  explicit MissingEmbedding(const std::string& key)
      : Error("no stored embedding for key \"" + key + "\""), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(long expected, long actual)
      : Error("embedding dim " + std::to_string(actual) + " != expected " + std::to_string(expected)) {}
};

class BadMagic : public Error {
 public:
  explicit BadMagic(const std::string& path) : Error("bad magic bytes in " + path) {}
};

class UnsupportedVersion : public Error {
 public:
  explicit UnsupportedVersion(unsigned version)
      : Error("unsupported file version " + std::to_string(version)) {}
};

class TruncatedFile : public Error {
 public:
  explicit TruncatedFile(const std::string& path) : Error("truncated file " + path) {}
};

class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& what) : Error("shape mismatch: " + what) {}
};

class ZeroVector : public Error {
 public:
  ZeroVector() : Error("cosine of a zero vector is undefined") {}
};

class EmptyDataset : public Error {
 public:
  EmptyDataset() : Error("dataset is empty") {}
};

class EmptyList : public Error {
 public:
  EmptyList() : Error("cannot average an empty list") {}
};

}  // namespace lmkbqa
