#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace focus {

// Root of every error thrown by the library. The CLI maps ConfigError to
// exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class ZeroNormRow : public Error {
 public:
  explicit ZeroNormRow(std::size_t index);
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class InsufficientShots : public Error {
 public:
  InsufficientShots(int class_id, std::size_t available, std::size_t requested);
  int class_id() const noexcept { return class_id_; }
  std::size_t available() const noexcept { return available_; }

 private:
  int class_id_;
  std::size_t available_;
};

class MissingGradient : public Error {
 public:
  explicit MissingGradient(const std::string& name);
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class LabelOutOfRange : public Error {
 public:
  LabelOutOfRange(int label, int num_classes);
};

class MissingClass : public Error {
 public:
  explicit MissingClass(int class_id);
  int class_id() const noexcept { return class_id_; }

 private:
  int class_id_;
};

class DegenerateAUC : public Error {
 public:
  explicit DegenerateAUC(int class_id);
  int class_id() const noexcept { return class_id_; }

 private:
  int class_id_;
};

class BadMagic : public Error {
 public:
  using Error::Error;
};

class TruncatedFile : public Error {
 public:
  TruncatedFile(const std::string& path, std::uint64_t offset);
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace focus
