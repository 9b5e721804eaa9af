#pragma once

#include <stdexcept>
#include <string>

namespace lungbench {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not conform for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A precondition on an argument value was violated (bad range, bad
// configuration, non-scalar loss, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

enum class ModelFileErrorKind {
  kVersion,
  kTruncated,
  kUnknownParameter,
  kMissingParameter,
  kShapeMismatch,
  kIo,
};

class ModelFileError : public Error {
 public:
  ModelFileError(ModelFileErrorKind kind, const std::string& what)
      : Error(what), kind_(kind) {}
  ModelFileErrorKind kind() const { return kind_; }

 private:
  ModelFileErrorKind kind_;
};

enum class ImageErrorKind {
  kBadMagic,
  kBadMaxval,
  kSizeMismatch,
  kIo,
};

class ImageError : public Error {
 public:
  ImageError(ImageErrorKind kind, const std::string& what)
      : Error(what), kind_(kind) {}
  ImageErrorKind kind() const { return kind_; }

 private:
  ImageErrorKind kind_;
};

enum class DataErrorKind {
  kUnknownLabel,
  kUnknownSplit,
  kDuplicatePath,
  kMissingFile,
  kMalformed,
  kEmpty,
  kIo,
};

// Problems with dataset manifests, prediction files and sample sets.
class DataError : public Error {
 public:
  DataError(DataErrorKind kind, const std::string& what)
      : Error(what), kind_(kind) {}
  DataErrorKind kind() const { return kind_; }

 private:
  DataErrorKind kind_;
};

}  // namespace lungbench
