#pragma once

#include <stdexcept>
#include <string>

namespace vdnet {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes that cannot be combined.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Convolution, pooling, anchor or smoothing geometry that does not fit.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Argument outside its legal domain (labels, variances, thresholds).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the differentiation graph.
class GraphError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace vdnet
