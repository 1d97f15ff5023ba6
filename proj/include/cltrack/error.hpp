#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cltrack {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateBox : public Error {
 public:
  explicit DegenerateBox(const std::string& what = "degenerate box") : Error(what) {}
};

class NotARectangle : public Error {
 public:
  explicit NotARectangle(const std::string& what = "corners do not form a rectangle",
                         std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class TapeCorruption : public Error {
 public:
  using Error::Error;
};

class NotInitialized : public Error {
 public:
  explicit NotInitialized(const std::string& what = "tracker session is not initialized") : Error(what) {}
};

class EmptySequence : public Error {
 public:
  explicit EmptySequence(const std::string& what = "empty sequence") : Error(what) {}
};

class MissingAnnotation : public Error {
 public:
  using Error::Error;
};

class NoValidFrames : public Error {
 public:
  explicit NoValidFrames(const std::string& what = "no tracked frames to average") : Error(what) {}
};

class InvalidInterval : public Error {
 public:
  using Error::Error;
};

class DatasetMismatch : public Error {
 public:
  using Error::Error;
};

/// Raised when a computation produces non-finite values.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace cltrack
