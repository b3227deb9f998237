#pragma once

#include <stdexcept>
#include <string>

namespace qrnn {

// Every error carries a short category tag so the CLI can print one
// machine-parseable line: "error: <category>: <message>".
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}

  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

#define QRNN_DEFINE_ERROR(Name, tag)                                \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& message) : Error(tag, message) {} \
  };

QRNN_DEFINE_ERROR(ShapeError, "shape")
QRNN_DEFINE_ERROR(ConfigError, "config")
QRNN_DEFINE_ERROR(DomainError, "domain")
QRNN_DEFINE_ERROR(StateError, "state")
QRNN_DEFINE_ERROR(DataError, "data")
QRNN_DEFINE_ERROR(IoError, "io")
QRNN_DEFINE_ERROR(UsageError, "usage")
QRNN_DEFINE_ERROR(TrainingError, "training")

#undef QRNN_DEFINE_ERROR

// Parse failures report where they happened: a line number for text
// formats, a byte offset for binary ones.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, long long location)
      : Error("parse", message), location_(location) {}

  long long location() const noexcept { return location_; }

 private:
  long long location_;
};

}  // namespace qrnn
