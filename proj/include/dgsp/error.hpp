#pragma once

#include <stdexcept>
#include <string>

namespace dgsp {

// Every failure raised by the toolkit derives from Error so callers can map
// the category onto an exit status without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* category() const noexcept { return "error"; }
};

// Operand shapes do not conform for the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "dimension"; }
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "contract"; }
};

// Malformed canonical/prepared/checkpoint document.
class ParseError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "parse"; }
};

class AdapterError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "adapter"; }
};

// Model/checkpoint/run configuration is inconsistent with the data.
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "config"; }
};

class TrainingError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "training"; }
};

}  // namespace dgsp
