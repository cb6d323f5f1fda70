#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clonesim {

// A caller broke a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Asked for the priority of a job with no remaining work.
class CompletedJobError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data (workload rows, distribution parameters) failed validation.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// An expectation that is undefined for the given parameters (e.g. Pareto with alpha*k <= 1).
class UndefinedExpectationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Oracle instance exceeds the exhaustive-search limits.
class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace clonesim
