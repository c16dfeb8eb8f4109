#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace coxbar {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data. Carries the file and 1-based line
/// number when the problem was found while parsing a file.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(what) {}
  InputError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_ = 0;
};

/// Overflow, non-finite objective, or an unreachable calibration target.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace coxbar
