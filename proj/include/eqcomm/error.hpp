#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace eqcomm {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied malformed or out-of-range input.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A configured size/memory cap would be exceeded.
class ResourceCap : public Error {
 public:
  using Error::Error;
};

/// A Las Vegas construction ran out of attempts before certifying.
class RetryExhausted : public Error {
 public:
  RetryExhausted(const std::string& what, int attempts)
      : Error(what), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

/// A supplied protocol does not meet its promised error; carries the
/// first offending (x, y) in row-major order.
class PreconditionViolated : public Error {
 public:
  PreconditionViolated(const std::string& what, std::uint64_t x, std::uint64_t y)
      : Error(what), x_(x), y_(y) {}
  std::uint64_t x() const noexcept { return x_; }
  std::uint64_t y() const noexcept { return y_; }

 private:
  std::uint64_t x_;
  std::uint64_t y_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace eqcomm
