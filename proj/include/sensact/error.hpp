#pragma once

#include <stdexcept>
#include <string>

namespace sensact {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix or tuple dimensions do not conform.
class DimensionError : public Error {
 public:
  DimensionError(const std::string& what, long expected, long actual)
      : Error(what + " (expected " + std::to_string(expected) + ", got " +
              std::to_string(actual) + ")"),
        expected_(expected),
        actual_(actual) {}

  long expected() const { return expected_; }
  long actual() const { return actual_; }

 private:
  long expected_;
  long actual_;
};

/// Malformed input: bad parameters, unreadable files, schema violations.
class InputError : public Error {
 public:
  using Error::Error;
};

/// B is not full column rank or C is not full row rank.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

/// M-hat is too badly conditioned to recover a gain from.
class GainRecoveryError : public Error {
 public:
  GainRecoveryError(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

/// An enumeration was requested beyond its configured size cap.
class CapExceededError : public Error {
 public:
  CapExceededError(const std::string& what, int cap, int requested)
      : Error(what + " (cap " + std::to_string(cap) + ", requested " +
              std::to_string(requested) + ")"),
        cap_(cap),
        requested_(requested) {}
  int cap() const { return cap_; }
  int requested() const { return requested_; }

 private:
  int cap_;
  int requested_;
};

}  // namespace sensact
