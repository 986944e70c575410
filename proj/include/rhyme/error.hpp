#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rhyme {

/// Non-finite or otherwise malformed argument to a pure function.
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Point outside the domain of a geometric map (e.g. on the ball boundary).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Input too close to zero for a normalization.
class DegenerateInput : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

class ShapeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, including empty protocol selections and
/// single-class training sets.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed binary file. Carries the byte offset at which parsing failed.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string &what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

private:
  std::uint64_t offset_;
};

/// Malformed manifest line. Line numbers are 1-based.
class ManifestError : public std::runtime_error {
public:
  ManifestError(const std::string &what, std::size_t line)
      : std::runtime_error("manifest line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// A forward-pass intermediate became non-finite.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(std::string stage)
      : std::runtime_error("non-finite value at stage '" + stage + "'"), stage_(std::move(stage)) {}

  const std::string &stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

} // namespace rhyme
