#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace caci {

/// Raised when an argument violates an operation's precondition.
class InvalidParameter : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when fewer than K+1 workers compete, so no pivot price exists.
class InsufficientCompetition : public std::runtime_error
{
public:
  InsufficientCompetition(std::size_t available, std::size_t k)
    : std::runtime_error("insufficient competition: " + std::to_string(available) +
                         " workers available, need at least " + std::to_string(k + 1))
    , available_(available)
    , k_(k)
  {}

  std::size_t available() const noexcept { return available_; }
  std::size_t k() const noexcept { return k_; }

private:
  std::size_t available_;
  std::size_t k_;
};

/// Raised by CSV ingestion; carries the 1-based line number of the offending row.
class ParseError : public std::runtime_error
{
public:
  ParseError(std::size_t line, const std::string &what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what)
    , line_(line)
  {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Raised when an experiment description is inconsistent (e.g. an off-line-only
/// mechanism applied to an arrival stream). `path` names the offending field.
class ConfigError : public std::runtime_error
{
public:
  ConfigError(std::string path, const std::string &what)
    : std::runtime_error(path.empty() ? what : path + ": " + what)
    , path_(std::move(path))
  {}

  const std::string &path() const noexcept { return path_; }

private:
  std::string path_;
};

}  // namespace caci
