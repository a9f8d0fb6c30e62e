#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace kgsq {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A malformed line in a triple or entity-type file. Line numbers are 1-based.
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

/// A name that does not resolve against a vocabulary.
class ResolutionError : public Error {
public:
  ResolutionError(const std::string& kind, const std::string& name, const std::string& context)
      : Error("unknown " + kind + " '" + name + "'" + (context.empty() ? "" : " (" + context + ")")),
        name_(name) {}

  const std::string& name() const { return name_; }

private:
  std::string name_;
};

class UnknownEntityError : public ResolutionError {
public:
  explicit UnknownEntityError(const std::string& name, const std::string& context = {})
      : ResolutionError("entity", name, context) {}
};

class UnknownRelationError : public ResolutionError {
public:
  explicit UnknownRelationError(const std::string& name, const std::string& context = {})
      : ResolutionError("relation", name, context) {}
};

/// Model file validation failure: which section failed and at what byte offset.
class FormatError : public Error {
public:
  FormatError(std::string section, std::uint64_t offset, const std::string& what)
      : Error(section + " at offset " + std::to_string(offset) + ": " + what),
        section_(std::move(section)),
        offset_(offset) {}

  const std::string& section() const { return section_; }
  std::uint64_t offset() const { return offset_; }

private:
  std::string section_;
  std::uint64_t offset_;
};

}  // namespace kgsq
