#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace todflow {

/// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyCorpus : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what), line_(line) {}
  /// 1-based line of the offending record, 0 when not line-oriented.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, std::string field)
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class VocabularyError : public Error {
 public:
  VocabularyError(const std::string& what, std::string label = {})
      : Error(what), label_(std::move(label)) {}
  const std::string& label() const { return label_; }

 private:
  std::string label_;
};

class GraphFormatError : public Error {
 public:
  GraphFormatError(const std::string& what, std::string pointer)
      : Error(what + " at " + (pointer.empty() ? std::string("/") : pointer)),
        pointer_(std::move(pointer)) {}
  /// RFC 6901 JSON pointer to the offending value.
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

class EditError : public Error {
 public:
  using Error::Error;
};

class NoCandidates : public Error {
 public:
  using Error::Error;
};

class MissingCandidates : public Error {
 public:
  using Error::Error;
};

class ProviderSpawnError : public Error {
 public:
  using Error::Error;
};

class ProviderTimeout : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class SynthError : public Error {
 public:
  using Error::Error;
};

class NoTurns : public Error {
 public:
  using Error::Error;
};

class BenchmarkError : public Error {
 public:
  using Error::Error;
};

/// Bad flags or unreadable inputs; the CLI maps this to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

class FileNotFound : public UsageError {
 public:
  using UsageError::UsageError;
};

}  // namespace todflow
