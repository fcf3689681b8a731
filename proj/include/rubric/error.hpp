#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rubric {

/// Base class of every error raised by the workbench.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that violates a documented precondition or type invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. Carries the 1-based line and the byte offset of
/// that line's first byte within the (decompressed) stream.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t byte_offset = 0)
      : Error(what + " (line " + std::to_string(line) + ", byte " +
              std::to_string(byte_offset) + ")"),
        line_(line),
        byte_offset_(byte_offset) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t line_;
  std::size_t byte_offset_;
};

/// A run file assigns one rank twice within a (tag, query) pair.
class DuplicateRankError : public ValidationError {
 public:
  DuplicateRankError(const std::string& what, std::size_t line)
      : ValidationError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A required JSON field is absent.
class MissingFieldError : public ValidationError {
 public:
  MissingFieldError(const std::string& field, const std::string& paragraph_id)
      : ValidationError("missing required field '" + field + "'" +
                        (paragraph_id.empty() ? std::string()
                                              : " in paragraph '" + paragraph_id + "'")),
        field_(field),
        paragraph_id_(paragraph_id) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& paragraph_id() const noexcept { return paragraph_id_; }

 private:
  std::string field_;
  std::string paragraph_id_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

/// Rendered prompt cannot fit into the token budget even with empty context.
class BudgetError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Backend unreachable, timed out, or kept failing after all retries.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int last_status = 0)
      : Error(what), last_status_(last_status) {}
  int last_status() const noexcept { return last_status_; }

 private:
  int last_status_;
};

/// Backend rejected the request with a non-retryable status.
class RequestError : public Error {
 public:
  RequestError(const std::string& what, int status) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

/// Test-bank generation produced no parseable JSON block.
class GenerationParseError : public Error {
 public:
  GenerationParseError(const std::string& what, std::string raw_completion)
      : Error(what), raw_completion_(std::move(raw_completion)) {}
  const std::string& raw_completion() const noexcept { return raw_completion_; }

 private:
  std::string raw_completion_;
};

class EmptyTestBankError : public Error {
 public:
  using Error::Error;
};

/// A correlation is undefined (constant input vector).
class UndefinedCorrelationError : public Error {
 public:
  using Error::Error;
};

}  // namespace rubric
