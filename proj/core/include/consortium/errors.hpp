#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace consortium {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration (models file, flags, selection filters).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data. `line()` is 1-based, or 0 when not tied to a line.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A generation request failed. Retriable failures may be retried by the caller.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool retriable, int status = 0)
      : Error(what), retriable_(retriable), status_(status) {}
  bool retriable() const noexcept { return retriable_; }
  /// HTTP status when the failure came from a response, 0 for transport failures.
  int status() const noexcept { return status_; }

 private:
  bool retriable_;
  int status_;
};

/// Sampling stopped before the run was complete. The cache on disk is resumable.
class SamplingAborted : public Error {
 public:
  SamplingAborted(const std::string& what, std::string model_id, std::string question_id,
                  int sample_index)
      : Error(what),
        model_id_(std::move(model_id)),
        question_id_(std::move(question_id)),
        sample_index_(sample_index) {}
  const std::string& model_id() const noexcept { return model_id_; }
  const std::string& question_id() const noexcept { return question_id_; }
  int sample_index() const noexcept { return sample_index_; }

 private:
  std::string model_id_;
  std::string question_id_;
  int sample_index_;
};

/// A cache directory exists but was written for different inputs.
class CacheMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace consortium
