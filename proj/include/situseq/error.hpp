#pragma once

#include <stdexcept>
#include <string>

namespace situseq {

// Every failure carries a category so the CLI can map it to an exit code and a
// machine-parsable prefix.
enum class ErrorKind { parse, schema, validation, initialization, bookkeeping, model, vocabulary, usage, invariant };

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::schema: return "schema";
    case ErrorKind::validation: return "validation";
    case ErrorKind::initialization: return "initialization";
    case ErrorKind::bookkeeping: return "bookkeeping";
    case ErrorKind::model: return "model";
    case ErrorKind::vocabulary: return "vocabulary";
    case ErrorKind::usage: return "usage";
    case ErrorKind::invariant: return "invariant";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace situseq
