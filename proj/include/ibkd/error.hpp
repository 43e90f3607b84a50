#pragma once

#include <stdexcept>
#include <string>

namespace ibkd {

// Every failure the library raises derives from Error; the kind lets the CLI
// map failures onto exit codes without string matching.
enum class ErrorKind {
  Shape,       // operand shapes do not line up
  Input,       // non-finite or otherwise invalid numeric input
  Evaluation,  // a callback produced a non-finite value
  Config,      // invalid hyperparameter or option
  Pairing,     // paired inputs disagree in length
  Degenerate,  // too few samples for the estimator
  State,       // stale cache or mismatched optimizer state
  Format,      // malformed file
  Data,        // missing or inconsistent dataset content
  Training,    // training aborted (non-finite loss)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace ibkd
