#pragma once

#include <stdexcept>
#include <string>

namespace causalols {

// Error classes map onto CLI exit codes and HTTP status codes.
enum class ErrorKind {
  config,     // malformed spec, bad flags, unknown column
  data,       // unreadable file, parse failures, non-finite values
  rank,       // rank-deficient design
  verify,     // fast path disagrees with the reference path
  not_found,  // missing file or session
  conflict,   // grouping key absent from compression keys
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

// 0 ok, 2 config, 3 data, 4 rank, 5 verify mismatch.
int exit_code(ErrorKind kind) noexcept;

}  // namespace causalols
