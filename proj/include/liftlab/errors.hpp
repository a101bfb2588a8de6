#ifndef LIFTLAB_ERRORS_HPP
#define LIFTLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace liftlab {

enum class ErrorCode {
  // configuration / input parsing
  config,
  // model validation
  rate_sign_mismatch,
  disconnected,
  self_loop,
  duplicate_edge,
  validation,
  step_too_large,
  window_too_small,
  not_adjacent,
  support_mismatch,
  insufficient_span,
  non_psd,
  // numerical aborts
  singular_solve,
  excessive_leak,
  negative_density,
  curl_obstruction,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

  // Process exit status used by the CLI: 2 config, 3 validation, 4 numerical.
  int exit_status() const {
    switch (code_) {
      case ErrorCode::config:
        return 2;
      case ErrorCode::singular_solve:
      case ErrorCode::excessive_leak:
      case ErrorCode::negative_density:
      case ErrorCode::curl_obstruction:
        return 4;
      default:
        return 3;
    }
  }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace liftlab

#endif  // LIFTLAB_ERRORS_HPP
