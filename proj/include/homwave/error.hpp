#pragma once

#include <stdexcept>
#include <string>

namespace homwave {

/// Base of everything this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed config, inconsistent shapes, violated preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numerical method failed (non-convergence, instability, singular system).
/// Carries the achieved residual or the offending quantity when one exists.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, double achieved = 0.0)
      : Error(what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// Installs a sink for non-fatal diagnostics (h > eps/8, det <= 0, ...).
/// The default sink writes to stderr; pass an empty function to silence.
void set_warning_sink(void (*sink)(const std::string&));
void warn(const std::string& message);

}  // namespace homwave
