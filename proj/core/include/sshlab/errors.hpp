#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sshlab {

// Base of every error thrown by the library. kind() is a stable token the
// command line tool prints so callers can dispatch on the failure class.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  [[nodiscard]] virtual std::string_view kind() const noexcept { return "Error"; }
};

#define SSHLAB_DEFINE_ERROR(Name)                                              \
  class Name : public Error {                                                  \
   public:                                                                     \
    using Error::Error;                                                        \
    [[nodiscard]] std::string_view kind() const noexcept override { return #Name; } \
  };

SSHLAB_DEFINE_ERROR(InvalidArgument)
SSHLAB_DEFINE_ERROR(ShapeError)
SSHLAB_DEFINE_ERROR(RangeError)
SSHLAB_DEFINE_ERROR(StructuralError)
SSHLAB_DEFINE_ERROR(NumericalError)
SSHLAB_DEFINE_ERROR(PolicyError)
SSHLAB_DEFINE_ERROR(FormatError)
SSHLAB_DEFINE_ERROR(ChecksumError)
SSHLAB_DEFINE_ERROR(IoError)
SSHLAB_DEFINE_ERROR(PairingError)
SSHLAB_DEFINE_ERROR(DivergenceError)

#undef SSHLAB_DEFINE_ERROR

// h(k) became singular: the bulk gap closes on the integration grid.
class GapClosed : public Error {
 public:
  GapClosed(double k, double rcond);
  [[nodiscard]] std::string_view kind() const noexcept override { return "GapClosed"; }
  [[nodiscard]] double k() const noexcept { return k_; }
  [[nodiscard]] double rcond() const noexcept { return rcond_; }

 private:
  double k_;
  double rcond_;
};

}  // namespace sshlab
