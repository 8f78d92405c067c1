#pragma once

#include <stdexcept>
#include <string>

namespace pulse {

// Base for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PULSE_DEFINE_ERROR(Name)                  \
  class Name : public Error {                     \
   public:                                        \
    explicit Name(const std::string& what_arg)    \
        : Error(#Name ": " + what_arg) {}         \
  }

PULSE_DEFINE_ERROR(NonFiniteInput);
PULSE_DEFINE_ERROR(DegenerateSignal);
PULSE_DEFINE_ERROR(ConstantSignal);
PULSE_DEFINE_ERROR(LengthMismatch);
PULSE_DEFINE_ERROR(ShapeMismatch);
PULSE_DEFINE_ERROR(NonFiniteValue);
PULSE_DEFINE_ERROR(InvalidSpec);
PULSE_DEFINE_ERROR(EpochOutOfRange);
PULSE_DEFINE_ERROR(CorruptFile);
PULSE_DEFINE_ERROR(VersionMismatch);
PULSE_DEFINE_ERROR(ConfigError);
PULSE_DEFINE_ERROR(NonFiniteGradient);
PULSE_DEFINE_ERROR(TrainingDiverged);
PULSE_DEFINE_ERROR(IoError);

#undef PULSE_DEFINE_ERROR

}  // namespace pulse
