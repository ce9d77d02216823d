#pragma once

#include <stdexcept>
#include <string>

namespace mixtwin {

class FrameConversionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CompensationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FusionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RegistrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed status frame from the roadside control board.
class StatusFrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unknown wire-protocol frame.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mixtwin
