#ifndef GECTL_ERRORS_HPP_
#define GECTL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace gectl {

// Invalid physical parameter (non-positive mass, bad inertia, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the domain of a model function (negative altitude, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed runtime input (non-orthonormal rotation, non-unit quaternion).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Config file problem. Carries the offending key and line when known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::string key = {}, int line = 0)
      : std::runtime_error(Format(what, key, line)),
        key_(std::move(key)),
        line_(line) {}

  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  static std::string Format(const std::string& what, const std::string& key,
                            int line) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!key.empty()) out += "key '" + key + "': ";
    return out + what;
  }

  std::string key_;
  int line_;
};

// Flatness pipeline could not produce a reference.
class ReferenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical blow-up inside the simulator.
class IntegrationFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Controller was fed inconsistent or stale inputs.
class ControllerFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Least-squares identification failed (rank deficiency, no convergence).
class FitFailure : public std::runtime_error {
 public:
  FitFailure(const std::string& what, double residual_rms = -1.0)
      : std::runtime_error(what), residual_rms_(residual_rms) {}
  double residual_rms() const { return residual_rms_; }

 private:
  double residual_rms_;
};

}  // namespace gectl

#endif  // GECTL_ERRORS_HPP_
