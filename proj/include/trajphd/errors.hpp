#pragma once

#include <stdexcept>
#include <string>

namespace trajphd {

/// Base of every error the library throws. `code()` is a stable identifier
/// used by the CLI when it prints machine-readable failures.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct InvalidComponent : Error {
  explicit InvalidComponent(const std::string& what) : Error("invalid_component", what) {}
};

struct SingularInnovation : Error {
  explicit SingularInnovation(const std::string& what) : Error("singular_innovation", what) {}
};

struct DegenerateMixture : Error {
  explicit DegenerateMixture(const std::string& what) : Error("degenerate_mixture", what) {}
};

struct ImpossibleMeasurement : Error {
  explicit ImpossibleMeasurement(const std::string& what)
      : Error("impossible_measurement", what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

struct MetricIntractable : Error {
  explicit MetricIntractable(const std::string& what) : Error("metric_intractable", what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error("io_error", what) {}
};

}  // namespace trajphd
