#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hetadmit {

enum class Errc {
  InvalidArgument,
  EmptyFleet,
  DuplicateName,
  NoDevices,
  InsufficientSamples,
  DegenerateSamples,
  DeviceInfeasible,
  NoFeasiblePlan,
  UnderflowRelease,
  InvalidTopology,
  InfeasibleProcessing,
  ZeroThroughput,
  ZeroConcurrency,
  ParseError,
  ConfigError,
  BindFailure,
};

std::string_view to_string(Errc code) noexcept;

/// Exception carrying a machine-checkable code. All library failures throw this.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace hetadmit
