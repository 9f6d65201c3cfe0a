#pragma once

#include <span>
#include <string>
#include <vector>

#include "fsho/env.hpp"

namespace fsho {

/// A decision maker for both turns of a timestep. Implementations may keep
/// state between the high and the low call of the same timestep.
class Policy {
 public:
  virtual ~Policy() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  virtual int act_high(const Env& env, const HighObs& obs) = 0;
  virtual std::vector<int> act_low(const Env& env, std::span<const LowObs> obs) = 0;
};

/// One full timestep: CC turn, then EC turn.
StepOutcome run_timestep(Env& env, Policy& policy);

}  // namespace fsho
