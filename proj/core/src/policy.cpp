#include "fsho/policy.hpp"

namespace fsho {

StepOutcome run_timestep(Env& env, Policy& policy) {
  const int a_cc = policy.act_high(env, env.high_obs());
  const auto low = env.step_high(a_cc);
  const auto actions = policy.act_low(env, low);
  return env.step_low(actions);
}

}  // namespace fsho
