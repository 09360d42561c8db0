#pragma once

#include "forcerl/types.hpp"

#include <cstdint>

namespace forcerl {

struct SensorReading {
  Wrench measured = Wrench::Zero();      // tool frame, noisy
  Wrench true_contact = Wrench::Zero();  // tool frame, noise free (diagnostics)
};

struct StepResult {
  Vec x;  // fitting-state vector after the step
  SensorReading reading;
};

/// Anything the trajectory optimizer can roll out: the contact environment in
/// production, analytic fixtures in tests.
class RolloutSystem {
 public:
  virtual ~RolloutSystem() = default;

  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int horizon() const = 0;

  /// Reset with a perturbed start drawn from `seed`.
  virtual Vec reset(std::uint64_t seed) = 0;
  /// Reset to the mean start state; internal noise streams get a fixed seed.
  virtual Vec reset_mean() = 0;

  virtual StepResult step(const Vec& u) = 0;

  virtual SensorReading last_reading() const { return {}; }
  virtual bool succeeded() const { return false; }
};

}  // namespace forcerl
