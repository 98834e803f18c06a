#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gpb {

// Action coordinates. Continuous settings live in the box [-v/2, v/2]^d.
using ActionVector = Eigen::VectorXd;

// Discrete step count, t >= 1, equispaced steps.
using TimeIndex = std::int64_t;

struct ActionTimePair {
  ActionVector action;
  TimeIndex time = 1;
};

// Observation noise e_t ~ N(0, variance), independent across steps.
struct NoiseModel {
  double variance = 1.0;
};

struct RewardSample {
  double value = 0.0;
  TimeIndex step = 1;
  ActionVector action;
};

// Mismatched action dimensions or malformed inputs.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Factorization could not be completed even after jitter escalation,
// or a posterior variance came out more negative than roundoff allows.
struct DegeneracyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exploration schedule evaluated outside its domain (e.g. a*log(b*t) with b*t <= 1).
struct ScheduleDomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Invalid experiment configuration or unreadable/malformed input data.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void check_noise(const NoiseModel& noise) {
  if (!(noise.variance > 0.0) || !std::isfinite(noise.variance)) {
    throw std::invalid_argument("noise variance must be positive and finite, got " +
                                std::to_string(noise.variance));
  }
}

}  // namespace gpb
