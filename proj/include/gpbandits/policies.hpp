#pragma once

#include "gpbandits/gp.hpp"
#include "gpbandits/kernels.hpp"
#include "gpbandits/types.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace gpb {

// ---------------------------------------------------------------------------
// Exploration schedules beta_t
// ---------------------------------------------------------------------------

// beta_t = 2 log(|A| t^2 pi^2 / (6 delta)) for a finite action set.
struct FiniteArmBeta {
  int arm_count = 1;
  double delta = 0.1;
};

// beta_t = 2 log(pi^2 t^2 / (3 delta))
//        + 2 d log(c2 v d t^2 sqrt(log(c1 d pi^2 t^2 / (3 delta))))
// for a compact box [-v/2, v/2]^d.
struct ContinuousBoxBeta {
  int dims = 1;
  double box_width = 1.0;
  double delta = 0.1;
  double c1 = 1.0;
  double c2 = 1.0;
};

// beta_t = a log(b t); defined only where b t > 1.
struct EmpiricalBeta {
  double a = 0.8;
  double b = 0.4;
};

using BetaSchedule = std::variant<FiniteArmBeta, ContinuousBoxBeta, EmpiricalBeta>;

inline void validate(const BetaSchedule& schedule) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FiniteArmBeta>) {
          if (s.arm_count < 1) throw std::invalid_argument("beta: arm count must be >= 1");
          if (!(s.delta > 0.0 && s.delta < 1.0)) throw std::invalid_argument("beta: delta must lie in (0,1)");
        } else if constexpr (std::is_same_v<T, ContinuousBoxBeta>) {
          if (s.dims < 1) throw std::invalid_argument("beta: dims must be >= 1");
          if (!(s.box_width > 0.0)) throw std::invalid_argument("beta: box width must be > 0");
          if (!(s.delta > 0.0 && s.delta < 1.0)) throw std::invalid_argument("beta: delta must lie in (0,1)");
          if (!(s.c1 > 0.0) || !(s.c2 > 0.0)) throw std::invalid_argument("beta: c1, c2 must be > 0");
          const double inner = s.c1 * s.dims * std::numbers::pi * std::numbers::pi / (3.0 * s.delta);
          if (!(std::log(inner) > 0.0)) {
            throw std::invalid_argument("beta: c1 d pi^2 / (3 delta) must exceed 1 so the inner log is positive");
          }
        } else {
          if (!(s.a > 0.0) || !(s.b > 0.0)) throw std::invalid_argument("beta: a, b must be > 0");
        }
      },
      schedule);
}

namespace detail {

// Total evaluation; may return beta <= 0 for the empirical form at small t.
inline double raw_beta(const BetaSchedule& schedule, TimeIndex t) {
  const double td = static_cast<double>(t);
  constexpr double pi2 = std::numbers::pi * std::numbers::pi;
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, FiniteArmBeta>) {
          return 2.0 * std::log(s.arm_count * td * td * pi2 / (6.0 * s.delta));
        } else if constexpr (std::is_same_v<T, ContinuousBoxBeta>) {
          const double d = static_cast<double>(s.dims);
          const double first = 2.0 * std::log(pi2 * td * td / (3.0 * s.delta));
          const double inner = std::sqrt(std::log(s.c1 * d * pi2 * td * td / (3.0 * s.delta)));
          return first + 2.0 * d * std::log(s.c2 * s.box_width * d * td * td * inner);
        } else {
          return s.a * std::log(s.b * td);
        }
      },
      schedule);
}

}  // namespace detail

// Strict schedule evaluation: the empirical form errors outside its domain.
inline double beta(const BetaSchedule& schedule, TimeIndex t) {
  if (t < 1) {
    throw ScheduleDomainError("beta: t must be >= 1");
  }
  if (const auto* e = std::get_if<EmpiricalBeta>(&schedule)) {
    if (!(e->b * static_cast<double>(t) > 1.0)) {
      throw ScheduleDomainError("beta: empirical schedule needs b*t > 1, got b*t = " +
                                std::to_string(e->b * static_cast<double>(t)));
    }
  }
  return detail::raw_beta(schedule, t);
}

// Exponent applied to beta_t in the UCB score. sqrt_beta is the +sqrt(beta_t)
// weight the regret analysis uses; inverse_sqrt_beta is the beta_t^{-1/2}
// variant kept for comparison.
enum class UcbExponent { sqrt_beta, inverse_sqrt_beta };

// Exploration weight used inside action selection. Total over t >= 1: the
// empirical schedule can be <= 0 early on (e.g. 0.8 log(0.4 t) for t <= 2),
// which selection treats as zero exploration rather than an error.
inline double exploration_weight(const BetaSchedule& schedule, TimeIndex t, UcbExponent exponent) {
  const double raw = detail::raw_beta(schedule, t);
  if (exponent == UcbExponent::sqrt_beta) {
    return std::sqrt(std::max(raw, 0.0));
  }
  return 1.0 / std::sqrt(std::max(raw, 1e-12));
}

// ---------------------------------------------------------------------------
// Action grids
// ---------------------------------------------------------------------------

class ActionGrid {
 public:
  // Uniform lattice over [-width/2, width/2]^dims, lexicographic order,
  // last coordinate fastest. points_per_dim = 1 places the single point at 0.
  static ActionGrid uniform(int dims, double width, int points_per_dim) {
    if (dims < 1 || points_per_dim < 1 || !(width > 0.0)) {
      throw std::invalid_argument("uniform grid: need dims >= 1, points >= 1, width > 0");
    }
    std::vector<double> axis(static_cast<std::size_t>(points_per_dim));
    for (int i = 0; i < points_per_dim; ++i) {
      axis[static_cast<std::size_t>(i)] =
          points_per_dim == 1
              ? 0.0
              : -width / 2.0 + width * static_cast<double>(i) / static_cast<double>(points_per_dim - 1);
    }
    std::size_t total = 1;
    for (int d = 0; d < dims; ++d) {
      total *= static_cast<std::size_t>(points_per_dim);
    }
    std::vector<ActionVector> actions(total, ActionVector(dims));
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t rem = idx;
      for (int d = dims - 1; d >= 0; --d) {
        actions[idx](d) = axis[rem % static_cast<std::size_t>(points_per_dim)];
        rem /= static_cast<std::size_t>(points_per_dim);
      }
    }
    return ActionGrid(std::move(actions), /*check_duplicates=*/false);
  }

  // Arm index i -> 1-d action [i]; used when arms have no coordinates of their own.
  static ActionGrid arm_indices(Eigen::Index arm_count) {
    if (arm_count < 1) {
      throw std::invalid_argument("arm grid: need at least one arm");
    }
    std::vector<ActionVector> actions;
    actions.reserve(static_cast<std::size_t>(arm_count));
    for (Eigen::Index i = 0; i < arm_count; ++i) {
      ActionVector a(1);
      a(0) = static_cast<double>(i);
      actions.push_back(std::move(a));
    }
    return ActionGrid(std::move(actions), /*check_duplicates=*/false);
  }

  static ActionGrid from_actions(std::vector<ActionVector> actions) {
    return ActionGrid(std::move(actions), /*check_duplicates=*/true);
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(actions_.size()); }
  const ActionVector& operator[](Eigen::Index i) const {
    return actions_[static_cast<std::size_t>(i)];
  }
  const std::vector<ActionVector>& actions() const { return actions_; }
  int dims() const { return static_cast<int>(actions_.front().size()); }

  // Exact-match lookup; returns -1 when absent.
  Eigen::Index index_of(const ActionVector& a) const {
    for (std::size_t i = 0; i < actions_.size(); ++i) {
      if (actions_[i].size() == a.size() && (actions_[i].array() == a.array()).all()) {
        return static_cast<Eigen::Index>(i);
      }
    }
    return -1;
  }

 private:
  ActionGrid(std::vector<ActionVector> actions, bool check_duplicates)
      : actions_(std::move(actions)) {
    if (actions_.empty()) {
      throw std::invalid_argument("action grid must be nonempty");
    }
    const Eigen::Index d = actions_.front().size();
    for (const auto& a : actions_) {
      if (a.size() != d) {
        throw DimensionError("action grid entries must share one dimension");
      }
      if (!a.allFinite()) {
        throw std::invalid_argument("action grid entries must be finite");
      }
    }
    if (check_duplicates) {
      for (std::size_t i = 0; i < actions_.size(); ++i) {
        for (std::size_t j = i + 1; j < actions_.size(); ++j) {
          if ((actions_[i].array() == actions_[j].array()).all()) {
            throw std::invalid_argument("action grid contains duplicate actions");
          }
        }
      }
    }
  }

  std::vector<ActionVector> actions_;
};

// ---------------------------------------------------------------------------
// Policy specifications. Each variant pins the kernel shape its method uses.
// ---------------------------------------------------------------------------

struct PeriodicGpUcbSpec {
  ActionKernel action;
  PeriodicTime time;
};

struct GpUcbSpec {
  ActionKernel action;
};

// Time step as context through a squared-exponential time kernel.
struct CGpUcbSpec {
  ActionKernel action;
  SqExpTime time;
};

// Stationary model with the posterior discarded every block_size steps.
struct RGpUcbSpec {
  ActionKernel action;
  int block_size = 15;
  int reset_phase = 0;  // reset after absorbing t with (t - phase) % block == 0
};

struct TvGpUcbSpec {
  ActionKernel action;
  DecayTime time;
};

using PolicyModel =
    std::variant<PeriodicGpUcbSpec, GpUcbSpec, CGpUcbSpec, RGpUcbSpec, TvGpUcbSpec>;

struct PolicySpec {
  PolicyModel model;
  BetaSchedule schedule;
  NoiseModel noise;
  UcbExponent exponent = UcbExponent::sqrt_beta;
};

inline ProductKernel product_kernel(const PolicyModel& model) {
  return std::visit(
      [](const auto& m) -> ProductKernel {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PeriodicGpUcbSpec>) {
          return {m.action, m.time};
        } else if constexpr (std::is_same_v<T, CGpUcbSpec>) {
          return {m.action, m.time};
        } else if constexpr (std::is_same_v<T, TvGpUcbSpec>) {
          return {m.action, m.time};
        } else {
          return {m.action, ConstantTime{}};
        }
      },
      model);
}

inline void validate(const PolicySpec& spec) {
  validate(product_kernel(spec.model));
  validate(spec.schedule);
  check_noise(spec.noise);
  if (const auto* r = std::get_if<RGpUcbSpec>(&spec.model)) {
    if (r->block_size < 1) throw std::invalid_argument("R-GP-UCB block size must be >= 1");
    if (r->reset_phase < 0 || r->reset_phase >= r->block_size) {
      throw std::invalid_argument("R-GP-UCB reset phase must lie in [0, block size)");
    }
  }
}

// The unit-variance bound behind the theoretical schedules does not hold for
// the linear kernel; surface that combination rather than silently running it.
inline std::vector<std::string> lint(const PolicySpec& spec) {
  std::vector<std::string> warnings;
  const bool linear = std::visit(
      [](const auto& m) { return std::holds_alternative<Linear>(m.action); }, spec.model);
  const bool theoretical = !std::holds_alternative<EmpiricalBeta>(spec.schedule);
  if (linear && theoretical) {
    warnings.push_back(
        "linear action kernel is unbounded (k(a,a) = |a|^2); the finite/continuous "
        "beta schedules assume k <= 1 and their confidence levels do not transfer");
  }
  return warnings;
}

// ---------------------------------------------------------------------------
// Policy state and the UCB action rule
// ---------------------------------------------------------------------------

class PolicyState {
 public:
  explicit PolicyState(PolicySpec spec, std::uint64_t seed_lineage = 0)
      : spec_(std::move(spec)),
        posterior_(product_kernel(spec_.model), spec_.noise),
        seed_lineage_(seed_lineage) {
    validate(spec_);
  }

  const PolicySpec& spec() const { return spec_; }
  const GpPosterior& posterior() const { return posterior_; }
  TimeIndex current_step() const { return current_step_; }
  std::uint64_t seed_lineage() const { return seed_lineage_; }

  // argmax over the grid of mu_{t-1}{(a,t)} + w_t * sigma_{t-1}{(a,t)};
  // ties break to the lowest grid index.
  Eigen::Index select_action_index(TimeIndex t, const ActionGrid& grid) const {
    if (t != current_step_) {
      throw std::invalid_argument("select_action: t=" + std::to_string(t) +
                                  " but policy is at step " + std::to_string(current_step_));
    }
    const double w = exploration_weight(spec_.schedule, t, spec_.exponent);
    const auto preds = posterior_.predict_grid(grid.actions(), t);
    Eigen::Index best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const auto& pred = preds[static_cast<std::size_t>(i)];
      const double score = pred.mean + w * std::sqrt(pred.variance);
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    return best;
  }

  ActionVector select_action(TimeIndex t, const ActionGrid& grid) const {
    return grid[select_action_index(t, grid)];
  }

  // Warm start: pre-load an observation without advancing the step counter
  // (and without triggering R-GP-UCB resets); pair with advance_to().
  void absorb(const ActionVector& a, TimeIndex t, double reward) {
    posterior_.observe({a, t}, reward);
  }

  void advance_to(TimeIndex t) {
    if (t < current_step_) {
      throw std::invalid_argument("advance_to: cannot move the step counter backwards");
    }
    current_step_ = t;
  }

  // Absorb the observed reward for the action chosen at step t, then advance.
  // R-GP-UCB discards its posterior after absorbing a block-boundary step.
  void step(double reward, const ActionVector& chosen, TimeIndex t) {
    if (t != current_step_) {
      throw std::invalid_argument("step: t=" + std::to_string(t) + " but policy is at step " +
                                  std::to_string(current_step_));
    }
    posterior_.observe({chosen, t}, reward);
    ++current_step_;
    if (const auto* r = std::get_if<RGpUcbSpec>(&spec_.model)) {
      const TimeIndex rel = t - static_cast<TimeIndex>(r->reset_phase);
      if (rel >= 0 && rel % r->block_size == 0) {
        posterior_ = GpPosterior(product_kernel(spec_.model), spec_.noise);
      }
    }
  }

 private:
  PolicySpec spec_;
  GpPosterior posterior_;
  TimeIndex current_step_ = 1;
  std::uint64_t seed_lineage_ = 0;
};

}  // namespace gpb
