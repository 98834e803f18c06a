#pragma once

#include "gpbandits/types.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace gpb {

// ---------------------------------------------------------------------------
// Action kernels. SE and Matern are bounded with k(a,a) = 1; Linear is the
// one unbounded exception (k(a,a) = |a|^2) and callers that assume a unit
// variance bound must treat it specially.
// ---------------------------------------------------------------------------

struct SquaredExponential {
  double length_scale = 1.0;
};

struct Linear {};

enum class MaternNu { half, three_halves, five_halves };

struct Matern {
  MaternNu nu = MaternNu::five_halves;
  double length_scale = 1.0;
};

using ActionKernel = std::variant<SquaredExponential, Linear, Matern>;

// ---------------------------------------------------------------------------
// Time kernels. PeriodicForm::standard is exp[-(2/l^2) sin^2(pi |dt| / tau)],
// which repeats with period exactly tau; PeriodicForm::double_period is the
// sin^2(pi (t-t') / (2 tau)) variant, which repeats with period 2*tau. The
// |dt| is reduced modulo the period in integer arithmetic first, so shift
// invariance and k = 1 at multiples of the period are exact.
// ---------------------------------------------------------------------------

enum class PeriodicForm { standard, double_period };

struct PeriodicTime {
  double length_scale = 10.0;
  TimeIndex period = 20;
  PeriodicForm form = PeriodicForm::standard;
};

struct SqExpTime {
  double length_scale = 10.0;
};

// (1 - epsilon)^{|dt|/2}; epsilon = 0 collapses to the constant kernel.
struct DecayTime {
  double epsilon = 0.01;
};

// k == 1: the time coordinate is ignored.
struct ConstantTime {};

using TimeKernel = std::variant<ConstantTime, PeriodicTime, SqExpTime, DecayTime>;

// k{(a,t),(a',t')} = k_action(a,a') * k_time(t,t')
struct ProductKernel {
  ActionKernel action;
  TimeKernel time = ConstantTime{};
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline void validate(const ActionKernel& k) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (!std::is_same_v<T, Linear>) {
          if (!(v.length_scale > 0.0) || !std::isfinite(v.length_scale)) {
            throw std::invalid_argument("action kernel length scale must be positive and finite");
          }
        }
      },
      k);
}

inline void validate(const TimeKernel& k) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PeriodicTime>) {
          if (!(v.length_scale > 0.0) || !std::isfinite(v.length_scale)) {
            throw std::invalid_argument("periodic time kernel length scale must be positive");
          }
          if (v.period < 1) {
            throw std::invalid_argument("periodic time kernel period must be >= 1, got " +
                                        std::to_string(v.period));
          }
        } else if constexpr (std::is_same_v<T, SqExpTime>) {
          if (!(v.length_scale > 0.0) || !std::isfinite(v.length_scale)) {
            throw std::invalid_argument("time kernel length scale must be positive");
          }
        } else if constexpr (std::is_same_v<T, DecayTime>) {
          if (!(v.epsilon >= 0.0 && v.epsilon < 1.0)) {
            throw std::invalid_argument("decay kernel epsilon must lie in [0, 1), got " +
                                        std::to_string(v.epsilon));
          }
        }
      },
      k);
}

inline void validate(const ProductKernel& k) {
  validate(k.action);
  validate(k.time);
}

// ---------------------------------------------------------------------------
// Scalar evaluation
// ---------------------------------------------------------------------------

namespace detail {

inline double squared_distance(const ActionVector& a, const ActionVector& b) {
  if (a.size() != b.size()) {
    throw DimensionError("action dimension mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  // (a-b) and (b-a) square to identical floats, so evaluation order cannot
  // change the result.
  return (a - b).squaredNorm();
}

}  // namespace detail

inline double eval(const SquaredExponential& k, const ActionVector& a, const ActionVector& b) {
  const double sq = detail::squared_distance(a, b);
  return std::exp(-sq / (2.0 * k.length_scale * k.length_scale));
}

inline double eval(const Linear&, const ActionVector& a, const ActionVector& b) {
  if (a.size() != b.size()) {
    throw DimensionError("action dimension mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  return a.dot(b);
}

inline double eval(const Matern& k, const ActionVector& a, const ActionVector& b) {
  const double r = std::sqrt(detail::squared_distance(a, b));
  switch (k.nu) {
    case MaternNu::half:
      return std::exp(-r / k.length_scale);
    case MaternNu::three_halves: {
      const double c = std::numbers::sqrt3 * r / k.length_scale;
      return (1.0 + c) * std::exp(-c);
    }
    case MaternNu::five_halves: {
      const double c = std::sqrt(5.0) * r / k.length_scale;
      return (1.0 + c + c * c / 3.0) * std::exp(-c);
    }
  }
  throw std::logic_error("unreachable Matern smoothness");
}

inline double eval(const ActionKernel& k, const ActionVector& a, const ActionVector& b) {
  return std::visit([&](const auto& v) { return eval(v, a, b); }, k);
}

inline double eval(const PeriodicTime& k, TimeIndex t1, TimeIndex t2) {
  const TimeIndex period = k.form == PeriodicForm::standard ? k.period : 2 * k.period;
  const TimeIndex r = std::abs(t1 - t2) % period;
  if (r == 0) {
    return 1.0;
  }
  const double s = std::sin(std::numbers::pi * static_cast<double>(r) / static_cast<double>(period));
  return std::exp(-2.0 * s * s / (k.length_scale * k.length_scale));
}

inline double eval(const SqExpTime& k, TimeIndex t1, TimeIndex t2) {
  const double dt = static_cast<double>(std::abs(t1 - t2));
  return std::exp(-dt * dt / (2.0 * k.length_scale * k.length_scale));
}

inline double eval(const DecayTime& k, TimeIndex t1, TimeIndex t2) {
  return std::pow(1.0 - k.epsilon, 0.5 * static_cast<double>(std::abs(t1 - t2)));
}

inline double eval(const ConstantTime&, TimeIndex, TimeIndex) { return 1.0; }

inline double eval(const TimeKernel& k, TimeIndex t1, TimeIndex t2) {
  return std::visit([&](const auto& v) { return eval(v, t1, t2); }, k);
}

inline double eval(const ProductKernel& k, const ActionTimePair& s1, const ActionTimePair& s2) {
  return eval(k.action, s1.action, s2.action) * eval(k.time, s1.time, s2.time);
}

// ---------------------------------------------------------------------------
// Gram matrices and cross-covariance vectors. The lower triangle is computed
// and mirrored, so the result is symmetric by construction.
// ---------------------------------------------------------------------------

namespace detail {

template <typename Kernel, typename Input>
Eigen::MatrixXd gram_impl(const Kernel& k, std::span<const Input> inputs) {
  if (inputs.empty()) {
    throw std::invalid_argument("gram: empty input set");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(inputs.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = eval(k, inputs[static_cast<std::size_t>(i)], inputs[static_cast<std::size_t>(j)]);
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

template <typename Kernel, typename Input>
Eigen::VectorXd cross_gram_impl(const Kernel& k, std::span<const Input> inputs, const Input& query) {
  const Eigen::Index n = static_cast<Eigen::Index>(inputs.size());
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v(i) = eval(k, inputs[static_cast<std::size_t>(i)], query);
  }
  return v;
}

}  // namespace detail

inline Eigen::MatrixXd gram(const ProductKernel& k, std::span<const ActionTimePair> inputs) {
  return detail::gram_impl(k, inputs);
}

inline Eigen::MatrixXd gram(const ActionKernel& k, std::span<const ActionVector> inputs) {
  return detail::gram_impl(k, inputs);
}

inline Eigen::MatrixXd gram(const TimeKernel& k, std::span<const TimeIndex> inputs) {
  return detail::gram_impl(k, inputs);
}

inline Eigen::VectorXd cross_gram(const ProductKernel& k, std::span<const ActionTimePair> inputs,
                                  const ActionTimePair& query) {
  return detail::cross_gram_impl(k, inputs, query);
}

inline Eigen::VectorXd cross_gram(const ActionKernel& k, std::span<const ActionVector> inputs,
                                  const ActionVector& query) {
  return detail::cross_gram_impl(k, inputs, query);
}

inline Eigen::VectorXd cross_gram(const TimeKernel& k, std::span<const TimeIndex> inputs,
                                  const TimeIndex& query) {
  return detail::cross_gram_impl(k, inputs, query);
}

}  // namespace gpb
