#pragma once

#include "gpbandits/kernels.hpp"
#include "gpbandits/policies.hpp"
#include "gpbandits/rng.hpp"
#include "gpbandits/types.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace gpb {

namespace detail {

// Factor F with F F^T = K for a symmetric PSD matrix; eigenvalues that dip
// below zero from roundoff are clamped. Handles the near-singular grams a
// flat periodic kernel produces, where plain Cholesky needs heavy jitter.
inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
  if (es.info() != Eigen::Success) {
    throw DegeneracyError("eigendecomposition of covariance matrix failed");
  }
  Eigen::VectorXd scale = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * scale.asDiagonal();
}

}  // namespace detail

// Synthetic reward source with f(a, t) = f(a, (t-1) mod tau + 1) exactly: the
// mean table over one period is drawn from the zero-mean GP with the given
// product kernel on grid x {1..tau} and extended periodically. Realized noise
// is a counter-based function of (action index, t), so distinct policies that
// pick the same pair within a replication receive the same reward.
class SyntheticPeriodicEnv {
 public:
  static SyntheticPeriodicEnv sample(ActionGrid grid, TimeIndex tau, const ProductKernel& kernel,
                                     NoiseModel noise, std::uint64_t seed) {
    if (tau < 1) {
      throw std::invalid_argument("synthetic env: tau must be >= 1");
    }
    validate(kernel);
    if (!(noise.variance >= 0.0) || !std::isfinite(noise.variance)) {
      throw std::invalid_argument("synthetic env: noise variance must be >= 0 and finite");
    }

    std::vector<TimeIndex> times(static_cast<std::size_t>(tau));
    for (TimeIndex t = 1; t <= tau; ++t) {
      times[static_cast<std::size_t>(t - 1)] = t;
    }
    // The lattice gram factorizes as K_time (x) K_action, so a draw is
    // F_t Z F_a^T with Z iid standard normal -- exact and cheap compared to
    // factorizing the full (tau*|grid|)^2 matrix.
    const Eigen::MatrixXd f_time =
        detail::psd_factor(gram(kernel.time, std::span<const TimeIndex>(times)));
    const Eigen::MatrixXd f_action =
        detail::psd_factor(gram(kernel.action, std::span<const ActionVector>(grid.actions())));

    const std::uint64_t table_seed = derive_seed(seed, 0x7ab1e);
    const std::uint64_t noise_seed = derive_seed(seed, 0x0152);
    GaussianStream stream(table_seed);
    Eigen::MatrixXd z(tau, grid.size());
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        z(r, c) = stream.next();
      }
    }
    Eigen::MatrixXd table = f_time * z * f_action.transpose();
    return SyntheticPeriodicEnv(std::move(grid), tau, std::move(table), noise, kernel, noise_seed);
  }

  const ActionGrid& grid() const { return grid_; }
  TimeIndex period() const { return tau_; }
  NoiseModel noise() const { return noise_; }
  const Eigen::MatrixXd& mean_table() const { return table_; }
  const ProductKernel& generator_kernel() const { return generator_; }

  double mean(Eigen::Index action_index, TimeIndex t) const {
    check_action(action_index);
    check_time(t);
    return table_((t - 1) % tau_, action_index);
  }

  double mean(const ActionVector& a, TimeIndex t) const { return mean(resolve(a), t); }

  std::pair<Eigen::Index, double> best_mean(TimeIndex t) const {
    check_time(t);
    const auto row = table_.row((t - 1) % tau_);
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < row.size(); ++j) {
      if (row(j) > row(best)) {
        best = j;
      }
    }
    return {best, row(best)};
  }

  // Realized reward for the paired noise field shared across policies.
  double realized_reward(Eigen::Index action_index, TimeIndex t) const {
    return mean(action_index, t) +
           std::sqrt(noise_.variance) *
               gaussian_at(noise_seed_, static_cast<std::uint64_t>(t),
                           static_cast<std::uint64_t>(action_index));
  }

  // Fresh draw y = f(a,t) + N(0, sigma^2) from the caller's stream.
  RewardSample query(const ActionVector& a, TimeIndex t, GaussianStream& rng) const {
    const double value = mean(a, t) + std::sqrt(noise_.variance) * rng.next();
    return {value, t, a};
  }

  RewardSample query(Eigen::Index action_index, TimeIndex t, GaussianStream& rng) const {
    return query(grid_[action_index], t, rng);
  }

 private:
  SyntheticPeriodicEnv(ActionGrid grid, TimeIndex tau, Eigen::MatrixXd table, NoiseModel noise,
                       ProductKernel generator, std::uint64_t noise_seed)
      : grid_(std::move(grid)),
        tau_(tau),
        table_(std::move(table)),
        noise_(noise),
        generator_(std::move(generator)),
        noise_seed_(noise_seed) {
    if (!table_.allFinite()) {
      throw DegeneracyError("synthetic mean table contains non-finite values");
    }
  }

  Eigen::Index resolve(const ActionVector& a) const {
    const Eigen::Index idx = grid_.index_of(a);
    if (idx < 0) {
      throw std::invalid_argument("action is not a grid point");
    }
    return idx;
  }

  void check_action(Eigen::Index idx) const {
    if (idx < 0 || idx >= grid_.size()) {
      throw std::invalid_argument("action index out of range");
    }
  }

  void check_time(TimeIndex t) const {
    if (t < 1) {
      throw std::invalid_argument("time index must be >= 1");
    }
  }

  ActionGrid grid_;
  TimeIndex tau_;
  Eigen::MatrixXd table_;  // tau x |grid|
  NoiseModel noise_;
  ProductKernel generator_;
  std::uint64_t noise_seed_;
};

// ---------------------------------------------------------------------------
// Replay environment: rewards are read back from a recorded table.
//
// CSV contract: header `time,<arm_1>,...,<arm_m>`; each following row is a
// timestamp (integer or ISO-8601; ignored except for ordering) and m numeric
// cells; empty cells or `NA` are missing and are imputed per arm by carrying
// the last observation forward (leading gaps take the arm mean).
// ---------------------------------------------------------------------------

struct ReplayOptions {
  bool standardize = false;
  Eigen::Index warmup_rows = 0;  // standardization statistics use only these rows
};

class ReplayEnv {
 public:
  static ReplayEnv load(const std::filesystem::path& path, const ReplayOptions& options = {}) {
    std::ifstream in(path);
    if (!in) {
      throw ConfigError("replay: cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
      throw ConfigError("replay: " + path.string() + " is empty");
    }
    strip_bom(line);
    auto header = split_csv(line);
    if (header.empty() || trim(header.front()) != "time") {
      throw ConfigError("replay: malformed header, expected `time,<arm_1>,...` in " +
                        path.string());
    }
    std::vector<std::string> names(header.begin() + 1, header.end());
    for (auto& n : names) {
      n = trim(n);
    }
    if (names.size() < 2) {
      throw ConfigError("replay: need at least 2 arms, found " + std::to_string(names.size()));
    }

    std::vector<std::vector<std::optional<double>>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) {
        continue;
      }
      auto cells = split_csv(line);
      if (cells.size() != names.size() + 1) {
        throw ConfigError("replay: line " + std::to_string(line_no) + " has " +
                          std::to_string(cells.size()) + " fields, expected " +
                          std::to_string(names.size() + 1));
      }
      std::vector<std::optional<double>> row(names.size());
      for (std::size_t j = 0; j < names.size(); ++j) {
        const std::string cell = trim(cells[j + 1]);
        if (cell.empty() || cell == "NA") {
          continue;
        }
        row[j] = parse_number(cell, line_no);
      }
      rows.push_back(std::move(row));
    }
    if (rows.empty()) {
      throw ConfigError("replay: no data rows in " + path.string());
    }
    return from_cells(std::move(names), std::move(rows), options);
  }

  // Assemble directly from a fully observed table (fixtures, tests).
  static ReplayEnv from_table(std::vector<std::string> names, Eigen::MatrixXd table,
                              const ReplayOptions& options = {}) {
    std::vector<std::vector<std::optional<double>>> rows(
        static_cast<std::size_t>(table.rows()),
        std::vector<std::optional<double>>(static_cast<std::size_t>(table.cols())));
    for (Eigen::Index i = 0; i < table.rows(); ++i) {
      for (Eigen::Index j = 0; j < table.cols(); ++j) {
        rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = table(i, j);
      }
    }
    return from_cells(std::move(names), std::move(rows), options);
  }

  Eigen::Index arms() const { return table_.cols(); }
  Eigen::Index max_steps() const { return table_.rows(); }
  const std::vector<std::string>& arm_names() const { return arm_names_; }
  const Eigen::MatrixXd& reward_table() const { return table_; }
  const Eigen::VectorXd& shift() const { return shift_; }
  const Eigen::VectorXd& scale() const { return scale_; }

  ActionGrid arm_grid() const { return ActionGrid::arm_indices(arms()); }

  // The recorded value is the realized reward; no randomness is consumed.
  double reward(Eigen::Index arm, TimeIndex t) const {
    check(arm, t);
    return table_(t - 1, arm);
  }

  std::pair<Eigen::Index, double> best_mean(TimeIndex t) const {
    check(0, t);
    const auto row = table_.row(t - 1);
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < row.size(); ++j) {
      if (row(j) > row(best)) {
        best = j;
      }
    }
    return {best, row(best)};
  }

 private:
  static ReplayEnv from_cells(std::vector<std::string> names,
                              std::vector<std::vector<std::optional<double>>> rows,
                              const ReplayOptions& options) {
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index m = static_cast<Eigen::Index>(names.size());
    Eigen::MatrixXd table(n, m);

    for (Eigen::Index j = 0; j < m; ++j) {
      double sum = 0.0;
      Eigen::Index count = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (const auto& v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) {
          sum += *v;
          ++count;
        }
      }
      if (count == 0) {
        throw ConfigError("replay: arm `" + names[static_cast<std::size_t>(j)] +
                          "` has no observed values");
      }
      const double arm_mean = sum / static_cast<double>(count);
      std::optional<double> last;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (v) {
          last = *v;
        }
        table(i, j) = v ? *v : (last ? *last : arm_mean);
      }
    }

    Eigen::VectorXd shift = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(m);
    if (options.standardize) {
      const Eigen::Index w = std::clamp<Eigen::Index>(options.warmup_rows, 1, n);
      for (Eigen::Index j = 0; j < m; ++j) {
        const auto window = table.col(j).head(w);
        shift(j) = window.mean();
        if (w > 1) {
          const double ss = (window.array() - shift(j)).square().sum();
          const double sd = std::sqrt(ss / static_cast<double>(w - 1));
          scale(j) = sd > 1e-12 ? sd : 1.0;
        }
      }
      table = (table.rowwise() - shift.transpose()).array().rowwise() /
              scale.transpose().array();
    }
    return ReplayEnv(std::move(names), std::move(table), std::move(shift), std::move(scale));
  }

  ReplayEnv(std::vector<std::string> names, Eigen::MatrixXd table, Eigen::VectorXd shift,
            Eigen::VectorXd scale)
      : arm_names_(std::move(names)),
        table_(std::move(table)),
        shift_(std::move(shift)),
        scale_(std::move(scale)) {}

  void check(Eigen::Index arm, TimeIndex t) const {
    if (arm < 0 || arm >= table_.cols()) {
      throw std::invalid_argument("replay: arm index out of range");
    }
    if (t < 1 || t > table_.rows()) {
      throw std::invalid_argument("replay: step " + std::to_string(t) + " outside 1.." +
                                  std::to_string(table_.rows()));
    }
  }

  static void strip_bom(std::string& s) {
    if (s.size() >= 3 && s[0] == '\xEF' && s[1] == '\xBB' && s[2] == '\xBF') {
      s.erase(0, 3);
    }
  }

  static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
      return "";
    }
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
  }

  static std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    out.push_back(cur);
    return out;
  }

  static double parse_number(const std::string& cell, std::size_t line_no) {
    std::size_t consumed = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &consumed);
    } catch (const std::exception&) {
      throw ConfigError("replay: line " + std::to_string(line_no) + ": `" + cell +
                        "` is neither numeric nor a missing marker");
    }
    if (consumed != cell.size()) {
      throw ConfigError("replay: line " + std::to_string(line_no) + ": `" + cell +
                        "` is neither numeric nor a missing marker");
    }
    return v;
  }

  std::vector<std::string> arm_names_;
  Eigen::MatrixXd table_;
  Eigen::VectorXd shift_;
  Eigen::VectorXd scale_;
};

}  // namespace gpb
