// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 7 and 8 run the desk-scale experiment protocol (20
// replications) and are the slow part; set GPBANDITS_CLI to the CLI binary so
// the determinism criterion can exercise the real executable.

#include "gpbandits/analysis.hpp"
#include "gpbandits/config.hpp"
#include "gpbandits/environments.hpp"
#include "gpbandits/gp.hpp"
#include "gpbandits/kernels.hpp"
#include "gpbandits/policies.hpp"
#include "gpbandits/rng.hpp"
#include "gpbandits/runner.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;
using namespace gpb;

namespace {

struct Failure {
  std::string message;
};

void require(bool ok, const std::string& message) {
  if (!ok) {
    throw Failure{message};
  }
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct TempDir {
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("gpbandits_accept_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path path;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), "missing output file " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<ActionTimePair> mixed_trajectory(std::uint64_t seed, int steps) {
  GaussianStream stream(seed);
  std::vector<ActionTimePair> inputs;
  for (int t = 1; t <= steps; ++t) {
    ActionVector a(1);
    a << 4.0 * (stream.uniform() - 0.5);
    inputs.push_back({a, static_cast<TimeIndex>(t)});
  }
  return inputs;
}

std::vector<ProductKernel> mixed_kernels() {
  return {
      {SquaredExponential{1.0}, PeriodicTime{10.0, 20}},
      {SquaredExponential{0.5}, PeriodicTime{2.0, 5}},
      {Matern{MaternNu::three_halves, 1.0}, DecayTime{0.05}},
      {Matern{MaternNu::five_halves, 0.8}, SqExpTime{10.0}},
      {SquaredExponential{1.0}, ConstantTime{}},
  };
}

// Stored trajectories shared by criteria 1 and 2.
struct Trajectory {
  ProductKernel kernel;
  double noise = 1.0;
  std::vector<ActionTimePair> inputs;
  Eigen::VectorXd targets;
  GpPosterior gp;
};

std::vector<Trajectory>& trajectories() {
  static std::vector<Trajectory> cache = [] {
    std::vector<Trajectory> out;
    GaussianStream stream(515);
    const auto kernels = mixed_kernels();
    for (int i = 0; i < 50; ++i) {
      const auto& kernel = kernels[static_cast<std::size_t>(i) % kernels.size()];
      const int steps = 10 + static_cast<int>(stream.index(51));  // <= 60
      const double noise = 0.4 + stream.uniform();
      Trajectory tr{kernel, noise, {}, Eigen::VectorXd(steps), GpPosterior(kernel, {noise})};
      for (int t = 1; t <= steps; ++t) {
        ActionVector a(1);
        a << 4.0 * (stream.uniform() - 0.5);
        const ActionTimePair s{a, static_cast<TimeIndex>(t)};
        const double y = 2.0 * stream.next();
        tr.gp.observe(s, y);
        tr.inputs.push_back(s);
        tr.targets(t - 1) = y;
      }
      out.push_back(std::move(tr));
    }
    return out;
  }();
  return cache;
}

// Dense posterior solve by LU, independent of the incremental path.
GpPosterior::Prediction dense_predict(const Trajectory& tr, const ActionTimePair& query) {
  const Eigen::Index n = static_cast<Eigen::Index>(tr.inputs.size());
  Eigen::MatrixXd a(n, n);
  Eigen::VectorXd kv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      a(i, j) = eval(tr.kernel, tr.inputs[static_cast<std::size_t>(i)],
                     tr.inputs[static_cast<std::size_t>(j)]);
    }
    a(i, i) += tr.noise;
    kv(i) = eval(tr.kernel, tr.inputs[static_cast<std::size_t>(i)], query);
  }
  const double k_qq = eval(tr.kernel, query, query);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  return {kv.dot(lu.solve(tr.targets)), k_qq - kv.dot(lu.solve(kv))};
}

std::map<std::string, double> read_summary_means(const fs::path& p) {
  std::ifstream in(p);
  require(static_cast<bool>(in), "missing " + p.string());
  std::string line;
  std::getline(in, line);
  std::map<std::string, double> means;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string policy, mean;
    std::getline(ss, policy, ',');
    std::getline(ss, mean, ',');
    means[policy] = std::stod(mean);
  }
  return means;
}

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = "\"" + cli + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1) {
    return -1;
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------

std::string criterion_posterior_oracle() {
  GaussianStream stream(99);
  double max_err = 0.0;
  for (const auto& tr : trajectories()) {
    for (int q = 0; q < 20; ++q) {
      ActionVector a(1);
      a << 4.0 * (stream.uniform() - 0.5);
      const ActionTimePair query{a, 1 + TimeIndex(stream.index(120))};
      const auto got = tr.gp.predict(query);
      const auto want = dense_predict(tr, query);
      max_err = std::max(max_err, std::abs(got.mean - want.mean));
      max_err = std::max(max_err, std::abs(got.variance - want.variance));
    }
  }
  require(max_err < 1e-8, "max |incremental - dense| = " + fmt(max_err));
  return "50 trajectories, max err " + fmt(max_err);
}

std::string criterion_info_gain_identity() {
  double max_err = 0.0;
  for (const auto& tr : trajectories()) {
    const Eigen::MatrixXd g = gram(tr.kernel, std::span<const ActionTimePair>(tr.inputs));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      logdet += 0.5 * std::log1p(std::max(es.eigenvalues()(i), 0.0) / tr.noise);
    }
    max_err = std::max(max_err, std::abs(tr.gp.info_gain() - logdet));
  }
  require(max_err < 1e-8, "max |incremental - logdet| = " + fmt(max_err));
  return "identity error " + fmt(max_err);
}

std::string criterion_rearrangement() {
  const auto grid = ActionGrid::uniform(1, 4.0, 9);
  double min_slack = 1e300;
  for (TimeIndex tau : {1, 2, 3, 4}) {
    GaussianStream stream(700 + std::uint64_t(tau));
    const ProductKernel kernel{SquaredExponential{1.0}, PeriodicTime{2.0, tau}};
    for (int trial = 0; trial < 100; ++trial) {
      const TimeIndex blocks = 1 + TimeIndex(stream.index(std::uint64_t(24 / tau)));
      std::vector<ActionTimePair> inputs;
      for (TimeIndex t = 1; t <= blocks * tau; ++t) {
        inputs.push_back({grid[Eigen::Index(stream.index(9))], t});
      }
      const auto report = rearrangement_check(inputs, kernel, 1.0, tau);
      min_slack = std::min(min_slack, report.bound_slack);
    }
  }
  require(min_slack >= -1e-9, "min slack = " + fmt(min_slack));

  // engineered independence limit: tiny time length scale, tau=2, T=4
  GaussianStream stream(31);
  const ProductKernel tight{SquaredExponential{1.0}, PeriodicTime{0.05, 2}};
  std::vector<ActionTimePair> inputs;
  for (TimeIndex t = 1; t <= 4; ++t) {
    inputs.push_back({grid[Eigen::Index(stream.index(9))], t});
  }
  const auto report = rearrangement_check(inputs, tight, 1.0, 2);
  require(report.bound_slack >= -1e-9 && report.bound_slack < 1e-6,
          "independence-limit slack = " + fmt(report.bound_slack));
  return "min slack " + fmt(min_slack) + ", limit slack " + fmt(report.bound_slack);
}

std::string criterion_rank() {
  std::string detail;
  for (TimeIndex tau : {2, 3, 4, 24}) {
    std::vector<TimeIndex> times;
    for (TimeIndex t = 1; t <= 10 * tau; ++t) {
      times.push_back(t);
    }
    const Eigen::MatrixXd g =
        gram(TimeKernel{PeriodicTime{10.0, tau}}, std::span<const TimeIndex>(times));
    const Eigen::Index rank = rank_estimate(g);
    require(rank <= tau, "rank(K_tau) = " + std::to_string(rank) + " > tau = " +
                             std::to_string(tau));
    detail += (detail.empty() ? "" : ", ") + std::to_string(rank) + "<=" + std::to_string(tau);
  }
  return detail;
}

std::string criterion_reductions() {
  const auto grid = ActionGrid::uniform(1, 4.0, 9);
  auto run_policy = [&](const PolicyModel& model, const SyntheticPeriodicEnv& env) {
    PolicySpec spec{model, EmpiricalBeta{0.8, 0.4}, NoiseModel{1.0}, UcbExponent::sqrt_beta};
    PolicyState state(spec);
    std::vector<Eigen::Index> actions;
    for (TimeIndex t = 1; t <= 50; ++t) {
      const Eigen::Index idx = state.select_action_index(t, grid);
      state.step(env.realized_reward(idx, t), grid[idx], t);
      actions.push_back(idx);
    }
    return actions;
  };

  const auto env1 = SyntheticPeriodicEnv::sample(
      grid, 1, {SquaredExponential{1.0}, PeriodicTime{10.0, 1}}, {1.0}, 1001);
  const auto a = run_policy(PeriodicGpUcbSpec{SquaredExponential{1.0}, PeriodicTime{10.0, 1}},
                            env1);
  const auto b = run_policy(GpUcbSpec{SquaredExponential{1.0}}, env1);
  require(a == b, "Periodic-GP-UCB(tau=1) diverged from GP-UCB");

  const auto env2 = SyntheticPeriodicEnv::sample(
      grid, 5, {SquaredExponential{1.0}, PeriodicTime{2.0, 5}}, {1.0}, 2002);
  const auto c = run_policy(TvGpUcbSpec{SquaredExponential{1.0}, DecayTime{0.0}}, env2);
  const auto d = run_policy(GpUcbSpec{SquaredExponential{1.0}}, env2);
  require(c == d, "TV-GP-UCB(eps=0) diverged from GP-UCB");
  return "both 50-step reductions exact";
}

std::string criterion_beta_values() {
  const double finite = beta(BetaSchedule{FiniteArmBeta{24, 0.1}}, 1);
  require(std::abs(finite - 11.9561) < 1e-3, "finite-arm value " + fmt(finite));
  const double empirical = beta(BetaSchedule{EmpiricalBeta{0.8, 0.4}}, 200);
  require(std::abs(empirical - 3.5056) < 1e-3, "empirical value " + fmt(empirical));
  return "beta(24,0.1;1)=" + fmt(finite) + ", beta_emp(200)=" + fmt(empirical);
}

std::string criterion_synthetic_ordering() {
  TempDir dir;
  std::map<std::string, std::string> raw{{"mode", "synthetic"},
                                         {"seed", "20260809"},
                                         {"out", (dir.path / "out").string()}};
  std::ostringstream log;
  run_synthetic(resolve_config(raw), log);
  const auto means = read_summary_means(dir.path / "out" / "summary.csv");
  const double periodic = means.at("periodic-gp-ucb");
  std::string detail = "R200: periodic=" + fmt(periodic);
  std::string losses;
  for (const std::string other : {"gp-ucb", "c-gp-ucb", "r-gp-ucb", "tv-gp-ucb"}) {
    detail += ", " + other + "=" + fmt(means.at(other));
    if (!(periodic < means.at(other))) {
      losses += (losses.empty() ? "" : ", ") + other;
    }
  }
  require(losses.empty(), detail + "; not strictly below: " + losses);
  return detail;
}

std::string criterion_sensitivity() {
  TempDir dir;
  std::map<std::string, std::string> raw{
      {"mode", "sweep-tau"},        {"seed", "20260809"},
      {"env.tau", "24"},            {"sweep.taus", "20,22,26,28"},
      {"sweep.baselines", "cgp"},   {"out", (dir.path / "out").string()},
  };
  std::ostringstream log;
  run_sweep_tau(resolve_config(raw), log);

  // mean R_T per (tau, policy) from sweep.csv
  std::ifstream in(dir.path / "out" / "sweep.csv");
  require(static_cast<bool>(in), "missing sweep.csv");
  std::string line;
  std::getline(in, line);
  std::map<std::string, std::pair<double, int>> totals;  // key -> (sum of R_T, count)
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cells.push_back(cell);
    }
    if (cells[3] == "200") {
      auto& slot = totals[cells[0] + "/" + cells[1]];
      slot.first += std::stod(cells[4]);
      slot.second += 1;
    }
  }
  const double cgp = totals.at("0/c-gp-ucb").first / totals.at("0/c-gp-ucb").second;
  std::string detail = "R200: c-gp-ucb=" + fmt(cgp);
  for (const std::string tau : {"20", "22", "26", "28"}) {
    const auto& slot = totals.at(tau + "/periodic-gp-ucb");
    const double mean = slot.first / slot.second;
    detail += ", tau" + tau + "=" + fmt(mean);
    require(mean < cgp, "periodic with tau=" + tau + " (" + fmt(mean) +
                            ") did not beat c-gp-ucb (" + fmt(cgp) + ")");
  }
  return detail;
}

std::string criterion_replay_fixture() {
  TempDir dir;
  const fs::path csv = dir.path / "toy.csv";
  {
    std::ofstream out(csv, std::ios::binary);
    out << "time,a,b,c\n"
           "1,3.0,7.0,5.0\n"
           "2,1.0,2.0,9.0\n"
           "3,4.0,4.0,4.0\n"
           "4,0.0,8.0,6.0\n"
           "5,2.0,3.0,1.0\n";
  }
  const auto env = ReplayEnv::load(csv);

  // hand-computed: forced arms {a,c,b,b,a} against per-row maxima {7,9,4,8,3}
  const std::vector<Eigen::Index> forced{0, 2, 1, 1, 0};
  const std::vector<double> expected_r{4.0, 0.0, 0.0, 0.0, 1.0};
  const std::vector<double> expected_cum{4.0, 4.0, 4.0, 4.0, 5.0};
  const auto trace = regret_trace(env, forced);
  for (std::size_t i = 0; i < forced.size(); ++i) {
    require(trace.instantaneous[i] == expected_r[i],
            "r_" + std::to_string(i + 1) + " = " + fmt(trace.instantaneous[i]) +
                ", hand value " + fmt(expected_r[i]));
    require(trace.cumulative[i] == expected_cum[i],
            "R_" + std::to_string(i + 1) + " mismatch");
  }

  // full replay protocol on the fixture: warm start + improvement table
  std::map<std::string, std::string> raw{
      {"mode", "replay"},           {"seed", "5"},
      {"replay.path", csv.string()}, {"replay.warmup", "2"},
      {"replay.standardize", "false"}, {"horizon", "3"},
      {"out", (dir.path / "out").string()},
  };
  std::ostringstream log;
  run_replay(resolve_config(raw), log);
  const std::string summary = slurp(dir.path / "out" / "summary.csv");
  require(summary.find("improvement_pct_vs_gp_ucb") != std::string::npos,
          "improvement column missing from summary.csv");

  // Madrid-format data is external: when provided, produce the improvement
  // table but assert nothing about the 13% figure.
  std::string madrid_note;
  if (const char* madrid = std::getenv("GPBANDITS_MADRID_CSV")) {
    std::map<std::string, std::string> mraw{{"mode", "replay"},
                                            {"seed", "5"},
                                            {"replay.path", madrid},
                                            {"out", (dir.path / "madrid").string()}};
    run_replay(resolve_config(mraw), log);
    madrid_note = "; madrid improvement table written (not asserted)";
  }
  return "hand-computed trace exact; improvement table present" + madrid_note;
}

std::string criterion_cli_determinism() {
  const char* cli = std::getenv("GPBANDITS_CLI");
  require(cli != nullptr && *cli != '\0',
          "GPBANDITS_CLI is not set; run through ctest or export the CLI path");
  TempDir dir;
  const fs::path cfg = dir.path / "exp.cfg";
  {
    std::ofstream out(cfg, std::ios::binary);
    out << "mode=synthetic\nseed=11\nreplications=2\nhorizon=25\n"
           "env.tau=5\nenv.grid.points=21\nenv.grid.width=4\n";
  }
  for (const std::string mode : {"synthetic", "info-gain"}) {
    std::string extra;
    if (mode == "info-gain") {
      extra = " --reps 1";
    }
    const std::string cmd_base = mode + " --config " + cfg.string() + extra;
    require(run_cli(cli, cmd_base + " --out " + (dir.path / (mode + "_a")).string()) == 0,
            "CLI run 1 failed for " + mode);
    require(run_cli(cli, cmd_base + " --out " + (dir.path / (mode + "_b")).string()) == 0,
            "CLI run 2 failed for " + mode);
    const fs::path out_a = dir.path / (mode + "_a");
    const fs::path out_b = dir.path / (mode + "_b");
    for (const auto& entry : fs::directory_iterator(out_a)) {
      const std::string name = entry.path().filename().string();
      if (name.size() > 4 && name.substr(name.size() - 4) == ".csv") {
        require(slurp(entry.path()) == slurp(out_b / name),
                name + " differs between identical " + mode + " runs");
      }
    }
  }
  return "synthetic and info-gain CSVs byte-identical across reruns";
}

std::string criterion_psd() {
  GaussianStream stream(606);
  const std::vector<std::pair<std::string, ProductKernel>> families = {
      {"se", {SquaredExponential{1.0}, ConstantTime{}}},
      {"linear", {Linear{}, ConstantTime{}}},
      {"matern12", {Matern{MaternNu::half, 1.0}, ConstantTime{}}},
      {"matern32", {Matern{MaternNu::three_halves, 1.0}, ConstantTime{}}},
      {"matern52", {Matern{MaternNu::five_halves, 1.0}, ConstantTime{}}},
      {"periodic", {SquaredExponential{1.0}, PeriodicTime{2.0, 6}}},
      {"decay", {SquaredExponential{1.0}, DecayTime{0.05}}},
      {"se-time", {SquaredExponential{1.0}, SqExpTime{10.0}}},
  };
  double worst = 0.0;
  for (const auto& [name, kernel] : families) {
    for (int rep = 0; rep < 100; ++rep) {
      const int n = 2 + static_cast<int>(stream.index(49));
      std::vector<ActionTimePair> inputs;
      for (int i = 0; i < n; ++i) {
        ActionVector a(2);
        a << 4.0 * (stream.uniform() - 0.5), 4.0 * (stream.uniform() - 0.5);
        inputs.push_back({a, 1 + TimeIndex(stream.index(200))});
      }
      const Eigen::MatrixXd g = gram(kernel, std::span<const ActionTimePair>(inputs));
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
      const double max_eig = es.eigenvalues().maxCoeff();
      const double min_eig = es.eigenvalues().minCoeff();
      require(min_eig >= -1e-8 * max_eig,
              name + ": min eig " + fmt(min_eig) + " vs max eig " + fmt(max_eig));
      worst = std::min(worst, max_eig > 0 ? min_eig / max_eig : 0.0);
    }
  }
  return "800 grams PSD, worst min/max eig ratio " + fmt(worst);
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::function<std::string()> body;
  };
  const std::vector<Criterion> criteria = {
      {1, "posterior oracle equivalence", 10.0, criterion_posterior_oracle},
      {2, "info-gain identity", 5.0, criterion_info_gain_identity},
      {3, "rearrangement inequality", 10.0, criterion_rearrangement},
      {4, "rank of K_tau", 5.0, criterion_rank},
      {5, "policy reductions", 5.0, criterion_reductions},
      {6, "beta schedule values", 1.0, criterion_beta_values},
      {7, "synthetic regret ordering", 300.0, criterion_synthetic_ordering},
      {8, "tau sensitivity vs C-GP-UCB", 300.0, criterion_sensitivity},
      {9, "replay fixture oracle", 60.0, criterion_replay_fixture},
      {10, "CLI determinism", 120.0, criterion_cli_determinism},
      {11, "PSD property suite", 10.0, criterion_psd},
  };

  bool all_ok = true;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
      detail = c.body();
    } catch (const Failure& f) {
      ok = false;
      detail = f.message;
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (ok && elapsed >= c.budget_seconds) {
      ok = false;
      detail += " [exceeded " + fmt(c.budget_seconds) + " s budget]";
    }
    std::printf("criterion %2d %s %s (%s) [%.2f s]\n", c.id, ok ? "PASS" : "FAIL",
                c.name.c_str(), detail.c_str(), elapsed);
    std::fflush(stdout);
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
