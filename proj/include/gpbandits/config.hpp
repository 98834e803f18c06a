#pragma once

#include "gpbandits/kernels.hpp"
#include "gpbandits/policies.hpp"
#include "gpbandits/types.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gpb {

// Flat key=value configuration with dotted keys. Lines starting with `#` are
// comments; whitespace around keys and values is ignored; unknown keys are
// rejected so typos fail loudly.

enum class RunMode { synthetic, replay, sweep_tau, info_gain };

inline std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::synthetic: return "synthetic";
    case RunMode::replay: return "replay";
    case RunMode::sweep_tau: return "sweep-tau";
    case RunMode::info_gain: return "info-gain";
  }
  return "?";
}

struct PolicyInstance {
  std::string key;    // periodic | gp | cgp | rgp | tvgp | oracle
  std::string label;  // display / CSV name
  bool oracle = false;
  std::optional<PolicySpec> spec;  // empty for the oracle pseudo-policy
};

struct ExperimentConfig {
  RunMode mode = RunMode::synthetic;
  std::uint64_t seed = 0;
  int replications = 20;
  TimeIndex horizon = 200;
  int threads = 0;  // 0 = hardware concurrency
  std::string out_dir = "out";

  // environment; the default time length scale 1 draws a smoothly changing
  // but seriously non-stationary mean table (adjacent steps ~0.95 correlated,
  // opposite phases ~0.14) — the policies' own kernels are configured
  // separately below
  TimeIndex tau = 20;
  int grid_dims = 1;
  int grid_points = 101;
  double grid_width = 4.0;
  ActionKernel env_action_kernel = SquaredExponential{1.0};
  double env_time_length_scale = 1.0;
  NoiseModel noise{1.0};

  // replay
  std::string replay_path;
  Eigen::Index replay_warmup = 48;
  bool replay_standardize = true;
  bool warmstart_all_pairs = false;

  // policies (resolved, in run order)
  std::vector<PolicyInstance> policies;

  // fully parameterized spec for every known policy, whether or not it is in
  // the active list; sweep mode instantiates from these
  std::map<std::string, PolicySpec> prototype_specs;

  // flags
  UcbExponent exponent = UcbExponent::sqrt_beta;
  PeriodicForm periodic_form = PeriodicForm::standard;

  // sweep / info-gain
  std::vector<TimeIndex> sweep_taus;
  std::vector<std::string> sweep_baselines;
  int infogain_trials = 100;

  // echo of every resolved key for the manifest, in file-ready form
  std::vector<std::pair<std::string, std::string>> resolved;
};

namespace detail {

inline std::string trim_copy(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) {
    return "";
  }
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(s);
  while (std::getline(ss, cur, ',')) {
    cur = trim_copy(cur);
    if (!cur.empty()) {
      out.push_back(cur);
    }
  }
  return out;
}

class KeyBag {
 public:
  void insert(const std::string& key, const std::string& value, const std::string& where) {
    if (!values_.emplace(key, value).second) {
      throw ConfigError(where + ": duplicate key `" + key + "`");
    }
  }

  std::optional<std::string> take(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) {
      return std::nullopt;
    }
    std::string v = it->second;
    values_.erase(it);
    return v;
  }

  bool empty() const { return values_.empty(); }

  std::string leftover_message() const {
    std::string msg = "unknown config key(s):";
    for (const auto& [k, _] : values_) {
      msg += " `" + k + "`";
    }
    return msg;
  }

 private:
  std::map<std::string, std::string> values_;
};

template <typename T>
T parse_number(const std::string& key, const std::string& value);

template <>
inline double parse_number<double>(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": `" + value + "` is not a number");
  }
  if (used != value.size()) {
    throw ConfigError(key + ": `" + value + "` is not a number");
  }
  return v;
}

template <>
inline std::int64_t parse_number<std::int64_t>(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": `" + value + "` is not an integer");
  }
  if (used != value.size()) {
    throw ConfigError(key + ": `" + value + "` is not an integer");
  }
  return v;
}

template <>
inline std::uint64_t parse_number<std::uint64_t>(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": `" + value + "` is not an unsigned integer");
  }
  if (used != value.size()) {
    throw ConfigError(key + ": `" + value + "` is not an unsigned integer");
  }
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "off" || value == "no") return false;
  throw ConfigError(key + ": `" + value + "` is not a boolean (true/false)");
}

inline ActionKernel parse_action_kernel(const std::string& key, const std::string& name,
                                        double length_scale) {
  if (name == "se") return SquaredExponential{length_scale};
  if (name == "linear") return Linear{};
  if (name == "matern12") return Matern{MaternNu::half, length_scale};
  if (name == "matern32") return Matern{MaternNu::three_halves, length_scale};
  if (name == "matern52") return Matern{MaternNu::five_halves, length_scale};
  throw ConfigError(key + ": unknown action kernel `" + name +
                    "` (se|linear|matern12|matern32|matern52)");
}

inline std::string policy_label(const std::string& key) {
  if (key == "periodic") return "periodic-gp-ucb";
  if (key == "gp") return "gp-ucb";
  if (key == "cgp") return "c-gp-ucb";
  if (key == "rgp") return "r-gp-ucb";
  if (key == "tvgp") return "tv-gp-ucb";
  if (key == "oracle") return "oracle";
  throw ConfigError("policies: unknown policy `" + key +
                    "` (periodic|gp|cgp|rgp|tvgp|oracle)");
}

}  // namespace detail

// Parse a config file into raw key/value pairs.
inline std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path.string());
  }
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim_copy(line);
    if (t.empty() || t.front() == '#') {
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected key=value, got `" + t + "`");
    }
    const std::string key = detail::trim_copy(t.substr(0, eq));
    const std::string value = detail::trim_copy(t.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": empty key");
    }
    if (out.count(key)) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": duplicate key `" +
                        key + "`");
    }
    out[key] = value;
  }
  return out;
}

struct CliOverrides {
  std::optional<RunMode> mode;
  std::optional<std::uint64_t> seed;
  std::optional<int> replications;
  std::optional<std::string> out_dir;
};

// Resolve raw keys + CLI overrides into a validated ExperimentConfig.
inline ExperimentConfig resolve_config(const std::map<std::string, std::string>& raw,
                                       const CliOverrides& overrides = {}) {
  using detail::parse_bool;
  using detail::parse_number;

  detail::KeyBag bag;
  for (const auto& [k, v] : raw) {
    bag.insert(k, v, "config");
  }

  ExperimentConfig cfg;

  // -- mode ---------------------------------------------------------------
  if (overrides.mode) {
    cfg.mode = *overrides.mode;
    bag.take("mode");  // a config-file mode is overridden by the subcommand
  } else if (auto v = bag.take("mode")) {
    if (*v == "synthetic") cfg.mode = RunMode::synthetic;
    else if (*v == "replay") cfg.mode = RunMode::replay;
    else if (*v == "sweep-tau") cfg.mode = RunMode::sweep_tau;
    else if (*v == "info-gain") cfg.mode = RunMode::info_gain;
    else throw ConfigError("mode: `" + *v + "` is not synthetic|replay|sweep-tau|info-gain");
  } else {
    throw ConfigError("mode: required (set `mode=` in the config or use a subcommand)");
  }

  // -- mode-dependent defaults ---------------------------------------------
  const bool replay_mode = cfg.mode == RunMode::replay;
  const bool sweep_mode = cfg.mode == RunMode::sweep_tau;
  cfg.tau = replay_mode ? 24 : (sweep_mode ? 24 : 20);
  cfg.noise.variance = replay_mode ? 0.5 : 1.0;
  cfg.horizon = replay_mode ? 192 : 200;
  cfg.replications = replay_mode ? 1 : 20;

  // -- scalars --------------------------------------------------------------
  if (overrides.seed) {
    cfg.seed = *overrides.seed;
    bag.take("seed");
  } else if (auto v = bag.take("seed")) {
    cfg.seed = parse_number<std::uint64_t>("seed", *v);
  } else {
    throw ConfigError("seed: required (no wall-clock default; set `seed=` or pass --seed)");
  }

  if (overrides.replications) {
    cfg.replications = *overrides.replications;
    bag.take("replications");
  } else if (auto v = bag.take("replications")) {
    cfg.replications = static_cast<int>(parse_number<std::int64_t>("replications", *v));
  }
  if (cfg.replications < 1) {
    throw ConfigError("replications: must be >= 1");
  }

  if (auto v = bag.take("horizon")) {
    cfg.horizon = parse_number<std::int64_t>("horizon", *v);
  }
  if (cfg.horizon < 1) {
    throw ConfigError("horizon: must be >= 1");
  }

  if (auto v = bag.take("threads")) {
    cfg.threads = static_cast<int>(parse_number<std::int64_t>("threads", *v));
    if (cfg.threads < 0) throw ConfigError("threads: must be >= 0 (0 = auto)");
  }

  if (overrides.out_dir) {
    cfg.out_dir = *overrides.out_dir;
    bag.take("out");
  } else if (auto v = bag.take("out")) {
    cfg.out_dir = *v;
  }

  // -- environment ----------------------------------------------------------
  if (auto v = bag.take("env.tau")) {
    cfg.tau = parse_number<std::int64_t>("env.tau", *v);
  }
  if (cfg.tau < 1) throw ConfigError("env.tau: must be >= 1");
  if (auto v = bag.take("env.grid.dims")) {
    cfg.grid_dims = static_cast<int>(parse_number<std::int64_t>("env.grid.dims", *v));
    if (cfg.grid_dims < 1) throw ConfigError("env.grid.dims: must be >= 1");
  }
  if (auto v = bag.take("env.grid.points")) {
    cfg.grid_points = static_cast<int>(parse_number<std::int64_t>("env.grid.points", *v));
    if (cfg.grid_points < 1) throw ConfigError("env.grid.points: must be >= 1");
  }
  if (auto v = bag.take("env.grid.width")) {
    cfg.grid_width = parse_number<double>("env.grid.width", *v);
    if (!(cfg.grid_width > 0.0)) throw ConfigError("env.grid.width: must be > 0");
  }
  {
    double ls = 1.0;
    if (auto v = bag.take("env.action.length_scale")) {
      ls = parse_number<double>("env.action.length_scale", *v);
      if (!(ls > 0.0)) throw ConfigError("env.action.length_scale: must be > 0");
    }
    std::string name = "se";
    if (auto v = bag.take("env.action.kernel")) {
      name = *v;
    }
    cfg.env_action_kernel = detail::parse_action_kernel("env.action.kernel", name, ls);
  }
  if (auto v = bag.take("env.time.length_scale")) {
    cfg.env_time_length_scale = parse_number<double>("env.time.length_scale", *v);
    if (!(cfg.env_time_length_scale > 0.0)) {
      throw ConfigError("env.time.length_scale: must be > 0");
    }
  }
  if (auto v = bag.take("env.noise.variance")) {
    cfg.noise.variance = parse_number<double>("env.noise.variance", *v);
    if (!(cfg.noise.variance > 0.0)) throw ConfigError("env.noise.variance: must be > 0");
  }

  // -- replay ----------------------------------------------------------------
  if (auto v = bag.take("replay.path")) {
    cfg.replay_path = *v;
  }
  if (auto v = bag.take("replay.warmup")) {
    cfg.replay_warmup = parse_number<std::int64_t>("replay.warmup", *v);
    if (cfg.replay_warmup < 0) throw ConfigError("replay.warmup: must be >= 0");
  }
  if (auto v = bag.take("replay.standardize")) {
    cfg.replay_standardize = parse_bool("replay.standardize", *v);
  }
  if (auto v = bag.take("replay.warmstart")) {
    if (*v == "best-per-step") cfg.warmstart_all_pairs = false;
    else if (*v == "all-pairs") cfg.warmstart_all_pairs = true;
    else throw ConfigError("replay.warmstart: `" + *v + "` is not best-per-step|all-pairs");
  }
  if (replay_mode) {
    if (cfg.replay_path.empty()) throw ConfigError("replay.path: required in replay mode");
    if (cfg.replay_standardize && cfg.replay_warmup < 1) {
      throw ConfigError("replay.warmup: must be >= 1 when replay.standardize is on");
    }
  }

  // -- flags -------------------------------------------------------------------
  if (auto v = bag.take("ucb.exponent")) {
    if (*v == "sqrt") cfg.exponent = UcbExponent::sqrt_beta;
    else if (*v == "inverse-sqrt") cfg.exponent = UcbExponent::inverse_sqrt_beta;
    else throw ConfigError("ucb.exponent: `" + *v + "` is not sqrt|inverse-sqrt");
  }
  if (auto v = bag.take("policy.periodic.form")) {
    if (*v == "standard") cfg.periodic_form = PeriodicForm::standard;
    else if (*v == "double-period") cfg.periodic_form = PeriodicForm::double_period;
    else throw ConfigError("policy.periodic.form: `" + *v + "` is not standard|double-period");
  }

  // -- policy-shared knobs -------------------------------------------------------
  ActionKernel policy_action = cfg.env_action_kernel;
  {
    std::optional<std::string> name = bag.take("policy.action.kernel");
    std::optional<std::string> ls_raw = bag.take("policy.action.length_scale");
    if (name || ls_raw) {
      double ls = 1.0;
      if (ls_raw) {
        ls = parse_number<double>("policy.action.length_scale", *ls_raw);
        if (!(ls > 0.0)) throw ConfigError("policy.action.length_scale: must be > 0");
      } else if (const auto* se = std::get_if<SquaredExponential>(&cfg.env_action_kernel)) {
        ls = se->length_scale;
      } else if (const auto* ma = std::get_if<Matern>(&cfg.env_action_kernel)) {
        ls = ma->length_scale;
      }
      policy_action = detail::parse_action_kernel(
          "policy.action.kernel", name.value_or("se"), ls);
      if (!name) {
        // only the length scale changed; keep the environment's kernel family
        policy_action = cfg.env_action_kernel;
        std::visit(
            [&](auto& k) {
              using T = std::decay_t<decltype(k)>;
              if constexpr (!std::is_same_v<T, Linear>) {
                k.length_scale = ls;
              }
            },
            policy_action);
      }
    }
  }

  TimeIndex periodic_tau = cfg.tau;
  if (auto v = bag.take("policy.periodic.tau")) {
    periodic_tau = parse_number<std::int64_t>("policy.periodic.tau", *v);
    if (periodic_tau < 1) throw ConfigError("policy.periodic.tau: must be >= 1");
  }
  double periodic_ls = 10.0;
  if (auto v = bag.take("policy.periodic.length_scale")) {
    periodic_ls = parse_number<double>("policy.periodic.length_scale", *v);
    if (!(periodic_ls > 0.0)) throw ConfigError("policy.periodic.length_scale: must be > 0");
  }
  double cgp_ls = 10.0;
  if (auto v = bag.take("policy.cgp.length_scale")) {
    cgp_ls = parse_number<double>("policy.cgp.length_scale", *v);
    if (!(cgp_ls > 0.0)) throw ConfigError("policy.cgp.length_scale: must be > 0");
  }
  int rgp_block = 15;
  if (auto v = bag.take("policy.rgp.block")) {
    rgp_block = static_cast<int>(parse_number<std::int64_t>("policy.rgp.block", *v));
    if (rgp_block < 1) throw ConfigError("policy.rgp.block: must be >= 1");
  }
  int rgp_phase = 0;
  if (auto v = bag.take("policy.rgp.phase")) {
    rgp_phase = static_cast<int>(parse_number<std::int64_t>("policy.rgp.phase", *v));
    if (rgp_phase < 0 || rgp_phase >= rgp_block) {
      throw ConfigError("policy.rgp.phase: must lie in [0, policy.rgp.block)");
    }
  }
  double tvgp_epsilon = 0.01;
  if (auto v = bag.take("policy.tvgp.epsilon")) {
    tvgp_epsilon = parse_number<double>("policy.tvgp.epsilon", *v);
    if (!(tvgp_epsilon >= 0.0 && tvgp_epsilon < 1.0)) {
      throw ConfigError("policy.tvgp.epsilon: must lie in [0, 1)");
    }
  }

  // -- beta schedules ------------------------------------------------------------
  const Eigen::Index grid_size = [&] {
    Eigen::Index n = 1;
    for (int d = 0; d < cfg.grid_dims; ++d) {
      n *= cfg.grid_points;
    }
    return n;
  }();

  const std::string default_beta_form =
      cfg.mode == RunMode::info_gain ? "finite" : "empirical";
  auto resolve_beta = [&](const std::string& prefix,
                          const BetaSchedule* fallback) -> BetaSchedule {
    auto take = [&](const std::string& suffix) { return bag.take(prefix + suffix); };
    std::optional<std::string> form = take("form");
    std::optional<std::string> a = take("a");
    std::optional<std::string> b = take("b");
    std::optional<std::string> delta = take("delta");
    std::optional<std::string> c1 = take("c1");
    std::optional<std::string> c2 = take("c2");
    if (fallback && !form && !a && !b && !delta && !c1 && !c2) {
      return *fallback;
    }
    const std::string f = form.value_or(fallback ? std::string("") : default_beta_form);
    if (!f.empty() && f != "empirical" && f != "finite" && f != "continuous") {
      throw ConfigError(prefix + "form: `" + f + "` is not empirical|finite|continuous");
    }
    BetaSchedule base = fallback && f.empty() ? *fallback : [&]() -> BetaSchedule {
      const std::string& form_name = f.empty() ? default_beta_form : f;
      if (form_name == "empirical") return EmpiricalBeta{};
      if (form_name == "finite")
        return FiniteArmBeta{static_cast<int>(grid_size), 0.1};
      return ContinuousBoxBeta{cfg.grid_dims, cfg.grid_width, 0.1, 1.0, 1.0};
    }();
    std::visit(
        [&](auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, EmpiricalBeta>) {
            if (a) s.a = parse_number<double>(prefix + "a", *a);
            if (b) s.b = parse_number<double>(prefix + "b", *b);
            if (delta || c1 || c2) {
              throw ConfigError(prefix + "delta/c1/c2 do not apply to the empirical form");
            }
          } else if constexpr (std::is_same_v<T, FiniteArmBeta>) {
            if (delta) s.delta = parse_number<double>(prefix + "delta", *delta);
            if (a || b || c1 || c2) {
              throw ConfigError(prefix + "a/b/c1/c2 do not apply to the finite form");
            }
          } else {
            if (delta) s.delta = parse_number<double>(prefix + "delta", *delta);
            if (c1) s.c1 = parse_number<double>(prefix + "c1", *c1);
            if (c2) s.c2 = parse_number<double>(prefix + "c2", *c2);
            if (a || b) {
              throw ConfigError(prefix + "a/b do not apply to the continuous form");
            }
          }
        },
        base);
    validate(base);
    return base;
  };

  const BetaSchedule shared_beta = resolve_beta("beta.", nullptr);

  // -- policy list ------------------------------------------------------------------
  std::vector<std::string> policy_keys = {"periodic", "gp", "cgp", "rgp", "tvgp"};
  if (auto v = bag.take("policies")) {
    policy_keys = detail::split_list(*v);
    if (policy_keys.empty()) {
      throw ConfigError("policies: list must not be empty");
    }
  }

  auto build_model = [&](const std::string& key, TimeIndex tau_for_periodic) -> PolicyModel {
    if (key == "periodic") {
      return PeriodicGpUcbSpec{policy_action,
                               PeriodicTime{periodic_ls, tau_for_periodic, cfg.periodic_form}};
    }
    if (key == "gp") return GpUcbSpec{policy_action};
    if (key == "cgp") return CGpUcbSpec{policy_action, SqExpTime{cgp_ls}};
    if (key == "rgp") return RGpUcbSpec{policy_action, rgp_block, rgp_phase};
    if (key == "tvgp") return TvGpUcbSpec{policy_action, DecayTime{tvgp_epsilon}};
    throw ConfigError("policies: unknown policy `" + key + "`");
  };

  // Per-policy beta overrides are consumed for every known policy so that an
  // override for an inactive policy is not misreported as an unknown key.
  std::map<std::string, BetaSchedule> betas;
  for (const std::string key : {"periodic", "gp", "cgp", "rgp", "tvgp"}) {
    betas.emplace(key, resolve_beta("policy." + key + ".beta.", &shared_beta));
  }

  for (const auto& [key, schedule] : betas) {
    PolicySpec spec{build_model(key, periodic_tau), schedule, cfg.noise, cfg.exponent};
    validate(spec);
    cfg.prototype_specs.emplace(key, std::move(spec));
  }

  for (const std::string& key : policy_keys) {
    PolicyInstance inst;
    inst.key = key;
    inst.label = detail::policy_label(key);
    if (key == "oracle") {
      inst.oracle = true;
    } else {
      auto it = cfg.prototype_specs.find(key);
      if (it == cfg.prototype_specs.end()) {
        throw ConfigError("policies: unknown policy `" + key + "`");
      }
      inst.spec = it->second;
    }
    for (const auto& other : cfg.policies) {
      if (other.key == key) {
        throw ConfigError("policies: `" + key + "` listed twice");
      }
    }
    cfg.policies.push_back(std::move(inst));
  }

  // -- sweep / info-gain --------------------------------------------------------------
  cfg.sweep_taus = {20, 22, 26, 28};
  if (auto v = bag.take("sweep.taus")) {
    cfg.sweep_taus.clear();
    for (const auto& item : detail::split_list(*v)) {
      const TimeIndex tau = parse_number<std::int64_t>("sweep.taus", item);
      if (tau < 1) throw ConfigError("sweep.taus: values must be >= 1");
      cfg.sweep_taus.push_back(tau);
    }
    if (cfg.sweep_taus.empty()) throw ConfigError("sweep.taus: list must not be empty");
  }
  cfg.sweep_baselines = {"gp", "cgp"};
  if (auto v = bag.take("sweep.baselines")) {
    cfg.sweep_baselines = detail::split_list(*v);
    for (const auto& b : cfg.sweep_baselines) {
      if (b == "periodic") {
        throw ConfigError("sweep.baselines: `periodic` is swept, not a baseline");
      }
      detail::policy_label(b);
    }
  }
  if (auto v = bag.take("infogain.trials")) {
    cfg.infogain_trials = static_cast<int>(parse_number<std::int64_t>("infogain.trials", *v));
    if (cfg.infogain_trials < 1) throw ConfigError("infogain.trials: must be >= 1");
  }
  if (cfg.mode == RunMode::info_gain && cfg.horizon % cfg.tau != 0) {
    throw ConfigError("horizon: info-gain mode needs horizon to be a multiple of env.tau (got " +
                      std::to_string(cfg.horizon) + " vs tau " + std::to_string(cfg.tau) + ")");
  }

  if (!bag.empty()) {
    throw ConfigError(bag.leftover_message());
  }

  // -- canonical echo -------------------------------------------------------------------
  auto put = [&](const std::string& k, const std::string& v) { cfg.resolved.emplace_back(k, v); };
  auto fmt_d = [](double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
  };
  put("mode", to_string(cfg.mode));
  put("seed", std::to_string(cfg.seed));
  put("replications", std::to_string(cfg.replications));
  put("horizon", std::to_string(cfg.horizon));
  put("threads", std::to_string(cfg.threads));
  put("out", cfg.out_dir);
  put("env.tau", std::to_string(cfg.tau));
  put("env.grid.dims", std::to_string(cfg.grid_dims));
  put("env.grid.points", std::to_string(cfg.grid_points));
  put("env.grid.width", fmt_d(cfg.grid_width));
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, SquaredExponential>) {
          put("env.action.kernel", "se");
          put("env.action.length_scale", fmt_d(k.length_scale));
        } else if constexpr (std::is_same_v<T, Linear>) {
          put("env.action.kernel", "linear");
        } else {
          put("env.action.kernel", k.nu == MaternNu::half          ? "matern12"
                                   : k.nu == MaternNu::three_halves ? "matern32"
                                                                     : "matern52");
          put("env.action.length_scale", fmt_d(k.length_scale));
        }
      },
      cfg.env_action_kernel);
  put("env.time.length_scale", fmt_d(cfg.env_time_length_scale));
  put("env.noise.variance", fmt_d(cfg.noise.variance));
  if (cfg.mode == RunMode::replay) {
    put("replay.path", cfg.replay_path);
    put("replay.warmup", std::to_string(cfg.replay_warmup));
    put("replay.standardize", cfg.replay_standardize ? "true" : "false");
    put("replay.warmstart", cfg.warmstart_all_pairs ? "all-pairs" : "best-per-step");
  }
  {
    std::string list;
    for (const auto& p : cfg.policies) {
      list += (list.empty() ? "" : ",") + p.key;
    }
    put("policies", list);
  }
  put("policy.periodic.tau", std::to_string(periodic_tau));
  put("policy.periodic.length_scale", fmt_d(periodic_ls));
  put("policy.periodic.form",
      cfg.periodic_form == PeriodicForm::standard ? "standard" : "double-period");
  put("policy.cgp.length_scale", fmt_d(cgp_ls));
  put("policy.rgp.block", std::to_string(rgp_block));
  put("policy.rgp.phase", std::to_string(rgp_phase));
  put("policy.tvgp.epsilon", fmt_d(tvgp_epsilon));
  auto echo_beta = [&](const std::string& prefix, const BetaSchedule& s) {
    std::visit(
        [&](const auto& b) {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, EmpiricalBeta>) {
            put(prefix + "form", "empirical");
            put(prefix + "a", fmt_d(b.a));
            put(prefix + "b", fmt_d(b.b));
          } else if constexpr (std::is_same_v<T, FiniteArmBeta>) {
            put(prefix + "form", "finite");
            put(prefix + "delta", fmt_d(b.delta));
          } else {
            put(prefix + "form", "continuous");
            put(prefix + "delta", fmt_d(b.delta));
            put(prefix + "c1", fmt_d(b.c1));
            put(prefix + "c2", fmt_d(b.c2));
          }
        },
        s);
  };
  echo_beta("beta.", shared_beta);
  for (const auto& [key, spec] : cfg.prototype_specs) {
    echo_beta("policy." + key + ".beta.", spec.schedule);
  }
  put("ucb.exponent", cfg.exponent == UcbExponent::sqrt_beta ? "sqrt" : "inverse-sqrt");
  if (cfg.mode == RunMode::sweep_tau) {
    std::string list;
    for (TimeIndex t : cfg.sweep_taus) {
      list += (list.empty() ? "" : ",") + std::to_string(t);
    }
    put("sweep.taus", list);
    std::string bl;
    for (const auto& b : cfg.sweep_baselines) {
      bl += (bl.empty() ? "" : ",") + b;
    }
    put("sweep.baselines", bl);
  }
  if (cfg.mode == RunMode::info_gain) {
    put("infogain.trials", std::to_string(cfg.infogain_trials));
  }

  return cfg;
}

}  // namespace gpb
