#include "skillab/pipeline/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace skillab::pipeline {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw UsageError("not a number: '" + std::string(s) + "'");
  return v;
}

template <typename Int>
Int parse_int(std::string_view s) {
  Int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw UsageError("not an integer: '" + std::string(s) + "'");
  return v;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string_view::npos ? s.size() : comma;
    out.push_back(trim(s.substr(start, end - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<std::size_t> parse_sizes(std::string_view s) {
  std::vector<std::size_t> out;
  if (trim(s).empty()) return out;
  for (const auto& item : split_list(s)) out.push_back(parse_int<std::size_t>(item));
  return out;
}

template <std::size_t N>
std::string join_doubles(const std::array<double, N>& v) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

template <std::size_t N>
std::array<double, N> parse_doubles(std::string_view s) {
  const auto items = split_list(s);
  if (items.size() != N) throw UsageError("expected " + std::to_string(N) + " comma-separated numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = parse_double(items[i]);
  return out;
}

bool parse_bool(std::string_view s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw UsageError("expected true or false, got '" + std::string(s) + "'");
}

struct Field {
  ConfigKey key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

#define SK_DOUBLE(sec, name, member, doc)                                                  \
  Field {                                                                                  \
    {sec, name, doc}, [](const ExperimentConfig& c) { return fmt(c.member); },            \
        [](ExperimentConfig& c, std::string_view v) { c.member = parse_double(v); }        \
  }
#define SK_SIZE(sec, name, member, doc)                                                          \
  Field {                                                                                        \
    {sec, name, doc}, [](const ExperimentConfig& c) { return std::to_string(c.member); },       \
        [](ExperimentConfig& c, std::string_view v) { c.member = parse_int<std::size_t>(v); }    \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      SK_DOUBLE("env", "mass", env.mass, "vehicle mass, kg"),
      SK_DOUBLE("env", "arm_length", env.arm_length, "center to rotor, m"),
      {{"env", "inertia", "body diagonal inertia xx,yy,zz, kg m^2"},
       [](const ExperimentConfig& c) { return join_doubles(c.env.inertia); },
       [](ExperimentConfig& c, std::string_view v) { c.env.inertia = parse_doubles<3>(v); }},
      {{"env", "efficiency", "per-motor produced/commanded thrust ratio"},
       [](const ExperimentConfig& c) { return join_doubles(c.env.efficiency); },
       [](ExperimentConfig& c, std::string_view v) { c.env.efficiency = parse_doubles<4>(v); }},
      SK_DOUBLE("env", "gravity", env.gravity, "m/s^2"),
      SK_DOUBLE("env", "motor_time_constant", env.motor_time_constant, "first-order motor lag, s"),
      SK_DOUBLE("env", "torque_coefficient", env.torque_coefficient, "yaw torque per newton of thrust, m"),
      SK_DOUBLE("env", "force_scale", env.force_scale, "newtons per normalized force unit"),
      SK_DOUBLE("env", "max_motor_force", env.max_motor_force, "per-propeller thrust ceiling, N"),
      SK_DOUBLE("env", "control_period", env.control_period, "s"),
      SK_DOUBLE("env", "noise_position", env.noise.position, "measurement noise std, m"),
      SK_DOUBLE("env", "noise_attitude", env.noise.attitude, "measurement noise std, rad"),
      SK_DOUBLE("env", "noise_velocity", env.noise.velocity, "measurement noise std, m/s"),
      SK_DOUBLE("env", "noise_angular_velocity", env.noise.angular_velocity, "measurement noise std, rad/s"),
      {{"env", "delay_steps", "actuation delay, control periods"},
       [](const ExperimentConfig& c) { return std::to_string(c.env.delay_steps); },
       [](ExperimentConfig& c, std::string_view v) { c.env.delay_steps = parse_int<int>(v); }},
      SK_SIZE("env", "episode_steps", episode_steps, "simulator-stage episode length"),
      SK_DOUBLE("env", "integral_limit", integral_limit, "controller anti-windup clamp"),

      SK_DOUBLE("gap", "added_mass", gap.added_mass, "kg added to the plant"),
      {{"gap", "efficiency_multiplier", "per-motor efficiency factors"},
       [](const ExperimentConfig& c) { return join_doubles(c.gap.efficiency_multiplier); },
       [](ExperimentConfig& c, std::string_view v) { c.gap.efficiency_multiplier = parse_doubles<4>(v); }},
      SK_DOUBLE("gap", "observation_noise", gap.observation_noise, "noise std added on every measured channel"),
      {{"gap", "delay_steps", "extra actuation delay, control periods"},
       [](const ExperimentConfig& c) { return std::to_string(c.gap.delay_steps); },
       [](ExperimentConfig& c, std::string_view v) { c.gap.delay_steps = parse_int<int>(v); }},

      SK_SIZE("features", "dim", dim, "simulator feature dimension d"),
      SK_SIZE("features", "residual_dim", residual_dim, "residual feature dimension s"),
      {{"features", "hidden", "hidden widths of the phi and mu networks"},
       [](const ExperimentConfig& c) { return join_sizes(c.feature_hidden); },
       [](ExperimentConfig& c, std::string_view v) { c.feature_hidden = parse_sizes(v); }},
      SK_DOUBLE("features", "lambda", lambda, "orthogonality penalty weight"),
      SK_DOUBLE("features", "lr", feature_lr, "Adam step for phi and mu"),

      {{"actor", "hidden", "hidden widths of the log-std head"},
       [](const ExperimentConfig& c) { return join_sizes(c.actor_hidden); },
       [](ExperimentConfig& c, std::string_view v) { c.actor_hidden = parse_sizes(v); }},
      SK_DOUBLE("actor", "init_log_std", init_log_std, "initial log std"),
      SK_DOUBLE("actor", "log_std_min", log_std_min, "lower log std bound"),
      SK_DOUBLE("actor", "log_std_max", log_std_max, "upper log std bound"),
      SK_DOUBLE("actor", "lr", actor_lr, "Adam step for gains and head, simulator stage"),
      SK_DOUBLE("actor", "transfer_lr", transfer_actor_lr, "Adam step for gains and head, real stage"),

      SK_DOUBLE("planner", "gamma", gamma, "discount"),
      SK_DOUBLE("planner", "tau", tau, "entropy temperature"),
      SK_DOUBLE("planner", "tau_pi", tau_pi, "KL anchor weight, real stage"),
      SK_DOUBLE("planner", "tau_target", tau_target, "target network blending rate"),
      SK_DOUBLE("planner", "critic_lr", critic_lr, "Adam step for w1 and w2"),

      SK_SIZE("train", "batch_size", batch_size, "transitions per gradient step"),
      SK_SIZE("train", "buffer_capacity", buffer_capacity, "replay capacity"),
      SK_SIZE("train", "sim_transitions", sim_transitions, "simulator-stage transition budget"),
      SK_SIZE("train", "sim_updates_per_episode", sim_updates_per_episode, "gradient steps after each sim episode"),
      SK_SIZE("train", "real_episodes", real_episodes, "real-stage episode budget N"),
      {{"train", "real_task", "task flown in the real stage"},
       [](const ExperimentConfig& c) { return std::string(task_name(c.real_task)); },
       [](ExperimentConfig& c, std::string_view v) { c.real_task = parse_task(v); }},
      SK_SIZE("train", "discovery_steps", discovery_steps, "residual feature steps per real episode"),
      SK_SIZE("train", "evaluation_steps", evaluation_steps, "critic steps per real episode"),
      SK_SIZE("train", "improvement_steps", improvement_steps, "actor steps per real episode"),
      {{"train", "skill_transfer_only", "skip discovery and plan over simulator features only"},
       [](const ExperimentConfig& c) { return std::string(c.skill_transfer_only ? "true" : "false"); },
       [](ExperimentConfig& c, std::string_view v) { c.skill_transfer_only = parse_bool(v); }},

      {{"eval", "task", "hover, takeoff-hover-land or figure8"},
       [](const ExperimentConfig& c) { return std::string(task_name(c.eval_task)); },
       [](ExperimentConfig& c, std::string_view v) { c.eval_task = parse_task(v); }},
      SK_SIZE("eval", "episodes", eval_episodes, "evaluation rollouts"),

      {{"run", "seed", "root of every random stream"},
       [](const ExperimentConfig& c) { return std::to_string(c.seed); },
       [](ExperimentConfig& c, std::string_view v) { c.seed = parse_int<std::uint64_t>(v); }},
  };
  return table;
}

#undef SK_DOUBLE
#undef SK_SIZE

void require(bool ok, const char* key, const char* what) {
  if (!ok) throw UsageError(std::string("config: ") + key + " " + what);
}

}  // namespace

Task parse_task(std::string_view name) {
  if (name == "hover") return Task::kHover;
  if (name == "takeoff-hover-land") return Task::kTakeoffHoverLand;
  if (name == "figure8") return Task::kFigure8;
  throw UsageError("unknown task '" + std::string(name) + "' (expected hover, takeoff-hover-land or figure8)");
}

std::string_view task_name(Task t) {
  switch (t) {
    case Task::kHover: return "hover";
    case Task::kTakeoffHoverLand: return "takeoff-hover-land";
    case Task::kFigure8: return "figure8";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  try {
    env.validate();
    gap.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  require(episode_steps > 0, "env.episode_steps", "must be positive");
  require(integral_limit > 0.0, "env.integral_limit", "must be positive");
  require(dim > 0, "features.dim", "must be positive");
  require(residual_dim > 0, "features.residual_dim", "must be positive");
  require(lambda >= 0.0, "features.lambda", "must be nonnegative");
  require(feature_lr > 0.0, "features.lr", "must be positive");
  require(log_std_min < log_std_max, "actor.log_std_min", "must be below actor.log_std_max");
  require(init_log_std >= log_std_min && init_log_std <= log_std_max, "actor.init_log_std", "must lie within bounds");
  require(actor_lr > 0.0, "actor.lr", "must be positive");
  require(transfer_actor_lr > 0.0, "actor.transfer_lr", "must be positive");
  require(gamma >= 0.0 && gamma < 1.0, "planner.gamma", "must lie in [0, 1)");
  require(tau > 0.0, "planner.tau", "must be positive");
  require(tau_pi >= 0.0, "planner.tau_pi", "must be nonnegative");
  require(tau_target > 0.0 && tau_target <= 1.0, "planner.tau_target", "must lie in (0, 1]");
  require(critic_lr > 0.0, "planner.critic_lr", "must be positive");
  require(batch_size > 0, "train.batch_size", "must be positive");
  require(buffer_capacity >= batch_size, "train.buffer_capacity", "must hold at least one batch");
  require(real_episodes > 0, "train.real_episodes", "must be positive");
  require(eval_episodes > 0, "eval.episodes", "must be positive");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.key.section != section) {
      if (!section.empty()) out << '\n';
      section = f.key.section;
      out << '[' << section << "]\n";
    }
    out << "# " << f.key.description << '\n' << f.key.key << " = " << f.get(*this) << '\n';
  }
  return out.str();
}

ExperimentConfig ExperimentConfig::from_text(std::string_view text) {
  std::map<std::pair<std::string, std::string>, const Field*> index;
  for (const auto& f : fields()) index[{f.key.section, f.key.key}] = &f;
  std::set<std::string> sections;
  for (const auto& f : fields()) sections.insert(f.key.section);

  ExperimentConfig cfg;
  std::set<std::pair<std::string, std::string>> seen;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  for (int line_no = 1; std::getline(in, raw); ++line_no) {
    const std::string line = trim(raw);
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError(where + "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!sections.count(section)) throw UsageError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(where + "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) throw UsageError(where + "key '" + key + "' outside any section");
    const auto it = index.find({section, key});
    if (it == index.end()) throw UsageError(where + "unknown key '" + section + "." + key + "'");
    if (!seen.insert({section, key}).second) throw UsageError(where + "duplicate key '" + section + "." + key + "'");
    try {
      it->second->set(cfg, value);
    } catch (const UsageError& e) {
      throw UsageError(where + section + "." + key + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  out << to_text();
  if (!out) throw std::runtime_error("cannot write config file " + path.string());
}

std::uint64_t ExperimentConfig::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

mellinger::ControllerConfig ExperimentConfig::controller() const {
  auto c = mellinger::ControllerConfig::from_params(env);
  c.integral_limit = integral_limit;
  return c;
}

mellinger::ActorConfig ExperimentConfig::actor() const {
  return mellinger::ActorConfig{actor_hidden, init_log_std, log_std_min, log_std_max};
}

std::vector<ConfigKey> config_keys() {
  std::vector<ConfigKey> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

}  // namespace skillab::pipeline
