#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rpt/envs.hpp"
#include "rpt/tensorio.hpp"
#include "rpt/trainer.hpp"

namespace rpt {

// Raised for any structural, type, unknown-key, or semantic problem in a
// config document. The message always names the offending key or section.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace cfg_detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Comments start at a '#' or ';' that opens the line or follows whitespace,
// so values themselves may not contain either marker after a space.
inline std::string strip_comment(const std::string& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((s[i] == '#' || s[i] == ';') &&
        (i == 0 || std::isspace(static_cast<unsigned char>(s[i - 1]))))
      return s.substr(0, i);
  }
  return s;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long out = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (!v.empty() && v.front() == '-')
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  try {
    std::size_t pos = 0;
    const std::uint64_t out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

// "terminal-only" -> 1, "last-k(N)" -> N.
inline int parse_positives(const std::string& key, const std::string& v) {
  if (v == "terminal-only") return 1;
  if (v.rfind("last-k(", 0) == 0 && v.size() > 8 && v.back() == ')') {
    const int k =
        static_cast<int>(parse_int(key, v.substr(7, v.size() - 8)));
    if (k < 1) throw ConfigError(key + ": last-k count must be >= 1");
    return k;
  }
  throw ConfigError(key + ": expected terminal-only or last-k(N), got '" + v + "'");
}

inline std::string render_positives(int k) {
  if (k == 1) return "terminal-only";
  return "last-k(" + std::to_string(k) + ")";
}

}  // namespace cfg_detail

struct IniEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

// Sections in brackets, key = value pairs, full-line comments with '#' or
// ';'. Duplicate keys within a section are rejected.
inline std::vector<IniEntry> parse_ini(const std::string& text) {
  std::vector<IniEntry> out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = cfg_detail::trim(cfg_detail::strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header '" +
                          line + "'");
      section = cfg_detail::trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value, got '" +
                        line + "'");
    if (section.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": key outside any section");
    IniEntry e;
    e.section = section;
    e.key = cfg_detail::trim(line.substr(0, eq));
    e.value = cfg_detail::trim(line.substr(eq + 1));
    e.line = line_no;
    if (e.key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    const std::string full = e.section + "." + e.key;
    if (!seen.insert(full).second) throw ConfigError("duplicate key " + full);
    out.push_back(std::move(e));
  }
  return out;
}

// Builds a RunSpec from config text. Unknown sections and keys are rejected;
// every message names the offending key. Geometry and semantic validation run
// eagerly so an invalid document never reaches training.
inline RunSpec load_run_spec(const std::string& text) {
  RunSpec s;
  using cfg_detail::parse_bool;
  using cfg_detail::parse_double;
  using cfg_detail::parse_int;
  using cfg_detail::parse_positives;
  using cfg_detail::parse_uint;

  for (const IniEntry& e : parse_ini(text)) {
    const std::string full = e.section + "." + e.key;
    const std::string& v = e.value;
    if (e.section == "environment") {
      if (e.key == "id") s.env.id = v;
      else if (e.key == "gamma") s.env.gamma = parse_double(full, v);
      else if (e.key == "cost_threshold") {
        s.env.cost_threshold = parse_double(full, v);
        if (s.env.cost_threshold != 0.0)
          throw ConfigError(full + ": cost_threshold must be 0");
      } else if (e.key == "width") s.env.width = static_cast<int>(parse_int(full, v));
      else if (e.key == "height") s.env.height = static_cast<int>(parse_int(full, v));
      else if (e.key == "step_reward") s.env.step_reward = parse_double(full, v);
      else if (e.key == "goal_reward") s.env.goal_reward = parse_double(full, v);
      else if (e.key == "cliff_reward") s.env.cliff_reward = parse_double(full, v);
      else if (e.key == "dt") s.env.dt = parse_double(full, v);
      else if (e.key == "unsafe_radius") s.env.unsafe_radius = parse_double(full, v);
      else if (e.key == "fall_threshold") s.env.fall_threshold = parse_double(full, v);
      else throw ConfigError("unknown key " + full);
    } else if (e.section == "classifier") {
      if (e.key == "mode") s.classifier.mode = v;
      else if (e.key == "hidden_dim") s.classifier.hidden_dim = static_cast<int>(parse_int(full, v));
      else if (e.key == "learning_rate") s.classifier.learning_rate = parse_double(full, v);
      else if (e.key == "weight_decay") s.classifier.weight_decay = parse_double(full, v);
      else if (e.key == "minibatches") s.classifier.minibatches = static_cast<int>(parse_int(full, v));
      else if (e.key == "batch_size") s.classifier.batch_size = static_cast<int>(parse_int(full, v));
      else if (e.key == "unsafe_window") s.classifier.unsafe_window = static_cast<int>(parse_int(full, v));
      else if (e.key == "positives") s.classifier.positives_last_k = parse_positives(full, v);
      else throw ConfigError("unknown key " + full);
    } else if (e.section == "shaping") {
      if (e.key == "eta") s.shaping.eta = parse_double(full, v);
      else if (e.key == "margin") s.shaping.margin = parse_double(full, v);
      else if (e.key == "initial_lambda") s.shaping.initial_lambda = parse_double(full, v);
      else if (e.key == "pin_lambda") s.shaping.pin_lambda = parse_bool(full, v);
      else if (e.key == "p0_policy") s.shaping.p0_policy = v;
      else if (e.key == "lambda_h_policy") s.shaping.lambda_h_policy = v;
      else if (e.key == "fixed_lambda") s.shaping.fixed_lambda = parse_double(full, v);
      else if (e.key == "alpha_lambda") s.shaping.alpha_lambda = parse_double(full, v);
      else throw ConfigError("unknown key " + full);
    } else if (e.section == "agent") {
      if (e.key == "kind") s.agent.kind = v;
      else if (e.key == "learning_rate") s.agent.learning_rate = parse_double(full, v);
      else if (e.key == "q_init") s.agent.q_init = parse_double(full, v);
      else if (e.key == "epsilon") s.agent.epsilon = parse_double(full, v);
      else if (e.key == "epsilon_min") s.agent.epsilon_min = parse_double(full, v);
      else if (e.key == "epsilon_decay") s.agent.epsilon_decay = parse_double(full, v);
      else if (e.key == "hidden_dim") s.agent.hidden_dim = static_cast<int>(parse_int(full, v));
      else if (e.key == "actor_lr") s.agent.actor_lr = parse_double(full, v);
      else if (e.key == "critic_lr") s.agent.critic_lr = parse_double(full, v);
      else if (e.key == "entropy_coef") s.agent.entropy_coef = parse_double(full, v);
      else throw ConfigError("unknown key " + full);
    } else if (e.section == "training") {
      if (e.key == "strategy") s.training.strategy = v;
      else if (e.key == "episodes") s.training.episodes = static_cast<int>(parse_int(full, v));
      else if (e.key == "max_steps") s.training.max_steps = static_cast<int>(parse_int(full, v));
      else if (e.key == "policy_minibatches")
        s.training.policy_minibatches = static_cast<int>(parse_int(full, v));
      else if (e.key == "policy_batch_size")
        s.training.policy_batch_size = static_cast<int>(parse_int(full, v));
      else if (e.key == "replay_capacity")
        s.training.replay_capacity = static_cast<int>(parse_int(full, v));
      else if (e.key == "blocked_replay_copies")
        s.training.blocked_replay_copies = static_cast<int>(parse_int(full, v));
      else if (e.key == "seed") s.training.seed = parse_uint(full, v);
      else throw ConfigError("unknown key " + full);
    } else if (e.section == "output") {
      if (e.key == "max_return") s.output.max_return = parse_double(full, v);
      else if (e.key == "log_every") s.output.log_every = static_cast<int>(parse_int(full, v));
      else throw ConfigError("unknown key " + full);
    } else {
      throw ConfigError("unknown section [" + e.section + "]");
    }
  }

  try {
    validate_run_spec(s);
    make_environment(s.env);  // trial construction surfaces geometry errors now
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  return s;
}

inline RunSpec load_run_spec_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return load_run_spec(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Canonical echo of a RunSpec. Every key is present in a fixed order with
// full-precision values, so the echo re-parses to an identical spec and is
// byte-stable across runs.
inline std::string resolved_config(const RunSpec& s) {
  std::ostringstream out;
  const auto num = [](double v) { return format_full(v); };
  out << "[environment]\n";
  out << "id = " << s.env.id << "\n";
  out << "gamma = " << num(s.env.gamma) << "\n";
  out << "cost_threshold = " << num(s.env.cost_threshold) << "\n";
  out << "width = " << s.env.width << "\n";
  out << "height = " << s.env.height << "\n";
  out << "step_reward = " << num(s.env.step_reward) << "\n";
  out << "goal_reward = " << num(s.env.goal_reward) << "\n";
  if (s.env.cliff_reward) out << "cliff_reward = " << num(*s.env.cliff_reward) << "\n";
  out << "dt = " << num(s.env.dt) << "\n";
  out << "unsafe_radius = " << num(s.env.unsafe_radius) << "\n";
  out << "fall_threshold = " << num(s.env.fall_threshold) << "\n";
  out << "\n[classifier]\n";
  out << "mode = " << s.classifier.mode << "\n";
  out << "hidden_dim = " << s.classifier.hidden_dim << "\n";
  out << "learning_rate = " << num(s.classifier.learning_rate) << "\n";
  out << "weight_decay = " << num(s.classifier.weight_decay) << "\n";
  out << "minibatches = " << s.classifier.minibatches << "\n";
  out << "batch_size = " << s.classifier.batch_size << "\n";
  out << "unsafe_window = " << s.classifier.unsafe_window << "\n";
  out << "positives = " << cfg_detail::render_positives(s.classifier.positives_last_k) << "\n";
  out << "\n[shaping]\n";
  out << "eta = " << num(s.shaping.eta) << "\n";
  out << "margin = " << num(s.shaping.margin) << "\n";
  out << "initial_lambda = " << num(s.shaping.initial_lambda) << "\n";
  out << "pin_lambda = " << (s.shaping.pin_lambda ? "true" : "false") << "\n";
  out << "p0_policy = " << s.shaping.p0_policy << "\n";
  out << "lambda_h_policy = " << s.shaping.lambda_h_policy << "\n";
  out << "fixed_lambda = " << num(s.shaping.fixed_lambda) << "\n";
  out << "alpha_lambda = " << num(s.shaping.alpha_lambda) << "\n";
  out << "\n[agent]\n";
  out << "kind = " << s.agent.kind << "\n";
  out << "learning_rate = " << num(s.agent.learning_rate) << "\n";
  out << "q_init = " << num(s.agent.q_init) << "\n";
  out << "epsilon = " << num(s.agent.epsilon) << "\n";
  out << "epsilon_min = " << num(s.agent.epsilon_min) << "\n";
  out << "epsilon_decay = " << num(s.agent.epsilon_decay) << "\n";
  out << "hidden_dim = " << s.agent.hidden_dim << "\n";
  out << "actor_lr = " << num(s.agent.actor_lr) << "\n";
  out << "critic_lr = " << num(s.agent.critic_lr) << "\n";
  out << "entropy_coef = " << num(s.agent.entropy_coef) << "\n";
  out << "\n[training]\n";
  out << "strategy = " << s.training.strategy << "\n";
  out << "episodes = " << s.training.episodes << "\n";
  out << "max_steps = " << s.training.max_steps << "\n";
  out << "policy_minibatches = " << s.training.policy_minibatches << "\n";
  out << "policy_batch_size = " << s.training.policy_batch_size << "\n";
  out << "replay_capacity = " << s.training.replay_capacity << "\n";
  out << "blocked_replay_copies = " << s.training.blocked_replay_copies << "\n";
  out << "seed = " << s.training.seed << "\n";
  out << "\n[output]\n";
  if (s.output.max_return) out << "max_return = " << num(*s.output.max_return) << "\n";
  out << "log_every = " << s.output.log_every << "\n";
  return out.str();
}

}  // namespace rpt
