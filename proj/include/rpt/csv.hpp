#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpt/core.hpp"
#include "rpt/trainer.hpp"

namespace rpt {

// Floats in CSV outputs carry 9 significant digits.
inline std::string format_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline constexpr const char* kMetricsCsvHeader =
    "episode,env_steps,return,outcome,lambda,cumulative_violations,risk_truncations";

inline std::string metrics_to_csv(const RunMetrics& m) {
  std::ostringstream out;
  out << kMetricsCsvHeader << "\n";
  for (const EpisodeRecord& r : m.episodes) {
    out << r.episode << ',' << r.env_steps << ',' << format_g9(r.undiscounted_return)
        << ',' << outcome_name(r.outcome) << ',' << format_g9(r.lambda) << ','
        << r.cumulative_violations << ',' << r.cumulative_risk_truncations << "\n";
  }
  return out.str();
}

inline TrajectoryOutcome parse_outcome(const std::string& name) {
  if (name == "reached-unsafe") return TrajectoryOutcome::ReachedUnsafe;
  if (name == "risk-truncated") return TrajectoryOutcome::RiskTruncated;
  if (name == "horizon-end") return TrajectoryOutcome::HorizonEnd;
  if (name == "goal-terminal") return TrajectoryOutcome::GoalTerminal;
  throw std::runtime_error("unknown outcome '" + name + "'");
}

namespace csv_detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace csv_detail

// Strict reader for the metrics schema above; `origin` names the file in
// error messages.
inline std::vector<EpisodeRecord> parse_metrics_csv(const std::string& text,
                                                    const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsCsvHeader)
    throw std::runtime_error(origin + ": missing or malformed metrics header");
  std::vector<EpisodeRecord> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = csv_detail::split(line, ',');
    if (f.size() != 7)
      throw std::runtime_error(origin + ": line " + std::to_string(line_no) +
                               ": expected 7 fields, got " + std::to_string(f.size()));
    try {
      EpisodeRecord r;
      r.episode = std::stoi(f[0]);
      r.env_steps = std::stol(f[1]);
      r.undiscounted_return = std::stod(f[2]);
      r.outcome = parse_outcome(f[3]);
      r.lambda = std::stod(f[4]);
      r.cumulative_violations = std::stol(f[5]);
      r.cumulative_risk_truncations = std::stol(f[6]);
      out.push_back(r);
    } catch (const std::exception& e) {
      throw std::runtime_error(origin + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace rpt
