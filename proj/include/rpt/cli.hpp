#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rpt/config.hpp"
#include "rpt/csv.hpp"
#include "rpt/tensorio.hpp"
#include "rpt/trainer.hpp"

namespace rpt {

// Exit codes are a stable scripting contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;    // bad flags, bad config, bad inputs
inline constexpr int kExitRuntime = 3;  // failures after validation passed

inline constexpr const char* kMetricsFileName = "metrics.csv";
inline constexpr const char* kLearnerFileName = "learner.rpt";
inline constexpr const char* kClassifierFileName = "classifier.rpt";
inline constexpr const char* kResolvedConfigFileName = "config_resolved.ini";

// ---------- checkpoint helpers ----------

inline void save_learner_file(const std::string& path, const PolicyLearner& learner) {
  TensorFile tf;
  learner.save(tf);
  tf.write_file(path);
}

inline void save_classifier_file(const std::string& path, const RiskClassifier& clf) {
  TensorFile tf;
  tf.set_attr("kind", "risk-classifier");
  tf.set_attr("input_dim", std::to_string(clf.input_dim()));
  tf.set_attr("hidden_dim", std::to_string(clf.hidden_dim()));
  const Eigen::VectorXd& p = clf.params();
  tf.add_tensor("params", {static_cast<int>(p.size())},
                std::vector<double>(p.data(), p.data() + p.size()));
  tf.write_file(path);
}

inline RiskClassifier load_classifier_file(const std::string& path) {
  const TensorFile tf = TensorFile::read_file(path);
  if (tf.attr_required("kind") != "risk-classifier")
    throw std::runtime_error(path + ": not a risk-classifier checkpoint");
  const int input_dim = static_cast<int>(std::stoll(tf.attr_required("input_dim")));
  const int hidden_dim = static_cast<int>(std::stoll(tf.attr_required("hidden_dim")));
  RiskClassifier clf(input_dim, hidden_dim, /*seed=*/0);
  const Tensor& t = tf.tensor_required("params");
  if (t.values.size() != static_cast<std::size_t>(clf.params().size()))
    throw std::runtime_error(path + ": parameter count mismatch");
  for (std::size_t i = 0; i < t.values.size(); ++i)
    clf.params()(static_cast<Eigen::Index>(i)) = t.values[i];
  return clf;
}

// Runs one training cell and writes its four artifacts. Returns the metrics
// for in-memory consumers; throws on any failure.
inline RunMetrics run_and_write(const RunSpec& spec, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  TrainingArtifacts art = run_training(spec);
  write_text_file((out_dir / kMetricsFileName).string(), metrics_to_csv(art.metrics));
  save_learner_file((out_dir / kLearnerFileName).string(), *art.learner);
  save_classifier_file((out_dir / kClassifierFileName).string(), *art.classifier);
  write_text_file((out_dir / kResolvedConfigFileName).string(), resolved_config(spec));
  return std::move(art.metrics);
}

// ---------- train ----------

inline int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
                     const std::string& out_dir, std::ostream& err = std::cerr) {
  RunSpec spec;
  try {
    spec = load_run_spec_file(config_path);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (seed) spec.training.seed = *seed;
  try {
    run_and_write(spec, out_dir);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

// ---------- eval ----------

inline int cmd_eval(const std::string& checkpoint_dir, int episodes, std::uint64_t seed,
                    std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  if (episodes <= 0) {
    err << "error: episodes must be positive\n";
    return kExitUsage;
  }
  const std::filesystem::path dir(checkpoint_dir);
  try {
    const RunSpec spec = load_run_spec_file((dir / kResolvedConfigFileName).string());
    auto env = make_environment(spec.env);
    AgentParams agent = spec.agent;
    agent.seed = spec.training.seed;
    auto learner = make_learner(*env, agent);
    const std::string learner_path = (dir / kLearnerFileName).string();
    try {
      learner->load(TensorFile::read_file(learner_path));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(learner_path + ": " + e.what());
    }
    const EvalResult res = evaluate_policy(*env, *learner, episodes, seed);
    out << format_g9(res.mean_return) << ',' << res.violations << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

// ---------- aggregation (sweep) ----------

namespace cli_detail {

// Last observation carried forward over a non-decreasing x series.
inline std::optional<double> locf_at(const std::vector<std::pair<long, double>>& series,
                                     long x) {
  std::optional<double> last;
  for (const auto& [sx, sy] : series) {
    if (sx > x) break;
    last = sy;
  }
  return last;
}

struct MeanStd {
  double mean = 0.0;
  double std_dev = 0.0;  // sample standard deviation; 0 for a single sample
  int n = 0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  out.n = static_cast<int>(xs.size());
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std_dev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

}  // namespace cli_detail

// One sweep cell's parsed metrics, tagged with its strategy.
struct SweepCell {
  std::string strategy;
  std::vector<EpisodeRecord> episodes;
};

// Mean/std of per-episode return across seeds, aligned on cumulative
// violation counts by carrying each seed's last return forward. Seeds that
// have not yet reached a violation level are left out of that row's n.
inline std::string aggregate_return_by_violations(const std::vector<SweepCell>& cells) {
  std::ostringstream out;
  out << "strategy,violations,mean_return,std_return,n\n";
  std::vector<std::string> order;
  for (const SweepCell& c : cells)
    if (std::find(order.begin(), order.end(), c.strategy) == order.end())
      order.push_back(c.strategy);
  for (const std::string& strat : order) {
    std::set<long> levels;
    std::vector<std::vector<std::pair<long, double>>> series;
    for (const SweepCell& c : cells) {
      if (c.strategy != strat) continue;
      std::vector<std::pair<long, double>> s;
      for (const EpisodeRecord& r : c.episodes) {
        levels.insert(r.cumulative_violations);
        s.emplace_back(r.cumulative_violations, r.undiscounted_return);
      }
      series.push_back(std::move(s));
    }
    for (long v : levels) {
      std::vector<double> vals;
      for (const auto& s : series)
        if (const auto y = cli_detail::locf_at(s, v)) vals.push_back(*y);
      const cli_detail::MeanStd ms = cli_detail::mean_std(vals);
      if (ms.n == 0) continue;
      out << strat << ',' << v << ',' << format_g9(ms.mean) << ','
          << format_g9(ms.std_dev) << ',' << ms.n << "\n";
    }
  }
  return out.str();
}

// Mean/std of the normalized return/violation ratio across seeds, aligned on
// cumulative env-step counts by last-observation-carried-forward.
inline std::string aggregate_ratio_by_steps(const std::vector<SweepCell>& cells,
                                            double max_return) {
  if (!(max_return > 0.0))
    throw std::invalid_argument("aggregate_ratio_by_steps: max_return must be > 0");
  std::ostringstream out;
  out << "strategy,env_steps,mean_ratio,std_ratio,n\n";
  std::vector<std::string> order;
  for (const SweepCell& c : cells)
    if (std::find(order.begin(), order.end(), c.strategy) == order.end())
      order.push_back(c.strategy);
  for (const std::string& strat : order) {
    std::set<long> levels;
    std::vector<std::vector<std::pair<long, double>>> series;
    for (const SweepCell& c : cells) {
      if (c.strategy != strat) continue;
      RunMetrics m;
      m.episodes = c.episodes;
      const std::vector<double> ratio = normalized_ratio_series(m, max_return);
      std::vector<std::pair<long, double>> s;
      for (std::size_t i = 0; i < c.episodes.size(); ++i) {
        levels.insert(c.episodes[i].env_steps);
        s.emplace_back(c.episodes[i].env_steps, ratio[i]);
      }
      series.push_back(std::move(s));
    }
    for (long v : levels) {
      std::vector<double> vals;
      for (const auto& s : series)
        if (const auto y = cli_detail::locf_at(s, v)) vals.push_back(*y);
      const cli_detail::MeanStd ms = cli_detail::mean_std(vals);
      if (ms.n == 0) continue;
      out << strat << ',' << v << ',' << format_g9(ms.mean) << ','
          << format_g9(ms.std_dev) << ',' << ms.n << "\n";
    }
  }
  return out.str();
}

// ---------- sweep ----------

namespace cli_detail {

inline std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
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

}  // namespace cli_detail

inline constexpr const char* kAggregateReturnFileName = "aggregate_return_by_violations.csv";
inline constexpr const char* kAggregateRatioFileName = "aggregate_ratio_by_steps.csv";

// Cartesian product of strategies x seeds; one output directory per cell
// named <strategy>_seed<seed>. A failing cell is reported and skipped; the
// aggregates are computed from the cells that finished.
inline int cmd_sweep(const std::string& config_path, const std::string& strategies_csv,
                     const std::string& seeds_csv, const std::string& out_dir,
                     std::ostream& err = std::cerr) {
  RunSpec base;
  try {
    base = load_run_spec_file(config_path);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;
  try {
    for (const std::string& s : cli_detail::split_list(strategies_csv)) {
      if (s.empty()) throw std::invalid_argument("empty strategy name");
      parse_strategy(s);
      strategies.push_back(s);
    }
    for (const std::string& s : cli_detail::split_list(seeds_csv))
      seeds.push_back(cfg_detail::parse_uint("--seeds", s));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  const std::filesystem::path root(out_dir);
  std::vector<SweepCell> cells;
  int failed = 0;
  for (const std::string& strat : strategies) {
    for (const std::uint64_t seed : seeds) {
      RunSpec spec = base;
      spec.training.strategy = strat;
      spec.training.seed = seed;
      const std::string cell_name = strat + "_seed" + std::to_string(seed);
      try {
        run_and_write(spec, root / cell_name);
        // Aggregate from the emitted file so the on-disk CSV is authoritative.
        const std::string path = (root / cell_name / kMetricsFileName).string();
        cells.push_back(SweepCell{strat, parse_metrics_csv(read_text_file(path), path)});
      } catch (const std::exception& e) {
        ++failed;
        err << "error: cell " << cell_name << " failed: " << e.what() << "\n";
      }
    }
  }

  try {
    std::filesystem::create_directories(root);
    write_text_file((root / kAggregateReturnFileName).string(),
                    aggregate_return_by_violations(cells));
    if (base.output.max_return)
      write_text_file((root / kAggregateRatioFileName).string(),
                      aggregate_ratio_by_steps(cells, *base.output.max_return));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return failed > 0 ? kExitRuntime : kExitOk;
}

// ---------- export-plot ----------

// Tidy series for external plotting: one row per episode per metrics file
// found directly in `dir` or one level below it.
inline int cmd_export_plot(const std::string& dir, const std::string& x_kind,
                           const std::string& y_kind,
                           std::optional<double> max_return_flag,
                           std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  if (x_kind != "violations" && x_kind != "steps") {
    err << "error: --x must be violations or steps\n";
    return kExitUsage;
  }
  if (y_kind != "return" && y_kind != "ratio") {
    err << "error: --y must be return or ratio\n";
    return kExitUsage;
  }

  const std::filesystem::path root(dir);
  std::vector<std::pair<std::string, std::filesystem::path>> found;  // series -> file
  std::error_code ec;
  if (std::filesystem::is_regular_file(root / kMetricsFileName, ec))
    found.emplace_back(root.filename().string().empty() ? std::string("run")
                                                        : root.filename().string(),
                       root / kMetricsFileName);
  if (std::filesystem::is_directory(root, ec)) {
    std::vector<std::filesystem::path> subdirs;
    for (const auto& entry : std::filesystem::directory_iterator(root))
      if (entry.is_directory() &&
          std::filesystem::is_regular_file(entry.path() / kMetricsFileName))
        subdirs.push_back(entry.path());
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& p : subdirs)
      found.emplace_back(p.filename().string(), p / kMetricsFileName);
  }
  if (found.empty()) {
    err << "error: no metrics files found in " << dir << "\n";
    return kExitUsage;
  }

  // The ratio metric needs a normalization constant: flag first, then the
  // resolved config next to each metrics file, then one at the top level.
  const auto max_return_for = [&](const std::filesystem::path& metrics_file)
      -> std::optional<double> {
    if (max_return_flag) return max_return_flag;
    for (const std::filesystem::path cfg :
         {metrics_file.parent_path() / kResolvedConfigFileName,
          root / kResolvedConfigFileName}) {
      std::error_code e2;
      if (!std::filesystem::is_regular_file(cfg, e2)) continue;
      try {
        const RunSpec spec = load_run_spec_file(cfg.string());
        if (spec.output.max_return) return spec.output.max_return;
      } catch (const ConfigError&) {
        continue;  // unreadable sibling config; keep looking
      }
    }
    return std::nullopt;
  };

  std::ostringstream body;
  body << "series,x,y\n";
  for (const auto& [series, file] : found) {
    std::vector<EpisodeRecord> eps;
    try {
      eps = parse_metrics_csv(read_text_file(file.string()), file.string());
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return kExitUsage;
    }
    std::optional<double> max_return;
    if (y_kind == "ratio") {
      max_return = max_return_for(file);
      if (!max_return) {
        err << "error: --y ratio requires output.max_return in the config (or "
               "--max-return)\n";
        return kExitUsage;
      }
    }
    for (const EpisodeRecord& r : eps) {
      const long x = x_kind == "violations" ? r.cumulative_violations : r.env_steps;
      double y = r.undiscounted_return;
      if (y_kind == "ratio")
        y = (r.undiscounted_return / *max_return) /
            static_cast<double>(std::max<long>(1, r.cumulative_violations));
      body << series << ',' << x << ',' << format_g9(y) << "\n";
    }
  }
  out << body.str();
  return kExitOk;
}

}  // namespace rpt
