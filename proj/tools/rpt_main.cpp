#include <cstdint>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rpt/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"rpt: risk-preventive reinforcement learning toolkit"};
  app.require_subcommand(1);

  std::string train_config;
  std::string train_out;
  std::optional<std::uint64_t> train_seed;
  CLI::App* train = app.add_subcommand("train", "Run one training configuration");
  train->add_option("config", train_config, "Path to an INI config file")->required();
  train->add_option("--out", train_out, "Output directory for the run artifacts")
      ->required();
  train->add_option("--seed", train_seed, "Override training.seed from the config");

  std::string eval_dir;
  int eval_episodes = 100;
  std::uint64_t eval_seed = 0;
  CLI::App* eval =
      app.add_subcommand("eval", "Greedy evaluation of a trained checkpoint directory");
  eval->add_option("checkpoint_dir", eval_dir, "Directory written by `rpt train`")
      ->required();
  eval->add_option("--episodes", eval_episodes, "Number of evaluation episodes");
  eval->add_option("--seed", eval_seed, "Evaluation seed");

  std::string sweep_config;
  std::string sweep_strategies;
  std::string sweep_seeds;
  std::string sweep_out;
  CLI::App* sweep =
      app.add_subcommand("sweep", "Run a strategies x seeds grid and aggregate");
  sweep->add_option("config", sweep_config, "Path to an INI config file")->required();
  sweep->add_option("--strategies", sweep_strategies,
                    "Comma-separated strategy ids (rpt,unshaped,fixed-penalty,"
                    "additive-lagrangian)")
      ->required();
  sweep->add_option("--seeds", sweep_seeds, "Comma-separated seeds")->required();
  sweep->add_option("--out", sweep_out, "Output directory for all cells")->required();

  std::string plot_dir;
  std::string plot_x;
  std::string plot_y;
  std::optional<double> plot_max_return;
  CLI::App* plot = app.add_subcommand(
      "export-plot", "Flatten metrics CSVs into a tidy series,x,y table on stdout");
  plot->add_option("metrics_dir", plot_dir,
                   "Directory holding metrics.csv or sweep cell directories")
      ->required();
  plot->add_option("--x", plot_x, "X axis: violations | steps")->required();
  plot->add_option("--y", plot_y, "Y axis: return | ratio")->required();
  plot->add_option("--max-return", plot_max_return,
                   "Normalization constant for --y ratio (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return rpt::kExitUsage;
  }

  if (train->parsed()) return rpt::cmd_train(train_config, train_seed, train_out);
  if (eval->parsed()) return rpt::cmd_eval(eval_dir, eval_episodes, eval_seed);
  if (sweep->parsed())
    return rpt::cmd_sweep(sweep_config, sweep_strategies, sweep_seeds, sweep_out);
  if (plot->parsed())
    return rpt::cmd_export_plot(plot_dir, plot_x, plot_y, plot_max_return);
  return rpt::kExitUsage;
}
