// bivwind: simulate, train, predict and verify bivariate wind forecasts.
//
//   bivwind simulate --preset valley --days 2233 --seed 1 --out-dir data
//   bivwind train    --data data/cases.csv --spec ram-adv --split-date 2014-01-26 --out-dir models
//   bivwind predict  --model models --data data/cases.csv --split-date 2014-01-26 --out-dir pred
//   bivwind verify   --predictions pred/predictions_ram-adv.csv --data data/cases.csv
//                    --reference pred/predictions_blm0.csv --out-dir report
//
// Options can also come from a TOML file given with --config, one table per
// subcommand ([train] lambda = "auto"); flags win.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bivwind/cli.hpp"

namespace {

using namespace bivwind;

void add_config(CLI::App& app) {
  app.set_config("--config", "", "TOML file with option values (command-line flags override it)");
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    out.push_back(csv::parse_double(std::string_view(text).substr(pos, end - pos), "grid", "--grid", 0));
    pos = end + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bivariate Gaussian post-processing of wind-vector ensemble forecasts"};
  app.require_subcommand(1);
  add_config(app);

  cli::SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Write a synthetic scenario (cases, members, truth)");
  simulate->fallthrough();
  simulate->add_option("--preset", sim.preset, "valley or plain")->capture_default_str();
  simulate->add_option("--days", sim.days, "Number of days")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate->add_option("--out-dir", sim.out_dir, "Output directory")->capture_default_str();
  simulate->add_option("--steps", sim.steps, "Forecast steps in hours (default 12..72)")->delimiter(',');
  simulate->add_option("--correlation", sim.correlation, "zero, const:<c> or sin:<a>");

  cli::TrainOptions train;
  std::string grid_text;
  auto* train_cmd = app.add_subcommand("train", "Fit one model per forecast step");
  train_cmd->fallthrough();
  train_cmd->add_option("--data", train.data, "Cases CSV")->required();
  train_cmd->add_option("--spec", train.spec, "blm0, ram0, ram-emp, ram-ic, ram-dir or ram-adv")->required();
  train_cmd->add_option("--out-dir", train.out_dir, "Directory for model files")->capture_default_str();
  train_cmd->add_option("--lambda", train.lambda, "Smoothing parameter or 'auto'")->capture_default_str();
  train_cmd->add_option("--grid", grid_text, "Comma-separated lambda grid for --lambda auto");
  train_cmd->add_option("--split-date", train.split_date, "Train on cases before this date");
  train_cmd->add_option("--doy-knots", train.doy_knots, "Knots of day-of-year smooths")->capture_default_str();
  train_cmd->add_option("--dir-knots", train.dir_knots, "Knots of direction smooths")->capture_default_str();
  train_cmd->add_option("--max-iter", train.max_iter, "Optimizer cycle limit")->capture_default_str();
  train_cmd->add_option("--epsilon", train.epsilon, "Box half-width for lambda selection")->capture_default_str();
  std::uint64_t unused_seed = 1;
  train_cmd->add_option("--seed", unused_seed, "Accepted for uniformity; fitting is deterministic");

  cli::PredictOptions predict;
  auto* predict_cmd = app.add_subcommand("predict", "Predict distribution parameters for cases");
  predict_cmd->fallthrough();
  predict_cmd->add_option("--model", predict.models, "Model files or directories")->required();
  predict_cmd->add_option("--data", predict.data, "Cases CSV")->required();
  predict_cmd->add_option("--out-dir", predict.out_dir, "Output directory")->capture_default_str();
  predict_cmd->add_option("--output", predict.output, "Output file (overrides --out-dir)");
  predict_cmd->add_option("--split-date", predict.split_date, "Predict cases from this date on");

  cli::VerifyOptions verify;
  auto* verify_cmd = app.add_subcommand("verify", "Score forecasts and compute skill against a reference");
  verify_cmd->fallthrough();
  auto* pred_opt = verify_cmd->add_option("--predictions", verify.predictions, "Predictions or members CSV");
  verify_cmd->add_option("--members", verify.predictions, "Raw ensemble members CSV")->excludes(pred_opt);
  verify_cmd->add_option("--data", verify.data, "Cases CSV with observations")->required();
  verify_cmd->add_option("--reference", verify.reference, "Reference predictions or members CSV");
  verify_cmd->add_option("--out-dir", verify.out_dir, "Report directory")->capture_default_str();
  verify_cmd->add_option("--split-date", verify.split_date, "Verify cases from this date on");
  verify_cmd->add_option("--epsilon", verify.scoring.epsilon, "Box half-width, m/s")->capture_default_str();
  verify_cmd->add_option("--es-samples", verify.scoring.es_samples, "Draws per forecast for ES")->capture_default_str();
  verify_cmd->add_option("--rank-samples", verify.scoring.rank_samples, "Draws per forecast for ranks")
      ->capture_default_str();
  verify_cmd->add_option("--rank-repeats", verify.scoring.rank_repeats, "Tie-randomization repeats")
      ->capture_default_str();
  verify_cmd->add_option("--bootstrap-reps", verify.scoring.bootstrap_reps, "Bootstrap replicates")
      ->capture_default_str();
  verify_cmd->add_option("--seed", verify.scoring.seed, "Random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitUsage;
  }

  return cli::run([&] {
    if (simulate->parsed()) {
      cli::cmd_simulate(sim, std::cout);
    } else if (train_cmd->parsed()) {
      if (!grid_text.empty()) {
        try {
          train.grid = parse_grid(grid_text);
        } catch (const InputError& e) {
          throw ConfigError(e.what());
        }
      }
      cli::cmd_train(train, std::cout);
    } else if (predict_cmd->parsed()) {
      cli::cmd_predict(predict, std::cout);
    } else if (verify_cmd->parsed()) {
      cli::cmd_verify(verify, std::cout);
    }
  });
}
