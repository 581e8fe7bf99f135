#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sociallearn/commands.hpp"

namespace sl = sociallearn;

namespace {

template <typename T>
void optional_flag(CLI::App* app, const std::string& name, std::optional<T>& target, const std::string& help) {
  app->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

void add_overrides(CLI::App* app, sl::Overrides& o, bool inverse, bool forward) {
  optional_flag(app, "--seed", o.seed, "root seed");
  if (forward) {
    optional_flag(app, "--delta", o.delta, "adaptation step delta in (0,1)");
    optional_flag(app, "--iterations", o.iterations, "iterations per simulation");
  }
  if (inverse) {
    optional_flag(app, "--batch-M", o.batch, "inverse window size M");
    optional_flag(app, "--step-mu", o.step, "inverse learning rate mu");
    optional_flag(app, "--tol", o.tol, "relative-change stopping tolerance");
    optional_flag(app, "--max-iter", o.max_iter, "cap on consumed iterations (0 = no cap)");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive social learning simulator and inverse estimator"};
  app.require_subcommand(1);
  std::string out;
  app.add_option("--out", out, "output directory (default: config output_dir, then $SOCIALLEARN_OUT, then .)");

  sl::GenerateGraphOptions graph;
  auto* gen = app.add_subcommand("generate-graph", "sample an Erdos-Renyi combination matrix");
  gen->add_option("--n", graph.n, "number of agents")->capture_default_str();
  gen->add_option("--p", graph.p, "edge probability")->capture_default_str();
  gen->add_option("--seed", graph.seed, "generator seed")->capture_default_str();
  gen->add_option("--out", out, "output directory");

  sl::SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "run the forward social-learning model");
  simulate->add_option("--config", sim.config, "experiment configuration JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", out, "output directory");
  add_overrides(simulate, sim.overrides, false, true);

  sl::InvertOptions inv;
  auto* invert = app.add_subcommand("invert", "estimate A, likelihoods and hypothesis sets from beliefs");
  invert->add_option("--trace", inv.trace, "beliefs.jsonl or trace.csv")->required()->check(CLI::ExistingFile);
  invert->add_option("--truth", inv.truth, "truth.json written by simulate")->check(CLI::ExistingFile);
  invert->add_option("--config", inv.config, "configuration supplying inverse settings")->check(CLI::ExistingFile);
  invert->add_option("--majority", inv.majority, "majority state index (repeatable)");
  invert->add_option("--out", out, "output directory");
  optional_flag(invert, "--delta", inv.overrides.delta, "delta (default: from the trace)");
  add_overrides(invert, inv.overrides, true, false);

  sl::BoundOptions bnd;
  auto* bound = app.add_subcommand("bound", "leading-term wrong-hypothesis bounds");
  bound->add_option("--config", bnd.config, "experiment configuration JSON")->required()->check(CLI::ExistingFile);
  bound->add_option("--batch-M", bnd.batches, "window sizes M (repeatable)");
  bound->add_option("--metrics", bnd.metrics, "metrics.json from experiment, for empirical frequencies")
      ->check(CLI::ExistingFile);
  bound->add_option("--out", out, "output directory");
  optional_flag(bound, "--seed", bnd.overrides.seed, "root seed");

  sl::ExperimentOptions exp;
  auto* experiment = app.add_subcommand("experiment", "Monte Carlo trials: simulate, invert, score");
  experiment->add_option("--config", exp.config, "experiment configuration JSON")->required()->check(CLI::ExistingFile);
  experiment->add_option("--out", out, "output directory");
  optional_flag(experiment, "--trials", exp.overrides.trials, "number of trials");
  optional_flag(experiment, "--threads", exp.overrides.threads, "worker threads (0 = hardware)");
  add_overrides(experiment, exp.overrides, true, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? sl::kExitOk : sl::kExitConfig;
  }

  try {
    std::vector<std::filesystem::path> written;
    if (*gen) {
      graph.out_dir = sl::output_directory(out);
      written = sl::cmd_generate_graph(graph, std::cout);
    } else if (*simulate) {
      sim.out_flag = out;
      written = sl::cmd_simulate(sim, std::cout);
    } else if (*invert) {
      inv.out_flag = out;
      written = sl::cmd_invert(inv, std::cout);
    } else if (*bound) {
      bnd.out_flag = out;
      written = sl::cmd_bound(bnd, std::cout);
    } else if (*experiment) {
      exp.out_flag = out;
      written = sl::cmd_experiment(exp, std::cout);
    }
    for (const auto& p : written) std::cout << "wrote " << p.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sl::exit_code(std::current_exception());
  }
  return sl::kExitOk;
}
