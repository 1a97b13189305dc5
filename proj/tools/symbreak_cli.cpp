// Command line front end: run experiments, report statistics, list problems.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "symbreak/error.hpp"
#include "symbreak/harness.hpp"

namespace fs = std::filesystem;
using namespace symbreak;

namespace {

int list_problems() {
  std::printf("%-16s %-15s %-22s %7s %6s %7s %9s\n", "problem", "kind", "topology", "samples", "np_de", "np_cma",
              "budget");
  for (const auto& p : harness::problem_catalog()) {
    const char* kind = p.kind == data::Kind::Regression ? "regression"
                       : p.kind == data::Kind::Autoencode ? "autoencoder"
                                                          : "classification";
    std::printf("%-16s %-15s %-22s %7d %6d %7d %9ld\n", p.id.c_str(), kind, p.topology.c_str(), p.samples, p.np_de,
                p.np_cma, p.budget);
  }
  return 0;
}

int run(const harness::ExperimentConfig& config, const fs::path& out_dir) {
  const harness::ExperimentConfig resolved = harness::resolve(config);
  std::cerr << "running " << resolved.problem << " / " << harness::method_name(resolved.method) << ": "
            << resolved.repetitions << " reps, np " << resolved.np << ", " << resolved.max_evaluations
            << " evaluations\n";
  const auto traces = harness::run_experiment(resolved);
  const fs::path dir = harness::save_experiment(out_dir, resolved, traces);
  double mean = 0.0;
  for (const auto& t : traces) mean += t.final_metric();
  std::cout << "wrote " << traces.size() << " traces to " << dir.string() << "; mean final "
            << (traces.front().classification ? "test error rate " : "training error ")
            << mean / static_cast<double>(traces.size()) << '\n';
  return 0;
}

bool has_method_dirs(const fs::path& dir) {
  for (auto m : harness::all_methods()) {
    if (fs::is_directory(dir / std::string(harness::method_name(m)))) return true;
  }
  return false;
}

void report_problem(const fs::path& problem_dir) {
  const auto samples = harness::load_final_metrics(problem_dir);
  std::cout << "== " << problem_dir.filename().string() << " ==\n";
  if (samples.size() < 2) {
    std::cout << "fewer than two methods with results; nothing to compare\n\n";
    return;
  }
  std::cout << harness::build_report(samples, harness::method_families()).to_text() << '\n';
}

int report(const fs::path& in) {
  if (!fs::is_directory(in)) throw InputError("not a directory: " + in.string());
  if (has_method_dirs(in)) {
    report_problem(in);
    return 0;
  }
  std::vector<fs::path> problems;
  for (const auto& entry : fs::directory_iterator(in)) {
    if (entry.is_directory() && has_method_dirs(entry.path())) problems.push_back(entry.path());
  }
  if (problems.empty()) throw InputError("no experiment results under " + in.string());
  std::sort(problems.begin(), problems.end());
  for (const auto& p : problems) report_problem(p);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetry breaking for neuroevolution of tanh feedforward networks"};
  app.require_subcommand(1);
  // `run` is parsed by its own App below: CLI11 reads config files only at the root.
  auto* run_cmd = app.add_subcommand("run", "Run repetitions of one problem/method pair (see run --help)");
  run_cmd->prefix_command();
  run_cmd->set_help_flag();

  std::string in_dir;
  auto* report_cmd = app.add_subcommand("report", "Statistical tests and normalized table for saved runs");
  report_cmd->add_option("--in", in_dir, "Results directory (one problem or a parent of several)")->required();

  auto* list_cmd = app.add_subcommand("list-problems", "Show problems and their defaults");

  CLI11_PARSE(app, argc, argv);

  harness::ExperimentConfig config;
  std::string method;
  std::string out_dir = "results";
  CLI::App run_app{"Run repetitions of one problem/method pair", "symbreak run"};
  run_app.set_config("--config", "", "key=value file with run options; flags override it");
  run_app.add_option("--problem", config.problem, "Problem id (see list-problems)")->required();
  run_app.add_option("--method", method, "DE, DE-INV-SB, DE-SB, DE-SB-BF, CMA-ES, CMA-ES-INV-SB, CMA-ES-SB, CMA-ES-SB-BF")
      ->required();
  run_app.add_option("--topology", config.topology, "Layer sizes, e.g. 1-3-1 (default: problem default)");
  run_app.add_option("--np", config.np, "Population size (default: problem default)");
  run_app.add_option("--evals", config.max_evaluations, "Evaluation budget (default: problem default)");
  run_app.add_option("--reps", config.repetitions, "Independent repetitions")->capture_default_str();
  run_app.add_option("--seed", config.seed, "Base seed; run i uses seed + i")->capture_default_str();
  run_app.add_option("--noise", config.noise_sd, "Regression target noise sd")->capture_default_str();
  run_app.add_option("--digits", config.digits_path, "Pen digits data file (digits problem)");
  run_app.add_option("--bf-cap", config.brute_force_cap, "Largest group the brute force may enumerate")
      ->capture_default_str();
  run_app.add_option("--threads", config.threads, "Worker threads (0: all cores)")->capture_default_str();
  run_app.add_option("--out", out_dir, "Output directory")->capture_default_str();

  if (run_cmd->parsed()) {
    auto rest = run_cmd->remaining();
    std::reverse(rest.begin(), rest.end());
    try {
      run_app.parse(rest);
    } catch (const CLI::ParseError& e) {
      return run_app.exit(e);
    }
  }

  try {
    if (list_cmd->parsed()) return list_problems();
    if (report_cmd->parsed()) return report(in_dir);
    const auto parsed = harness::parse_method(method);
    if (!parsed) throw InputError("unknown method '" + method + "'");
    config.method = *parsed;
    return run(config, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
