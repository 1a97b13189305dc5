#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "symbreak/data.hpp"
#include "symbreak/evolve.hpp"
#include "symbreak/net.hpp"
#include "symbreak/stats.hpp"

namespace symbreak::harness {

enum class Method { DE, DE_INV_SB, DE_SB, DE_SB_BF, CMAES, CMAES_INV_SB, CMAES_SB, CMAES_SB_BF };

const std::array<Method, 8>& all_methods();
std::string_view method_name(Method method);
std::optional<Method> parse_method(std::string_view name);
evolve::SbMode sb_mode(Method method);
bool is_de(Method method);

/// Per-problem defaults: topology, sample count, population sizes, budget.
struct ProblemSpec {
  std::string id;
  data::Kind kind;
  std::string topology;
  int samples;
  std::array<int, 3> splits;  // train/validation/test; zeros for train-only problems
  int np_de;
  int np_cma;
  long budget;
};

const std::vector<ProblemSpec>& problem_catalog();
const ProblemSpec& find_problem(std::string_view id);

struct ExperimentConfig {
  std::string problem;
  std::string topology;  // empty: problem default
  Method method = Method::DE;
  int np = 0;                 // 0: problem default for the method family
  long max_evaluations = 0;   // 0: problem default
  int repetitions = 50;
  std::uint64_t seed = 1;
  double noise_sd = data::kDefaultNoiseSd;
  std::string digits_path;    // digits problem only
  std::uint64_t brute_force_cap = symmetry::kDefaultBruteForceCap;
  int threads = 0;            // 0: hardware concurrency
};

/// Fills defaults and validates; throws InputError on an inconsistent config.
ExperimentConfig resolve(const ExperimentConfig& config);

/// key = value lines, the same keys `to_config_text` writes.
std::string to_config_text(const ExperimentConfig& config);

struct ProblemData {
  data::SplitDataset sets;  // only `train` is populated for regression/autoencoding
  bool classification = false;
  bool degenerate_normalization = false;
};

/// Generates (or loads) and normalizes the data of a resolved config. The data
/// depends on the config seed only, so every method and repetition sees the same sets.
ProblemData prepare_data(const ExperimentConfig& config);

struct TracePoint {
  long eval_count = 0;
  double best_error = 0.0;
  double train_error_rate = 0.0;  // classification only
  double test_error_rate = 0.0;   // classification only
};

struct ConvergenceTrace {
  bool classification = false;
  std::uint64_t seed = 0;
  std::vector<TracePoint> points;
  double wall_seconds = 0.0;

  /// Final training error (regression, autoencoding) or final gated test error rate (classification).
  double final_metric() const;
};

/// One optimization run seeded with config.seed + repetition.
ConvergenceTrace run_single(const ExperimentConfig& resolved, const ProblemData& data, int repetition);

/// All repetitions of a config, run in parallel, returned in repetition order.
std::vector<ConvergenceTrace> run_experiment(const ExperimentConfig& config);

void write_trace(std::ostream& out, const ConvergenceTrace& trace);
ConvergenceTrace read_trace(std::istream& in);

/// Writes <dir>/<problem>/<method>/run_NNN.csv plus meta.txt (config echo,
/// seeds, wall times) and returns the method directory.
std::filesystem::path save_experiment(const std::filesystem::path& dir, const ExperimentConfig& resolved,
                                      const std::vector<ConvergenceTrace>& traces);

/// Final metrics per method found under a problem directory, in method order.
std::vector<MethodSamples> load_final_metrics(const std::filesystem::path& problem_dir);

/// Families in table order: regular, invariant, MGOP, brute force.
std::vector<std::vector<std::string>> method_families();

}  // namespace symbreak::harness
