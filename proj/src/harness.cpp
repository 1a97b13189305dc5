#include "symbreak/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <span>
#include <sstream>
#include <thread>

#include "symbreak/error.hpp"
#include "symbreak/exact_sum.hpp"

namespace symbreak::harness {

namespace {

constexpr std::array<Method, 8> kMethods = {Method::DE,    Method::DE_INV_SB,    Method::DE_SB,    Method::DE_SB_BF,
                                            Method::CMAES, Method::CMAES_INV_SB, Method::CMAES_SB, Method::CMAES_SB_BF};

net::OutputMode output_mode(data::Kind kind) {
  return kind == data::Kind::Classification ? net::OutputMode::Classification : net::OutputMode::Regression;
}

std::pair<int, int> problem_dims(const ProblemSpec& spec) {
  if (spec.id == "digits") return {16, 10};
  for (const auto& p : data::generated_problems()) {
    if (p.id == spec.id) return {p.input_dim, p.output_dim};
  }
  throw InputError("no dimensions known for problem " + spec.id);
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Scales an out-of-ball vector the same way the penalized error evaluates it.
net::ParamVector evaluated_point(const net::ParamLayout& layout, const net::ParamVector& params) {
  const double norm = exact_norm(std::span<const double>(params.data(), static_cast<std::size_t>(params.size())));
  if (norm > std::sqrt(static_cast<double>(layout.dimension()))) return params / norm;
  return params;
}

// Train/test error rates, refreshed only when the validation error rate of
// the current best candidate strictly improves.
class ValidationGate {
 public:
  ValidationGate(const net::ParamLayout& layout, const data::SplitDataset& sets) : layout_(layout), sets_(sets) {}

  void offer(const net::ParamVector& best, double best_error) {
    if (!(best_error < last_offered_)) return;
    last_offered_ = best_error;
    const net::ParamVector point = evaluated_point(layout_, best);
    const net::Fit fit = net::fit(layout_, point, sets_.train);
    auto rate = [&](const data::Dataset& ds) {
      return net::classification_error_rate(ds.targets, net::predict(layout_, point, fit.out_weights, ds.inputs));
    };
    const double validation = rate(sets_.validation);
    if (validation < best_validation_) {
      best_validation_ = validation;
      train_rate_ = rate(sets_.train);
      test_rate_ = rate(sets_.test);
    }
  }

  double train_rate() const { return train_rate_; }
  double test_rate() const { return test_rate_; }

 private:
  const net::ParamLayout& layout_;
  const data::SplitDataset& sets_;
  double last_offered_ = std::numeric_limits<double>::infinity();
  double best_validation_ = std::numeric_limits<double>::infinity();
  double train_rate_ = 1.0;
  double test_rate_ = 1.0;
};

}  // namespace

const std::array<Method, 8>& all_methods() { return kMethods; }

std::string_view method_name(Method method) {
  switch (method) {
    case Method::DE: return "DE";
    case Method::DE_INV_SB: return "DE-INV-SB";
    case Method::DE_SB: return "DE-SB";
    case Method::DE_SB_BF: return "DE-SB-BF";
    case Method::CMAES: return "CMA-ES";
    case Method::CMAES_INV_SB: return "CMA-ES-INV-SB";
    case Method::CMAES_SB: return "CMA-ES-SB";
    case Method::CMAES_SB_BF: return "CMA-ES-SB-BF";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view name) {
  for (Method m : kMethods) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

evolve::SbMode sb_mode(Method method) {
  switch (method) {
    case Method::DE:
    case Method::CMAES: return evolve::SbMode::None;
    case Method::DE_INV_SB:
    case Method::CMAES_INV_SB: return evolve::SbMode::Invariant;
    case Method::DE_SB:
    case Method::CMAES_SB: return evolve::SbMode::Mgop;
    case Method::DE_SB_BF:
    case Method::CMAES_SB_BF: return evolve::SbMode::MgopBruteForce;
  }
  return evolve::SbMode::None;
}

bool is_de(Method method) {
  return method == Method::DE || method == Method::DE_INV_SB || method == Method::DE_SB || method == Method::DE_SB_BF;
}

std::vector<std::vector<std::string>> method_families() {
  return {{"DE", "DE-INV-SB", "DE-SB", "DE-SB-BF"}, {"CMA-ES", "CMA-ES-INV-SB", "CMA-ES-SB", "CMA-ES-SB-BF"}};
}

const std::vector<ProblemSpec>& problem_catalog() {
  using data::Kind;
  static const std::vector<ProblemSpec> catalog = {
      {"syn5", Kind::Regression, "1-3-1", 200, {0, 0, 0}, 80, 48, 200'000},
      {"sinc", Kind::Regression, "1-5-1", 200, {0, 0, 0}, 120, 400, 200'000},
      {"inc-sinc", Kind::Regression, "1-5-1", 200, {0, 0, 0}, 144, 400, 200'000},
      {"sinc2d", Kind::Regression, "2-3-1-3-1", 1000, {0, 0, 0}, 96, 1000, 500'000},
      {"sinc3d", Kind::Regression, "3-4-1-4-1", 1000, {0, 0, 0}, 120, 1000, 500'000},
      {"autoenc-circle", Kind::Autoencode, "2-5-3-2-1-2-3-5-2", 200, {0, 0, 0}, 64, 4000, 500'000},
      {"autoenc-spiral", Kind::Autoencode, "3-1-3-4-7-3", 1000, {0, 0, 0}, 80, 400, 500'000},
      {"autoenc-sphere", Kind::Autoencode, "3-8-5-2-5-8-3", 1000, {0, 0, 0}, 96, 1000, 500'000},
      {"two-circles", Kind::Classification, "2-4-2-4-2", 1200, {400, 400, 400}, 80, 400, 500'000},
      {"two-spirals", Kind::Classification, "2-8-3-1-3-8-2", 194, {114, 40, 40}, 120, 1000, 500'000},
      // Population sizes for digits are not published; these mirror two-spirals.
      {"digits", Kind::Classification, "16-8-3-10-10", 3000, {1000, 1000, 1000}, 120, 1000, 1'000'000},
  };
  return catalog;
}

const ProblemSpec& find_problem(std::string_view id) {
  for (const auto& p : problem_catalog()) {
    if (p.id == id) return p;
  }
  throw InputError("unknown problem '" + std::string(id) + "' (see list-problems)");
}

ExperimentConfig resolve(const ExperimentConfig& config) {
  ExperimentConfig out = config;
  const ProblemSpec& spec = find_problem(config.problem);
  if (out.topology.empty()) out.topology = spec.topology;
  const net::Topology topo = net::Topology::parse(out.topology, output_mode(spec.kind));
  const auto [d, q] = problem_dims(spec);
  if (topo.input_dim() != d || topo.output_dim() != q) {
    throw InputError("topology " + out.topology + " does not match problem " + spec.id + " (needs " +
                     std::to_string(d) + " inputs and " + std::to_string(q) + " outputs)");
  }
  if (out.np == 0) out.np = is_de(out.method) ? spec.np_de : spec.np_cma;
  if (out.np < 4) throw InputError("population size must be at least 4");
  if (!is_de(out.method) && out.np % 2 != 0) throw InputError("CMA-ES population size must be even");
  if (out.max_evaluations == 0) out.max_evaluations = spec.budget;
  if (out.max_evaluations < out.np) throw InputError("evaluation budget is smaller than one generation");
  if (out.repetitions < 1) throw InputError("repetitions must be positive");
  if (out.noise_sd < 0.0) throw InputError("noise must be nonnegative");
  if (spec.id == "digits" && out.digits_path.empty()) throw InputError("problem digits needs --digits <file>");
  if (out.threads < 0) throw InputError("threads must be nonnegative");
  if (sb_mode(out.method) == evolve::SbMode::MgopBruteForce) {
    const net::ParamLayout layout(topo);
    const symmetry::SymmetryGroup group(layout);
    if (group.size() > out.brute_force_cap) {
      throw InputError("brute force symmetry breaking infeasible for " + out.topology + ": group has " +
                       std::to_string(group.size()) + " elements, cap is " + std::to_string(out.brute_force_cap));
    }
  }
  return out;
}

std::string to_config_text(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "problem=" << c.problem << '\n'
      << "topology=" << c.topology << '\n'
      << "method=" << method_name(c.method) << '\n'
      << "np=" << c.np << '\n'
      << "evals=" << c.max_evaluations << '\n'
      << "reps=" << c.repetitions << '\n'
      << "seed=" << c.seed << '\n'
      << "noise=" << format_double(c.noise_sd) << '\n'
      << "bf-cap=" << c.brute_force_cap << '\n';
  if (!c.digits_path.empty()) out << "digits=" << c.digits_path << '\n';
  return out.str();
}

ProblemData prepare_data(const ExperimentConfig& config) {
  const ProblemSpec& spec = find_problem(config.problem);
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                    0x64617461U};
  data::Rng rng(seq);
  ProblemData out;
  out.classification = spec.kind == data::Kind::Classification;

  data::SplitDataset raw;
  if (spec.id == "digits") {
    raw = data::load_digits(config.digits_path, rng);
  } else if (out.classification) {
    raw = data::split(data::generate(spec.id, spec.samples, config.noise_sd, rng), spec.splits, rng);
  } else {
    raw.train = data::generate(spec.id, spec.samples, config.noise_sd, rng);
  }

  auto [train, stats] = data::fit_normalize(raw.train);
  out.degenerate_normalization = stats.degenerate;
  out.sets.train = std::move(train);
  if (out.classification) {
    out.sets.validation = stats.apply(raw.validation);
    out.sets.test = stats.apply(raw.test);
  }
  return out;
}

double ConvergenceTrace::final_metric() const {
  require(!points.empty(), "final_metric of an empty trace");
  return classification ? points.back().test_error_rate : points.back().best_error;
}

ConvergenceTrace run_single(const ExperimentConfig& cfg, const ProblemData& data, int repetition) {
  const auto start = std::chrono::steady_clock::now();
  const net::Topology topo = net::Topology::parse(
      cfg.topology, data.classification ? net::OutputMode::Classification : net::OutputMode::Regression);
  const net::ParamLayout layout(topo);
  const data::Dataset& train = data.sets.train;
  const evolve::Objective objective = [&](const evolve::Vector& theta) {
    return net::penalized_error(layout, theta, train);
  };

  ConvergenceTrace trace;
  trace.classification = data.classification;
  trace.seed = cfg.seed + static_cast<std::uint64_t>(repetition);
  evolve::Rng rng(trace.seed);
  const evolve::SymmetryBreaker breaker(sb_mode(cfg.method), &layout, cfg.brute_force_cap);

  std::optional<ValidationGate> gate;
  if (data.classification) gate.emplace(layout, data.sets);
  auto record = [&](long evals, const evolve::Vector& best, double best_error) {
    TracePoint p{evals, best_error, 0.0, 0.0};
    if (gate) {
      gate->offer(best, best_error);
      p.train_error_rate = gate->train_rate();
      p.test_error_rate = gate->test_rate();
    }
    trace.points.push_back(p);
  };

  const int dim = layout.dimension();
  const long budget = cfg.max_evaluations;
  if (is_de(cfg.method)) {
    evolve::DePopulation pop = evolve::de_init(dim, cfg.np, objective, rng);
    record(pop.eval_count, pop.best, pop.best_error);
    while (pop.eval_count + cfg.np <= budget) {
      evolve::de_step(pop, objective, breaker, rng);
      record(pop.eval_count, pop.best, pop.best_error);
    }
  } else {
    evolve::CmaState st = evolve::cmaes_init(dim, cfg.np);
    while (st.eval_count + cfg.np <= budget) {
      evolve::cmaes_step(st, objective, breaker, rng);
      record(st.eval_count, st.best, st.best_error);
    }
  }
  trace.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return trace;
}

std::vector<ConvergenceTrace> run_experiment(const ExperimentConfig& config) {
  const ExperimentConfig cfg = resolve(config);
  const ProblemData data = prepare_data(cfg);
  std::vector<ConvergenceTrace> traces(static_cast<std::size_t>(cfg.repetitions));

  unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::thread::hardware_concurrency();
  workers = std::clamp(workers, 1U, static_cast<unsigned>(cfg.repetitions));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (int rep = next++; rep < cfg.repetitions; rep = next++) {
      try {
        traces[static_cast<std::size_t>(rep)] = run_single(cfg, data, rep);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < workers; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return traces;
}

void write_trace(std::ostream& out, const ConvergenceTrace& trace) {
  out << (trace.classification ? "eval_count,best_error,train_err_rate,test_err_rate\n" : "eval_count,best_error\n");
  for (const auto& p : trace.points) {
    out << p.eval_count << ',' << format_double(p.best_error);
    if (trace.classification) out << ',' << format_double(p.train_error_rate) << ',' << format_double(p.test_error_rate);
    out << '\n';
  }
}

ConvergenceTrace read_trace(std::istream& in) {
  ConvergenceTrace trace;
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty trace file");
  if (line == "eval_count,best_error,train_err_rate,test_err_rate") {
    trace.classification = true;
  } else if (line != "eval_count,best_error") {
    throw InputError("unrecognized trace header '" + line + "'");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != (trace.classification ? 4U : 2U)) {
      throw InputError("trace line " + std::to_string(line_no) + ": wrong field count");
    }
    try {
      TracePoint p;
      p.eval_count = std::stol(fields[0]);
      p.best_error = std::stod(fields[1]);
      if (trace.classification) {
        p.train_error_rate = std::stod(fields[2]);
        p.test_error_rate = std::stod(fields[3]);
      }
      trace.points.push_back(p);
    } catch (const std::exception&) {
      throw InputError("trace line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return trace;
}

std::filesystem::path save_experiment(const std::filesystem::path& dir, const ExperimentConfig& resolved,
                                      const std::vector<ConvergenceTrace>& traces) {
  const std::filesystem::path method_dir = dir / resolved.problem / std::string(method_name(resolved.method));
  std::filesystem::create_directories(method_dir);
  std::ofstream meta(method_dir / "meta.txt");
  meta << to_config_text(resolved);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "run_%03zu.csv", i);
    std::ofstream out(method_dir / name);
    if (!out) throw InputError("cannot write " + (method_dir / name).string());
    write_trace(out, traces[i]);
    meta << "# run " << i << " seed " << traces[i].seed << " wall_seconds " << traces[i].wall_seconds << '\n';
  }
  return method_dir;
}

std::vector<MethodSamples> load_final_metrics(const std::filesystem::path& problem_dir) {
  std::vector<MethodSamples> out;
  for (Method m : kMethods) {
    const auto method_dir = problem_dir / std::string(method_name(m));
    if (!std::filesystem::is_directory(method_dir)) continue;
    std::vector<std::filesystem::path> runs;
    for (const auto& entry : std::filesystem::directory_iterator(method_dir)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("run_", 0) == 0 && entry.path().extension() == ".csv") runs.push_back(entry.path());
    }
    std::sort(runs.begin(), runs.end());
    std::vector<double> finals;
    for (const auto& run : runs) {
      std::ifstream in(run);
      finals.push_back(read_trace(in).final_metric());
    }
    if (!finals.empty()) out.emplace_back(std::string(method_name(m)), std::move(finals));
  }
  return out;
}

}  // namespace symbreak::harness
