#include "symbreak/evolve.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "symbreak/error.hpp"

namespace symbreak::evolve {

namespace {

// Independent per-generation streams so that drawing variation and breaking
// symmetries never shift each other's random numbers.
struct GenerationStreams {
  Rng variation;
  Rng breaking;
};

GenerationStreams split_streams(Rng& master) {
  const std::uint64_t s = master();
  std::seed_seq a{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32), 0U};
  std::seed_seq b{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32), 1U};
  return {Rng(a), Rng(b)};
}

void refresh_eigensystem(CmaState& st) {
  st.C = 0.5 * (st.C + st.C.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(st.C);
  Vector ev = es.eigenvalues();
  st.B = es.eigenvectors();
  const double floor = kEigenFloor * std::max(ev.maxCoeff(), 0.0);
  bool repaired = false;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (!(ev[i] >= floor) || ev[i] <= 0.0) {
      ev[i] = floor > 0.0 ? floor : kEigenFloor;
      repaired = true;
    }
  }
  if (repaired) st.C = st.B * ev.asDiagonal() * st.B.transpose();
  st.D = ev.array().sqrt();
  st.eigen_eval = st.eval_count;
}

}  // namespace

std::string_view to_string(SbMode mode) {
  switch (mode) {
    case SbMode::None: return "none";
    case SbMode::Invariant: return "invariant";
    case SbMode::Mgop: return "mgop";
    case SbMode::MgopBruteForce: return "mgop-bf";
  }
  return "?";
}

SymmetryBreaker::SymmetryBreaker(SbMode mode, const net::ParamLayout* layout, std::uint64_t brute_force_cap)
    : mode_(mode), layout_(layout), cap_(brute_force_cap) {
  require(mode == SbMode::None || layout != nullptr, "symmetry breaking needs a parameter layout");
}

bool SymmetryBreaker::apply(Vector& candidate, const Vector& goal, Rng& rng) const {
  switch (mode_) {
    case SbMode::None:
      return false;
    case SbMode::Invariant: {
      Vector out = symmetry::break_invariant(*layout_, candidate);
      const bool changed = out != candidate;
      candidate = std::move(out);
      return changed;
    }
    case SbMode::Mgop:
      return symmetry::break_mgop_in_place(*layout_, candidate, goal, rng);
    case SbMode::MgopBruteForce: {
      Vector out = symmetry::break_ideal_bf(*layout_, candidate, goal, cap_);
      const bool changed = out != candidate;
      candidate = std::move(out);
      return changed;
    }
  }
  return false;
}

Vector DePopulation::centroid() const {
  require(!candidates.empty(), "centroid of an empty population");
  Vector c = Vector::Zero(candidates.front().size());
  for (const auto& x : candidates) c += x;
  return c / static_cast<double>(candidates.size());
}

DePopulation de_init(int dim, int np, const Objective& objective, Rng& rng, DeSettings settings) {
  require(dim >= 1, "de_init: dimension must be positive");
  require(np >= 4, "de_init: DE needs a population of at least 4");
  DePopulation pop;
  pop.F = settings.F;
  pop.crossover = settings.crossover;
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  pop.candidates.reserve(static_cast<std::size_t>(np));
  for (int i = 0; i < np; ++i) {
    Vector x(dim);
    for (int j = 0; j < dim; ++j) x[j] = unif(rng);
    pop.candidates.push_back(std::move(x));
  }
  for (const auto& x : pop.candidates) {
    const double e = objective(x);
    pop.stored_errors.push_back(e);
    pop.true_errors.push_back(e);
    ++pop.eval_count;
    if (e < pop.best_error) {
      pop.best_error = e;
      pop.best = x;
    }
  }
  return pop;
}

Vector de_mutant(const Vector& x1, const Vector& x2, const Vector& x3, double F) { return x1 + F * (x2 - x3); }

std::vector<bool> de_step(DePopulation& pop, const Objective& objective, const SymmetryBreaker& breaker, Rng& rng) {
  const int np = pop.size();
  require(np >= 4, "de_step: DE needs a population of at least 4");
  const auto dim = pop.candidates.front().size();
  const Vector goal = breaker.needs_goal() ? pop.centroid() : Vector();
  auto streams = split_streams(rng);

  std::uniform_int_distribution<int> partner(0, np - 1);
  std::uniform_int_distribution<Eigen::Index> forced(0, dim - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Vector> trials;
  trials.reserve(static_cast<std::size_t>(np));
  for (int i = 0; i < np; ++i) {
    int r1, r2, r3;
    do r1 = partner(streams.variation); while (r1 == i);
    do r2 = partner(streams.variation); while (r2 == i || r2 == r1);
    do r3 = partner(streams.variation); while (r3 == i || r3 == r1 || r3 == r2);
    const Vector mutant = de_mutant(pop.candidates[static_cast<std::size_t>(r1)],
                                    pop.candidates[static_cast<std::size_t>(r2)],
                                    pop.candidates[static_cast<std::size_t>(r3)], pop.F);
    Vector trial = pop.candidates[static_cast<std::size_t>(i)];
    const Eigen::Index j_forced = forced(streams.variation);
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (unit(streams.variation) < pop.crossover || j == j_forced) trial[j] = mutant[j];
    }
    trials.push_back(std::move(trial));
  }

  for (int i = 0; i < np; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double e = objective(trials[ui]);
    ++pop.eval_count;
    if (e < pop.best_error) {
      pop.best_error = e;
      pop.best = trials[ui];
    }
    if (e <= pop.stored_errors[ui]) {
      pop.candidates[ui] = std::move(trials[ui]);
      pop.stored_errors[ui] = e;
      pop.true_errors[ui] = e;
    }
  }

  std::vector<bool> modified(static_cast<std::size_t>(np), false);
  if (breaker.active()) {
    for (int i = 0; i < np; ++i) {
      modified[static_cast<std::size_t>(i)] =
          breaker.apply(pop.candidates[static_cast<std::size_t>(i)], goal, streams.breaking);
    }
    if (breaker.mode() == SbMode::Mgop) de_sb_postprocess(pop, modified);
  }
  return modified;
}

void de_sb_postprocess(DePopulation& pop, const std::vector<bool>& modified) {
  require(modified.size() == pop.candidates.size(), "de_sb_postprocess: flag count mismatch");
  const int half = pop.size() / 2;
  for (int j = 0; j < half; ++j) {
    if (modified[static_cast<std::size_t>(j)]) pop.stored_errors[static_cast<std::size_t>(j)] *= kDeInflationFactor;
  }
}

CmaState cmaes_init(int dim, int np, CmaSettings settings) {
  require(dim >= 1, "cmaes_init: dimension must be positive");
  require(np >= 4, "cmaes_init: population must be at least 4");
  require(np % 2 == 0, "cmaes_init: population size must be even");
  CmaState st;
  st.dim = dim;
  st.np = np;
  st.mu = np / 2;
  const double n = dim;

  st.weights.resize(st.mu);
  for (int i = 0; i < st.mu; ++i) st.weights[i] = std::log((np + 1.0) / 2.0) - std::log(i + 1.0);
  st.weights /= st.weights.sum();
  st.mu_eff = 1.0 / st.weights.squaredNorm();

  st.c_sigma = (st.mu_eff + 2.0) / (n + st.mu_eff + 5.0);
  st.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((st.mu_eff - 1.0) / (n + 1.0)) - 1.0) + st.c_sigma;
  st.c_c = (4.0 + st.mu_eff / n) / (n + 4.0 + 2.0 * st.mu_eff / n);
  st.c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + st.mu_eff);
  st.c_mu = std::min(1.0 - st.c_1, 2.0 * (st.mu_eff - 2.0 + 1.0 / st.mu_eff) / ((n + 2.0) * (n + 2.0) + st.mu_eff));
  st.chi_n = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  st.mean = Vector::Zero(dim);
  st.sigma = settings.initial_sigma > 0.0 ? settings.initial_sigma : 0.3 * std::sqrt(n);
  st.C = Eigen::MatrixXd::Identity(dim, dim);
  st.B = Eigen::MatrixXd::Identity(dim, dim);
  st.D = Vector::Ones(dim);
  st.p_sigma = Vector::Zero(dim);
  st.p_c = Vector::Zero(dim);
  st.best = st.mean;
  return st;
}

Vector cmaes_sb_mean(const std::vector<Vector>& candidates, const std::vector<bool>& modified, const Vector& goal,
                     const Vector& weights) {
  require(!candidates.empty(), "cmaes_sb_mean: no candidates");
  require(static_cast<Eigen::Index>(candidates.size()) >= weights.size() && modified.size() >= candidates.size(),
          "cmaes_sb_mean: weights and flags must cover the ranked candidates");
  Vector m = Vector::Zero(candidates.front().size());
  for (Eigen::Index j = 0; j < weights.size(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    m += weights[j] * (modified[uj] ? goal : candidates[uj]);
  }
  return m;
}

double sigma_update(double sigma, double chi, double s_norm, int dim) {
  require(sigma > 0.0, "sigma_update: sigma must be positive");
  const double d = dim;
  return sigma * std::exp(chi * std::exp(-0.05 * d * d * s_norm));
}

void cmaes_step(CmaState& st, const Objective& objective, const SymmetryBreaker& breaker, Rng& rng) {
  const int n = st.dim;
  const int np = st.np;
  auto streams = split_streams(rng);

  if (static_cast<double>(st.eval_count - st.eigen_eval) > np / (st.c_1 + st.c_mu) / n / 10.0) {
    refresh_eigensystem(st);
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Vector> xs(static_cast<std::size_t>(np));
  for (auto& x : xs) {
    Vector z(n);
    for (int i = 0; i < n; ++i) z[i] = gauss(streams.variation);
    x = st.mean + st.sigma * (st.B * (st.D.cwiseProduct(z)));
  }

  std::vector<double> errors(static_cast<std::size_t>(np));
  for (int k = 0; k < np; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    errors[uk] = objective(xs[uk]);
    ++st.eval_count;
    if (errors[uk] < st.best_error) {
      st.best_error = errors[uk];
      st.best = xs[uk];
    }
  }

  std::vector<int> rank(static_cast<std::size_t>(np));
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) {
    return errors[static_cast<std::size_t>(a)] < errors[static_cast<std::size_t>(b)];
  });

  // Centroid of the selected candidates before breaking, for the shift vector.
  Vector centroid_before = Vector::Zero(n);
  for (int j = 0; j < st.mu; ++j) centroid_before += xs[static_cast<std::size_t>(rank[static_cast<std::size_t>(j)])];
  centroid_before /= st.mu;

  std::vector<bool> modified(static_cast<std::size_t>(np), false);
  if (breaker.active()) {
    for (int k = 0; k < np; ++k) {
      modified[static_cast<std::size_t>(k)] = breaker.apply(xs[static_cast<std::size_t>(k)], st.best, streams.breaking);
    }
  }

  std::vector<Vector> selected;
  std::vector<bool> selected_modified;
  selected.reserve(static_cast<std::size_t>(st.mu));
  for (int j = 0; j < st.mu; ++j) {
    const auto src = static_cast<std::size_t>(rank[static_cast<std::size_t>(j)]);
    selected.push_back(xs[src]);
    selected_modified.push_back(modified[src]);
  }

  double shift_norm = 0.0;
  if (breaker.active()) {
    Vector centroid_after = Vector::Zero(n);
    for (const auto& x : selected) centroid_after += x;
    centroid_after /= st.mu;
    shift_norm = (centroid_after - centroid_before).norm();
  }
  st.last_shift_norm = shift_norm;

  const Vector old_mean = st.mean;
  if (breaker.mode() == SbMode::Mgop) {
    st.mean = cmaes_sb_mean(selected, selected_modified, st.best, st.weights);
  } else {
    st.mean = Vector::Zero(n);
    for (int j = 0; j < st.mu; ++j) st.mean += st.weights[j] * selected[static_cast<std::size_t>(j)];
  }

  const Vector y_w = (st.mean - old_mean) / st.sigma;
  const Vector c_inv_sqrt_y = st.B * (st.B.transpose() * y_w).cwiseQuotient(st.D);
  st.p_sigma = (1.0 - st.c_sigma) * st.p_sigma + std::sqrt(st.c_sigma * (2.0 - st.c_sigma) * st.mu_eff) * c_inv_sqrt_y;

  ++st.generation;
  const double ps_norm = st.p_sigma.norm();
  const double decay = std::sqrt(1.0 - std::pow(1.0 - st.c_sigma, 2.0 * static_cast<double>(st.generation)));
  const bool h_sigma = ps_norm / decay < (1.4 + 2.0 / (n + 1.0)) * st.chi_n;

  st.p_c = (1.0 - st.c_c) * st.p_c;
  if (h_sigma) st.p_c += std::sqrt(st.c_c * (2.0 - st.c_c) * st.mu_eff) * y_w;

  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < st.mu; ++j) {
    const Vector y = (selected[static_cast<std::size_t>(j)] - old_mean) / st.sigma;
    rank_mu.noalias() += st.weights[j] * y * y.transpose();
  }
  const double delta_h = h_sigma ? 0.0 : st.c_c * (2.0 - st.c_c);
  st.C = (1.0 - st.c_1 - st.c_mu) * st.C + st.c_1 * (st.p_c * st.p_c.transpose() + delta_h * st.C) +
         st.c_mu * rank_mu;

  const double chi = (st.c_sigma / st.d_sigma) * (ps_norm / st.chi_n - 1.0);
  st.sigma = sigma_update(st.sigma, chi, shift_norm, n);
}

}  // namespace symbreak::evolve
