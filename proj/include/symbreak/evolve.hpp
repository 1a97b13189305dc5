#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "symbreak/net.hpp"
#include "symbreak/symmetry.hpp"

// Differential Evolution and CMA-ES over the flat hidden-layer parameter
// vector, each with pluggable symmetry breaking.
namespace symbreak::evolve {

using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;
using Objective = std::function<double(const Vector&)>;

enum class SbMode { None, Invariant, Mgop, MgopBruteForce };

std::string_view to_string(SbMode mode);

/// Applies the break operation matching an SbMode to single candidates.
class SymmetryBreaker {
 public:
  SymmetryBreaker() = default;
  SymmetryBreaker(SbMode mode, const net::ParamLayout* layout,
                  std::uint64_t brute_force_cap = symmetry::kDefaultBruteForceCap);

  SbMode mode() const { return mode_; }
  bool active() const { return mode_ != SbMode::None; }
  bool needs_goal() const { return mode_ == SbMode::Mgop || mode_ == SbMode::MgopBruteForce; }

  /// Transforms `candidate` in place; returns whether it changed.
  bool apply(Vector& candidate, const Vector& goal, Rng& rng) const;

 private:
  SbMode mode_ = SbMode::None;
  const net::ParamLayout* layout_ = nullptr;
  std::uint64_t cap_ = symmetry::kDefaultBruteForceCap;
};

// ---------------------------------------------------------------------------
// Differential Evolution, rand/1/bin.

struct DeSettings {
  double F = 0.5;
  double crossover = 0.9;
};

struct DePopulation {
  std::vector<Vector> candidates;
  // Error each candidate is compared against during selection. The MGOP
  // variant may inflate entries; `true_errors` keeps the evaluated values.
  std::vector<double> stored_errors;
  std::vector<double> true_errors;
  double F = 0.5;
  double crossover = 0.9;
  long eval_count = 0;
  Vector best;
  double best_error = std::numeric_limits<double>::infinity();

  int size() const { return static_cast<int>(candidates.size()); }
  Vector centroid() const;
};

inline constexpr double kDeInflationFactor = 100.0;

/// N_p uniform samples in [-1, 1]^dim, each evaluated once.
DePopulation de_init(int dim, int np, const Objective& objective, Rng& rng, DeSettings settings = {});

/// x1 + F (x2 - x3).
Vector de_mutant(const Vector& x1, const Vector& x2, const Vector& x3, double F);

/// One synchronous generation: mutation, binomial crossover with one forced
/// coordinate, greedy selection, then symmetry breaking of every candidate
/// (goal: centroid of the population before the update). In Mgop mode the
/// inflation rule is applied as well. Returns the per-candidate flags of the
/// breaking pass.
std::vector<bool> de_step(DePopulation& pop, const Objective& objective, const SymmetryBreaker& breaker, Rng& rng);

/// Multiplies the stored error of candidate j by 100 when it was modified by
/// the breaking pass and j < N_p/2 (storage index).
void de_sb_postprocess(DePopulation& pop, const std::vector<bool>& modified);

// ---------------------------------------------------------------------------
// CMA-ES with rank-mu update and cumulative step size adaptation.

struct CmaSettings {
  // <= 0 selects 0.3 * sqrt(dim), i.e. 30% of the feasible radius.
  double initial_sigma = 0.0;
};

struct CmaState {
  int dim = 0;
  int np = 0;
  int mu = 0;
  Vector weights;  // mu positive weights summing to one
  double mu_eff = 0.0;
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_c = 0.0;
  double c_1 = 0.0;
  double c_mu = 0.0;
  double chi_n = 0.0;  // E||N(0, I)||

  Vector mean;
  double sigma = 0.0;
  Eigen::MatrixXd C;
  Vector p_sigma;
  Vector p_c;
  Eigen::MatrixXd B;  // eigenvectors of C
  Vector D;           // square roots of the eigenvalues of C
  long eigen_eval = 0;

  long eval_count = 0;
  long generation = 0;
  Vector best;
  double best_error = std::numeric_limits<double>::infinity();
  // Norm of the centroid shift of the selected candidates caused by symmetry
  // breaking in the last generation.
  double last_shift_norm = 0.0;
};

inline constexpr double kEigenFloor = 1e-14;

CmaState cmaes_init(int dim, int np, CmaSettings settings = {});

/// Draws N_p candidates from N(m, sigma^2 C), evaluates them, applies
/// symmetry breaking (goal: best so far, including this batch), ranks them and
/// updates mean, paths, covariance and step size.
void cmaes_step(CmaState& state, const Objective& objective, const SymmetryBreaker& breaker, Rng& rng);

/// Weighted recombination where modified candidates contribute the goal
/// estimate instead of themselves. `candidates` are ranked, `weights` aligned.
Vector cmaes_sb_mean(const std::vector<Vector>& candidates, const std::vector<bool>& modified, const Vector& goal,
                     const Vector& weights);

/// sigma * exp(chi * exp(-0.05 dim^2 s_norm)).
double sigma_update(double sigma, double chi, double s_norm, int dim);

}  // namespace symbreak::evolve
