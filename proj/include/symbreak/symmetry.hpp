#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "symbreak/net.hpp"

// Sign-flip and neuron-swap symmetries of tanh networks, acting on the flat
// hidden-layer parameter vector, plus the rules that pick one replica out of
// the orbit of a candidate.
namespace symbreak::symmetry {

using net::OutputWeights;
using net::ParamLayout;
using net::ParamVector;
using Rng = std::mt19937_64;

struct PointFlip {
  int layer;
  int neuron;
};

struct Swap {
  int layer;
  int j;
  int k;
};

using Step = std::variant<PointFlip, Swap>;

// In-place primitives. On the last hidden layer they only touch the neuron's
// own parameters; pass `out_weights` to co-transform the output layer columns.
void point_flip(const ParamLayout& layout, ParamVector& params, int layer, int neuron,
                OutputWeights* out_weights = nullptr);
void swap_neurons(const ParamLayout& layout, ParamVector& params, int layer, int j, int k,
                  OutputWeights* out_weights = nullptr);

ParamVector apply_point(const ParamLayout& layout, ParamVector params, int layer, int neuron);
ParamVector apply_perm(const ParamLayout& layout, ParamVector params, int layer, int j, int k);

/// A composite operator: primitive steps applied in order.
class SymmetryOp {
 public:
  SymmetryOp() = default;
  explicit SymmetryOp(std::vector<Step> steps) : steps_(std::move(steps)) {}

  /// `count` uniformly chosen primitive steps (swaps only on layers with two or more neurons).
  static SymmetryOp random(const ParamLayout& layout, int count, Rng& rng);

  void push(Step step) { steps_.push_back(step); }
  const std::vector<Step>& steps() const { return steps_; }

  ParamVector apply(const ParamLayout& layout, ParamVector params) const;
  void apply_in_place(const ParamLayout& layout, ParamVector& params, OutputWeights* out_weights = nullptr) const;
  /// Transforms the output layer weights the way the last hidden layer steps require.
  OutputWeights apply_to_output(const ParamLayout& layout, OutputWeights out_weights) const;

 private:
  std::vector<Step> steps_;
};

/// Copy of the symmetry relevant block of hidden neuron (layer, neuron).
Eigen::VectorXd beta_block(const ParamLayout& layout, const ParamVector& params, int layer, int neuron);

/// Goal-independent canonical form: every shift made nonnegative by point
/// flips, then neurons of each hidden layer stably sorted by ascending shift
/// (the order the distance form below selects). Layers are processed from the
/// input side.
ParamVector break_invariant(const ParamLayout& layout, ParamVector params);

/// The same rules written as distance comparisons against a fixed reference:
/// a neuron block is flipped when -beta is strictly closer than beta to the
/// unit vector on its shift entry, and adjacent neurons are swapped (bubble
/// passes) when the swapped pair is strictly closer to (0|e_shift).
ParamVector break_invariant_distance_form(const ParamLayout& layout, ParamVector params);

struct MgopResult {
  ParamVector params;
  bool modified = false;
};

/// Greedy closest-replica approximation: per neuron a sign flip whenever it
/// strictly reduces the block distance to `goal`, then per hidden layer one
/// uniformly drawn neuron pair swapped when that strictly reduces the distance.
/// Layers with a single neuron skip the swap phase.
MgopResult break_mgop(const ParamLayout& layout, ParamVector params, const ParamVector& goal, Rng& rng);
bool break_mgop_in_place(const ParamLayout& layout, ParamVector& params, const ParamVector& goal, Rng& rng);

/// One element of the full group: per hidden layer a neuron permutation and a
/// sign per neuron. Neuron n of the image takes the (sign-adjusted) parameters
/// of neuron perm[n] of the source.
struct GroupElement {
  std::vector<std::vector<int>> perm;   // indexed by layer (empty for non-hidden layers)
  std::vector<std::vector<int>> sign;   // +1 / -1, same indexing

  bool is_identity() const;
  ParamVector apply(const ParamLayout& layout, const ParamVector& params) const;
  OutputWeights apply_to_output(const ParamLayout& layout, const OutputWeights& out_weights) const;
};

/// Enumerates prod_l 2^{N_l} N_l! elements. The identity comes first; the first
/// hidden layer is the fastest varying digit and within a layer the sign mask
/// varies faster than the permutation (lexicographic order).
class SymmetryGroup {
 public:
  explicit SymmetryGroup(const ParamLayout& layout);

  /// Group order, saturated at UINT64_MAX.
  std::uint64_t size() const { return size_; }

  /// Calls `visit` on every element; stops early if it returns false.
  void for_each(const std::function<bool(const GroupElement&)>& visit) const;

 private:
  const ParamLayout* layout_;
  std::uint64_t size_ = 1;
};

class BruteForceInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultBruteForceCap = 10'000'000;

/// Exact closest replica of `params` to `goal` over the whole group. Ties keep
/// the element enumerated first, so a params vector that is already closest is
/// returned unchanged.
ParamVector break_ideal_bf(const ParamLayout& layout, const ParamVector& params, const ParamVector& goal,
                           std::uint64_t cap = kDefaultBruteForceCap);

enum class SortKey { ByA, ByB };

/// Two neurons with two parameters each, laid out (a1, b1, a2, b2). Distance
/// from `goal` to the separating set of the sort-by-a rule {(l, x, l, y)} or
/// the sort-by-b rule {(x, l, y, l)}.
double separation_distance(const Eigen::VectorXd& goal, SortKey key);

}  // namespace symbreak::symmetry
