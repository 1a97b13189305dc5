#include "symbreak/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "symbreak/error.hpp"
#include "symbreak/exact_sum.hpp"

namespace symbreak::symmetry {

namespace {

// ||a[idx] - b[idx]||^2 with a sign applied to a; exact so that comparisons
// between replicas only depend on the multiset of terms.
double block_distance(const ParamVector& a, double sign, const std::vector<int>& idx_a, const ParamVector& b,
                      const std::vector<int>& idx_b, ExactSum& acc) {
  acc.clear();
  for (std::size_t i = 0; i < idx_a.size(); ++i) {
    const double d = sign * a[idx_a[i]] - b[idx_b[i]];
    acc.add(d * d);
  }
  return acc.value();
}

// Image of `params` under `g`, written into `out` (same size as params).
void image_into(const ParamLayout& layout, const GroupElement& g, const ParamVector& params, ParamVector& out) {
  const net::Topology& topo = layout.topology();
  for (int l = topo.first_hidden(); l <= topo.last_hidden(); ++l) {
    const auto& perm = g.perm[static_cast<std::size_t>(l)];
    const auto& sign = g.sign[static_cast<std::size_t>(l)];
    const bool prev_hidden = topo.is_hidden(l - 1);
    const int fan = layout.fan_in(l);
    for (int n = 0; n < layout.neuron_count(l); ++n) {
      const int src = perm[static_cast<std::size_t>(n)];
      const double s = sign[static_cast<std::size_t>(n)];
      for (int i = 0; i < fan; ++i) {
        int col = i;
        double s2 = 1.0;
        if (prev_hidden) {
          col = g.perm[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(i)];
          s2 = g.sign[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(i)];
        }
        out[layout.weight_index(l, n, i)] = s * s2 * params[layout.weight_index(l, src, col)];
      }
      out[layout.shift_index(l, n)] = s * params[layout.shift_index(l, src)];
    }
  }
}

}  // namespace

void point_flip(const ParamLayout& layout, ParamVector& params, int layer, int neuron, OutputWeights* out_weights) {
  layout.check_hidden(layer, neuron);
  require(params.size() == layout.dimension(), "point_flip: parameter dimension mismatch");
  params.segment(layout.neuron_offset(layer, neuron), layout.neuron_width(layer)) *= -1.0;
  if (layer < layout.topology().last_hidden()) {
    for (int i = 0; i < layout.neuron_count(layer + 1); ++i) {
      double& w = params[layout.weight_index(layer + 1, i, neuron)];
      w = -w;
    }
  } else if (out_weights != nullptr) {
    out_weights->col(neuron) *= -1.0;
  }
}

void swap_neurons(const ParamLayout& layout, ParamVector& params, int layer, int j, int k,
                  OutputWeights* out_weights) {
  layout.check_hidden(layer, j);
  layout.check_hidden(layer, k);
  require(j != k, "swap_neurons: neurons must differ");
  require(params.size() == layout.dimension(), "swap_neurons: parameter dimension mismatch");
  const int width = layout.neuron_width(layer);
  params.segment(layout.neuron_offset(layer, j), width).swap(params.segment(layout.neuron_offset(layer, k), width));
  if (layer < layout.topology().last_hidden()) {
    for (int i = 0; i < layout.neuron_count(layer + 1); ++i) {
      std::swap(params[layout.weight_index(layer + 1, i, j)], params[layout.weight_index(layer + 1, i, k)]);
    }
  } else if (out_weights != nullptr) {
    out_weights->col(j).swap(out_weights->col(k));
  }
}

ParamVector apply_point(const ParamLayout& layout, ParamVector params, int layer, int neuron) {
  point_flip(layout, params, layer, neuron);
  return params;
}

ParamVector apply_perm(const ParamLayout& layout, ParamVector params, int layer, int j, int k) {
  swap_neurons(layout, params, layer, j, k);
  return params;
}

SymmetryOp SymmetryOp::random(const ParamLayout& layout, int count, Rng& rng) {
  const net::Topology& topo = layout.topology();
  std::uniform_int_distribution<int> pick_layer(topo.first_hidden(), topo.last_hidden());
  std::bernoulli_distribution coin(0.5);
  SymmetryOp op;
  for (int s = 0; s < count; ++s) {
    const int l = pick_layer(rng);
    const int n = layout.neuron_count(l);
    if (n >= 2 && coin(rng)) {
      std::uniform_int_distribution<int> first(0, n - 1);
      std::uniform_int_distribution<int> other(0, n - 2);
      const int j = first(rng);
      int k = other(rng);
      if (k >= j) ++k;
      op.push(Swap{l, j, k});
    } else {
      std::uniform_int_distribution<int> neuron(0, n - 1);
      op.push(PointFlip{l, neuron(rng)});
    }
  }
  return op;
}

void SymmetryOp::apply_in_place(const ParamLayout& layout, ParamVector& params, OutputWeights* out_weights) const {
  for (const Step& step : steps_) {
    if (const auto* p = std::get_if<PointFlip>(&step)) {
      point_flip(layout, params, p->layer, p->neuron, out_weights);
    } else {
      const auto& s = std::get<Swap>(step);
      swap_neurons(layout, params, s.layer, s.j, s.k, out_weights);
    }
  }
}

ParamVector SymmetryOp::apply(const ParamLayout& layout, ParamVector params) const {
  apply_in_place(layout, params);
  return params;
}

OutputWeights SymmetryOp::apply_to_output(const ParamLayout& layout, OutputWeights out_weights) const {
  const int last = layout.topology().last_hidden();
  for (const Step& step : steps_) {
    if (const auto* p = std::get_if<PointFlip>(&step)) {
      if (p->layer == last) out_weights.col(p->neuron) *= -1.0;
    } else {
      const auto& s = std::get<Swap>(step);
      if (s.layer == last) out_weights.col(s.j).swap(out_weights.col(s.k));
    }
  }
  return out_weights;
}

Eigen::VectorXd beta_block(const ParamLayout& layout, const ParamVector& params, int layer, int neuron) {
  const auto& idx = layout.beta_indices(layer, neuron);
  Eigen::VectorXd block(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) block[static_cast<Eigen::Index>(i)] = params[idx[i]];
  return block;
}

ParamVector break_invariant(const ParamLayout& layout, ParamVector params) {
  require(params.size() == layout.dimension(), "break_invariant: parameter dimension mismatch");
  const net::Topology& topo = layout.topology();
  for (int l = topo.first_hidden(); l <= topo.last_hidden(); ++l) {
    const int count = layout.neuron_count(l);
    for (int n = 0; n < count; ++n) {
      if (params[layout.shift_index(l, n)] < 0.0) point_flip(layout, params, l, n);
    }
    // Target order: stable ascending by shift. Realize it with swaps.
    std::vector<int> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return params[layout.shift_index(l, a)] < params[layout.shift_index(l, b)];
    });
    std::vector<int> at(order.size());   // at[slot] = original neuron currently in slot
    std::vector<int> where(order.size());  // where[original neuron] = slot
    std::iota(at.begin(), at.end(), 0);
    std::iota(where.begin(), where.end(), 0);
    for (int slot = 0; slot < count; ++slot) {
      const int want = order[static_cast<std::size_t>(slot)];
      const int from = where[static_cast<std::size_t>(want)];
      if (from == slot) continue;
      swap_neurons(layout, params, l, slot, from);
      const int displaced = at[static_cast<std::size_t>(slot)];
      at[static_cast<std::size_t>(from)] = displaced;
      where[static_cast<std::size_t>(displaced)] = from;
      at[static_cast<std::size_t>(slot)] = want;
      where[static_cast<std::size_t>(want)] = slot;
    }
  }
  return params;
}

ParamVector break_invariant_distance_form(const ParamLayout& layout, ParamVector params) {
  require(params.size() == layout.dimension(), "break_invariant_distance_form: parameter dimension mismatch");
  const net::Topology& topo = layout.topology();
  ExactSum acc;
  for (int l = topo.first_hidden(); l <= topo.last_hidden(); ++l) {
    const int count = layout.neuron_count(l);
    const int shift_pos = layout.fan_in(l);
    auto reference_distance = [&](int n, double sign, bool with_reference) {
      const auto& idx = layout.beta_indices(l, n);
      acc.clear();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const double r = (with_reference && static_cast<int>(i) == shift_pos) ? 1.0 : 0.0;
        const double d = sign * params[idx[i]] - r;
        acc.add(d * d);
      }
      return acc.value();
    };
    for (int n = 0; n < count; ++n) {
      const double keep = reference_distance(n, 1.0, true);
      const double flip = reference_distance(n, -1.0, true);
      if (keep > flip) point_flip(layout, params, l, n);
    }
    bool swapped = true;
    while (swapped) {
      swapped = false;
      for (int n = 0; n + 1 < count; ++n) {
        // Reference (0 | e_shift) on the pair (n, n+1).
        const double keep = reference_distance(n, 1.0, false) + reference_distance(n + 1, 1.0, true);
        const double swap = reference_distance(n + 1, 1.0, false) + reference_distance(n, 1.0, true);
        if (keep > swap) {
          swap_neurons(layout, params, l, n, n + 1);
          swapped = true;
        }
      }
    }
  }
  return params;
}

bool break_mgop_in_place(const ParamLayout& layout, ParamVector& params, const ParamVector& goal, Rng& rng) {
  require(params.size() == layout.dimension() && goal.size() == layout.dimension(),
          "break_mgop: parameter dimension mismatch");
  const net::Topology& topo = layout.topology();
  ExactSum acc;
  bool modified = false;

  for (int l = topo.first_hidden(); l <= topo.last_hidden(); ++l) {
    for (int n = 0; n < layout.neuron_count(l); ++n) {
      const auto& idx = layout.beta_indices(l, n);
      const double keep = block_distance(params, 1.0, idx, goal, idx, acc);
      const double flip = block_distance(params, -1.0, idx, goal, idx, acc);
      if (keep > flip) {
        point_flip(layout, params, l, n);
        modified = true;
      }
    }
  }

  for (int l = topo.first_hidden(); l <= topo.last_hidden(); ++l) {
    const int count = layout.neuron_count(l);
    if (count < 2) continue;
    std::uniform_int_distribution<int> first(0, count - 1);
    std::uniform_int_distribution<int> other(0, count - 2);
    const int m = first(rng);
    int n = other(rng);
    if (n >= m) ++n;
    const auto& bm = layout.beta_indices(l, m);
    const auto& bn = layout.beta_indices(l, n);
    const double keep = block_distance(params, 1.0, bn, goal, bn, acc) + block_distance(params, 1.0, bm, goal, bm, acc);
    const double swap = block_distance(params, 1.0, bn, goal, bm, acc) + block_distance(params, 1.0, bm, goal, bn, acc);
    if (keep > swap) {
      swap_neurons(layout, params, l, m, n);
      modified = true;
    }
  }
  return modified;
}

MgopResult break_mgop(const ParamLayout& layout, ParamVector params, const ParamVector& goal, Rng& rng) {
  MgopResult result;
  result.modified = break_mgop_in_place(layout, params, goal, rng);
  result.params = std::move(params);
  return result;
}

bool GroupElement::is_identity() const {
  for (std::size_t l = 0; l < perm.size(); ++l) {
    for (std::size_t n = 0; n < perm[l].size(); ++n) {
      if (perm[l][n] != static_cast<int>(n) || sign[l][n] != 1) return false;
    }
  }
  return true;
}

ParamVector GroupElement::apply(const ParamLayout& layout, const ParamVector& params) const {
  require(params.size() == layout.dimension(), "GroupElement::apply: parameter dimension mismatch");
  ParamVector out(params.size());
  image_into(layout, *this, params, out);
  return out;
}

OutputWeights GroupElement::apply_to_output(const ParamLayout& layout, const OutputWeights& out_weights) const {
  const int last = layout.topology().last_hidden();
  OutputWeights out(out_weights.rows(), out_weights.cols());
  for (int n = 0; n < layout.neuron_count(last); ++n) {
    out.col(n) = sign[static_cast<std::size_t>(last)][static_cast<std::size_t>(n)] *
                 out_weights.col(perm[static_cast<std::size_t>(last)][static_cast<std::size_t>(n)]);
  }
  return out;
}

SymmetryGroup::SymmetryGroup(const ParamLayout& layout) : layout_(&layout) {
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  auto mul = [&](std::uint64_t f) { size_ = (size_ > kMax / f) ? kMax : size_ * f; };
  const net::Topology& topo = layout.topology();
  for (int l = topo.first_hidden(); l <= topo.last_hidden(); ++l) {
    const int n = layout.neuron_count(l);
    for (int i = 0; i < n; ++i) mul(2);
    for (int i = 2; i <= n; ++i) mul(static_cast<std::uint64_t>(i));
  }
}

void SymmetryGroup::for_each(const std::function<bool(const GroupElement&)>& visit) const {
  if (size_ == std::numeric_limits<std::uint64_t>::max()) {
    throw BruteForceInfeasible("symmetry group of " + layout_->topology().to_string() + " is too large to enumerate");
  }
  const net::Topology& topo = layout_->topology();
  const auto layers = static_cast<std::size_t>(topo.layer_count());
  GroupElement g;
  g.perm.resize(layers);
  g.sign.resize(layers);
  std::vector<std::uint64_t> mask(layers, 0);
  for (int l = topo.first_hidden(); l <= topo.last_hidden(); ++l) {
    const auto n = static_cast<std::size_t>(layout_->neuron_count(l));
    g.perm[static_cast<std::size_t>(l)].resize(n);
    std::iota(g.perm[static_cast<std::size_t>(l)].begin(), g.perm[static_cast<std::size_t>(l)].end(), 0);
    g.sign[static_cast<std::size_t>(l)].assign(n, 1);
  }

  while (true) {
    if (!visit(g)) return;
    // Odometer increment; returns when every digit wrapped around.
    int l = topo.first_hidden();
    for (; l <= topo.last_hidden(); ++l) {
      const auto li = static_cast<std::size_t>(l);
      const int n = layout_->neuron_count(l);
      const std::uint64_t limit = std::uint64_t{1} << n;
      if (++mask[li] < limit) {
        for (int i = 0; i < n; ++i) g.sign[li][static_cast<std::size_t>(i)] = ((mask[li] >> i) & 1U) ? -1 : 1;
        break;
      }
      mask[li] = 0;
      std::fill(g.sign[li].begin(), g.sign[li].end(), 1);
      if (std::next_permutation(g.perm[li].begin(), g.perm[li].end())) break;
      // Permutation wrapped back to the identity: carry into the next layer.
    }
    if (l > topo.last_hidden()) return;
  }
}

ParamVector break_ideal_bf(const ParamLayout& layout, const ParamVector& params, const ParamVector& goal,
                           std::uint64_t cap) {
  require(params.size() == layout.dimension() && goal.size() == layout.dimension(),
          "break_ideal_bf: parameter dimension mismatch");
  const SymmetryGroup group(layout);
  if (group.size() > cap) {
    throw BruteForceInfeasible("brute force symmetry breaking infeasible: group of " +
                               layout.topology().to_string() + " has " + std::to_string(group.size()) +
                               " elements, cap is " + std::to_string(cap));
  }
  ParamVector image(params.size());
  ParamVector best = params;
  double best_distance = std::numeric_limits<double>::infinity();
  ExactSum acc;
  group.for_each([&](const GroupElement& g) {
    image_into(layout, g, params, image);
    acc.clear();
    for (Eigen::Index i = 0; i < image.size(); ++i) {
      const double d = image[i] - goal[i];
      acc.add(d * d);
    }
    const double dist = acc.value();
    if (dist < best_distance) {
      best_distance = dist;
      best = image;
    }
    return true;
  });
  return best;
}

double separation_distance(const Eigen::VectorXd& goal, SortKey key) {
  require(goal.size() == 4, "separation_distance: expects the two-neuron layout (a1, b1, a2, b2)");
  // Closest point of {(l, x, l, y)} puts l at the mean of the two sorted
  // coordinates and leaves the free coordinates unchanged.
  const int first = key == SortKey::ByA ? 0 : 1;
  const double u = goal[first];
  const double v = goal[first + 2];
  const double mid = 0.5 * (u + v);
  return std::sqrt((u - mid) * (u - mid) + (v - mid) * (v - mid));
}

}  // namespace symbreak::symmetry
