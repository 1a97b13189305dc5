#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "symbreak/data.hpp"

// Fixed-topology tanh feedforward networks. Only the hidden layers live in the
// optimized parameter vector; the output layer weights are re-fitted by least
// squares for every candidate.
namespace symbreak::net {

enum class OutputMode { Regression, Classification };

/// Layer sizes N_0..N_{L-1}: input, at least one hidden layer, output.
/// Layer indices in this library are 0-based, so hidden layers are 1..L-2.
class Topology {
 public:
  Topology(std::vector<int> layer_sizes, OutputMode mode);

  /// Parses the dash form used throughout the docs, e.g. "2-3-4-2".
  static Topology parse(std::string_view text, OutputMode mode);

  int layer_count() const { return static_cast<int>(sizes_.size()); }
  int size(int layer) const { return sizes_.at(static_cast<std::size_t>(layer)); }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int first_hidden() const { return 1; }
  int last_hidden() const { return layer_count() - 2; }
  bool is_hidden(int layer) const { return layer >= first_hidden() && layer <= last_hidden(); }
  OutputMode mode() const { return mode_; }
  const std::vector<int>& sizes() const { return sizes_; }
  std::string to_string() const;

  bool operator==(const Topology&) const = default;

 private:
  std::vector<int> sizes_;
  OutputMode mode_;
};

using ParamVector = Eigen::VectorXd;
/// q x N_{L-1}; row n holds the weights of output n.
using OutputWeights = Eigen::MatrixXd;

/// Maps (layer, neuron) to the contiguous slice [w_1..w_fanin, tau] of the flat
/// hidden-layer parameter vector. Layers are stored in order, neurons in order
/// within a layer, the shift is the last entry of each neuron slice.
class ParamLayout {
 public:
  explicit ParamLayout(Topology topology);

  const Topology& topology() const { return topology_; }
  int dimension() const { return dimension_; }
  int neuron_count(int layer) const { return topology_.size(layer); }
  int fan_in(int layer) const { return topology_.size(layer - 1); }
  int layer_offset(int layer) const;
  int neuron_offset(int layer, int neuron) const;
  int neuron_width(int layer) const { return fan_in(layer) + 1; }
  int weight_index(int layer, int neuron, int input) const { return neuron_offset(layer, neuron) + input; }
  int shift_index(int layer, int neuron) const { return neuron_offset(layer, neuron) + fan_in(layer); }

  /// Indices of the symmetry relevant block of a hidden neuron: its own
  /// weights and shift, followed by the weight it feeds into each neuron of the
  /// next layer when that layer is hidden as well.
  const std::vector<int>& beta_indices(int layer, int neuron) const;

  void check_hidden(int layer, int neuron) const;

 private:
  Topology topology_;
  int dimension_ = 0;
  std::vector<int> layer_offsets_;
  std::vector<std::vector<std::vector<int>>> beta_;
};

/// Activations of the last hidden layer for every input row (K x N_{L-1}).
Eigen::MatrixXd hidden_activations(const ParamLayout& layout, const ParamVector& params,
                                   const Eigen::MatrixXd& inputs);

/// Network output for a single input vector.
Eigen::VectorXd forward(const ParamLayout& layout, const ParamVector& params, const OutputWeights& out_weights,
                        const Eigen::VectorXd& input);

/// Batch output, one row per input row.
Eigen::MatrixXd predict(const ParamLayout& layout, const ParamVector& params, const OutputWeights& out_weights,
                        const Eigen::MatrixXd& inputs);

inline constexpr double kClassificationTargetScale = 20.0;
inline constexpr double kRidgeFactor = 1e-8;
inline constexpr double kPenaltyWeight = 50.0;

/// Ridge-regularized normal equations for the linear output layer. In
/// classification mode the targets are scaled by 20 before the fit so that the
/// fitted pre-activations saturate tanh.
OutputWeights solve_output_weights(const Topology& topology, const Eigen::MatrixXd& hidden,
                                   const Eigen::MatrixXd& targets);

struct Fit {
  OutputWeights out_weights;
  double error = 0.0;
};

/// Solves the output layer on `dataset` and returns it with the resulting mse.
Fit fit(const ParamLayout& layout, const ParamVector& params, const data::Dataset& dataset);

double mean_squared_error(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& predictions);

/// Training error of `params` with output weights re-solved on `dataset`.
double mse(const ParamLayout& layout, const ParamVector& params, const data::Dataset& dataset);

/// mse inside the ball ||theta|| <= sqrt(D). Outside it, the mse is taken at
/// theta/||theta|| (the unit sphere, not the ball surface, so the error jumps
/// at the boundary) plus 50*(||theta|| - sqrt(D)).
double penalized_error(const ParamLayout& layout, const ParamVector& params, const data::Dataset& dataset);

/// Fraction of rows whose arg-max output differs from the arg-max target.
double classification_error_rate(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& predictions);

}  // namespace symbreak::net
