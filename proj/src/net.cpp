#include "symbreak/net.hpp"

#include <cmath>
#include <sstream>

#include "symbreak/error.hpp"
#include "symbreak/exact_sum.hpp"

namespace symbreak::net {

namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void check_params(const ParamLayout& layout, const ParamVector& params) {
  if (params.size() != layout.dimension()) {
    throw ContractError("parameter vector has dimension " + std::to_string(params.size()) + ", topology " +
                        layout.topology().to_string() + " needs " + std::to_string(layout.dimension()));
  }
}

Eigen::MatrixXd output_layer(const Topology& topology, const Eigen::MatrixXd& hidden,
                             const OutputWeights& out_weights) {
  Eigen::MatrixXd z = hidden * out_weights.transpose();
  if (topology.mode() == OutputMode::Classification) z = z.array().tanh().matrix();
  return z;
}

}  // namespace

Topology::Topology(std::vector<int> layer_sizes, OutputMode mode) : sizes_(std::move(layer_sizes)), mode_(mode) {
  require(sizes_.size() >= 3, "topology needs an input, an output and at least one hidden layer");
  for (int n : sizes_) require(n >= 1, "topology layer sizes must be positive");
}

Topology Topology::parse(std::string_view text, OutputMode mode) {
  std::vector<int> sizes;
  std::string token;
  std::stringstream ss{std::string(text)};
  while (std::getline(ss, token, '-')) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(token, &used);
      if (used != token.size()) throw std::invalid_argument("");
      sizes.push_back(n);
    } catch (const std::exception&) {
      throw InputError("bad topology '" + std::string(text) + "'");
    }
  }
  if (sizes.size() < 3) throw InputError("bad topology '" + std::string(text) + "': need at least 3 layers");
  for (int n : sizes) {
    if (n < 1) throw InputError("bad topology '" + std::string(text) + "': sizes must be positive");
  }
  return Topology(std::move(sizes), mode);
}

std::string Topology::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < sizes_.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(sizes_[i]);
  }
  return s;
}

ParamLayout::ParamLayout(Topology topology) : topology_(std::move(topology)) {
  const int layers = topology_.layer_count();
  layer_offsets_.assign(static_cast<std::size_t>(layers), 0);
  for (int l = topology_.first_hidden(); l <= topology_.last_hidden(); ++l) {
    layer_offsets_[static_cast<std::size_t>(l)] = dimension_;
    dimension_ += neuron_count(l) * neuron_width(l);
  }
  beta_.resize(static_cast<std::size_t>(layers));
  for (int l = topology_.first_hidden(); l <= topology_.last_hidden(); ++l) {
    auto& layer = beta_[static_cast<std::size_t>(l)];
    layer.resize(static_cast<std::size_t>(neuron_count(l)));
    for (int n = 0; n < neuron_count(l); ++n) {
      auto& idx = layer[static_cast<std::size_t>(n)];
      for (int i = 0; i < neuron_width(l); ++i) idx.push_back(neuron_offset(l, n) + i);
      if (l < topology_.last_hidden()) {
        for (int i = 0; i < neuron_count(l + 1); ++i) idx.push_back(weight_index(l + 1, i, n));
      }
    }
  }
}

int ParamLayout::layer_offset(int layer) const {
  require(topology_.is_hidden(layer), "layer " + std::to_string(layer) + " is not a hidden layer");
  return layer_offsets_[static_cast<std::size_t>(layer)];
}

int ParamLayout::neuron_offset(int layer, int neuron) const {
  return layer_offset(layer) + neuron * neuron_width(layer);
}

void ParamLayout::check_hidden(int layer, int neuron) const {
  if (!topology_.is_hidden(layer) || neuron < 0 || neuron >= neuron_count(layer)) {
    throw ContractError("no hidden neuron (" + std::to_string(layer) + ", " + std::to_string(neuron) +
                        ") in topology " + topology_.to_string());
  }
}

const std::vector<int>& ParamLayout::beta_indices(int layer, int neuron) const {
  check_hidden(layer, neuron);
  return beta_[static_cast<std::size_t>(layer)][static_cast<std::size_t>(neuron)];
}

Eigen::MatrixXd hidden_activations(const ParamLayout& layout, const ParamVector& params,
                                   const Eigen::MatrixXd& inputs) {
  check_params(layout, params);
  const Topology& topo = layout.topology();
  require(inputs.cols() == topo.input_dim(), "input dimension does not match topology " + topo.to_string());
  Eigen::MatrixXd x = inputs;
  for (int l = topo.first_hidden(); l <= topo.last_hidden(); ++l) {
    const int fan = layout.fan_in(l);
    const RowMajorMap block(params.data() + layout.layer_offset(l), layout.neuron_count(l), fan + 1);
    Eigen::MatrixXd z = x * block.leftCols(fan).transpose();
    z.rowwise() += block.col(fan).transpose();
    x = z.array().tanh().matrix();
  }
  return x;
}

Eigen::MatrixXd predict(const ParamLayout& layout, const ParamVector& params, const OutputWeights& out_weights,
                        const Eigen::MatrixXd& inputs) {
  const Topology& topo = layout.topology();
  require(out_weights.rows() == topo.output_dim() && out_weights.cols() == topo.size(topo.last_hidden()),
          "output weights shape does not match topology " + topo.to_string());
  return output_layer(topo, hidden_activations(layout, params, inputs), out_weights);
}

Eigen::VectorXd forward(const ParamLayout& layout, const ParamVector& params, const OutputWeights& out_weights,
                        const Eigen::VectorXd& input) {
  return predict(layout, params, out_weights, input.transpose()).row(0).transpose();
}

OutputWeights solve_output_weights(const Topology& topology, const Eigen::MatrixXd& hidden,
                                   const Eigen::MatrixXd& targets) {
  const Eigen::Index h = topology.size(topology.last_hidden());
  require(hidden.rows() >= 1, "solve_output_weights: need at least one sample");
  require(hidden.cols() == h, "solve_output_weights: activation width does not match topology");
  require(targets.rows() == hidden.rows() && targets.cols() == topology.output_dim(),
          "solve_output_weights: target shape mismatch");

  Eigen::MatrixXd gram = hidden.transpose() * hidden;
  const double ridge = kRidgeFactor * gram.trace() / static_cast<double>(h);
  // All activations exactly zero: every W fits equally well.
  if (!(ridge > 0.0)) return OutputWeights::Zero(topology.output_dim(), h);
  gram.diagonal().array() += ridge;

  Eigen::MatrixXd rhs = hidden.transpose() * targets;
  if (topology.mode() == OutputMode::Classification) rhs *= kClassificationTargetScale;
  return gram.ldlt().solve(rhs).transpose();
}

double mean_squared_error(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& predictions) {
  require(targets.rows() == predictions.rows() && targets.cols() == predictions.cols(),
          "mean_squared_error: shape mismatch");
  require(targets.size() > 0, "mean_squared_error: empty data");
  return (targets - predictions).squaredNorm() / static_cast<double>(targets.size());
}

Fit fit(const ParamLayout& layout, const ParamVector& params, const data::Dataset& dataset) {
  require(dataset.size() >= 1, "empty dataset");
  const Topology& topo = layout.topology();
  require(dataset.output_dim() == topo.output_dim(), "dataset target dimension does not match topology");
  const Eigen::MatrixXd hidden = hidden_activations(layout, params, dataset.inputs);
  Fit result;
  result.out_weights = solve_output_weights(topo, hidden, dataset.targets);
  result.error = mean_squared_error(dataset.targets, output_layer(topo, hidden, result.out_weights));
  return result;
}

double mse(const ParamLayout& layout, const ParamVector& params, const data::Dataset& dataset) {
  return fit(layout, params, dataset).error;
}

double penalized_error(const ParamLayout& layout, const ParamVector& params, const data::Dataset& dataset) {
  check_params(layout, params);
  const double norm = exact_norm(std::span<const double>(params.data(), static_cast<std::size_t>(params.size())));
  const double radius = std::sqrt(static_cast<double>(layout.dimension()));
  if (norm <= radius) return mse(layout, params, dataset);
  const ParamVector rescaled = params / norm;
  return mse(layout, rescaled, dataset) + kPenaltyWeight * (norm - radius);
}

double classification_error_rate(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& predictions) {
  require(targets.rows() == predictions.rows() && targets.cols() == predictions.cols(),
          "classification_error_rate: shape mismatch");
  require(targets.rows() > 0, "classification_error_rate: empty data");
  long wrong = 0;
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    Eigen::Index want = 0;
    Eigen::Index got = 0;
    targets.row(i).maxCoeff(&want);
    predictions.row(i).maxCoeff(&got);
    if (want != got) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(targets.rows());
}

}  // namespace symbreak::net
