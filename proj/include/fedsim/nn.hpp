#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "fedsim/rng.hpp"

namespace fedsim {

enum class Activation { kIdentity, kRelu, kTanh, kSigmoid };

struct LayerSpec {
  int in_width = 0;
  int out_width = 0;
  Activation activation = Activation::kIdentity;
  bool residual = false;  // adds the layer input to its output; requires in_width == out_width
};

// Dense / residual-MLP architecture description.
struct ModelSpec {
  std::vector<LayerSpec> layers;

  int input_width() const { return layers.empty() ? 0 : layers.front().in_width; }
  int output_width() const { return layers.empty() ? 0 : layers.back().out_width; }

  // Throws std::invalid_argument on width mismatches or bad residual layers.
  void validate() const;

  // Total number of trainable parameters (weights + biases).
  std::int64_t param_count() const;
};

struct LayerExtent {
  std::int64_t offset = 0;
  std::int64_t length = 0;
};

// Flat, ordered view of all trainable weights of one network. The unit of
// aggregation, noise injection, and serialization.
struct ParameterVector {
  Eigen::VectorXd values;
  std::vector<LayerExtent> layout;

  std::int64_t size() const { return values.size(); }
  bool same_layout(const ParameterVector& other) const;

  // Weight block of layer i as an out_width x in_width map (row-major).
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  weights(const ModelSpec& spec, std::size_t layer) const;
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  weights(const ModelSpec& spec, std::size_t layer);

  Eigen::Map<const Eigen::VectorXd> biases(const ModelSpec& spec, std::size_t layer) const;
  Eigen::Map<Eigen::VectorXd> biases(const ModelSpec& spec, std::size_t layer);
};

ParameterVector zeros_like(const ModelSpec& spec);

// Mini-batch: one sample per row.
struct Batch {
  Eigen::MatrixXd inputs;                 // m x input_width
  std::optional<Eigen::VectorXi> labels;  // class ids, when supervised
  int size() const { return static_cast<int>(inputs.rows()); }
};

// Everything forward() computed that backward() needs.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> layer_inputs;  // input to each layer, m x in_width
  std::vector<Eigen::MatrixXd> preacts;       // pre-activation z, m x out_width
  Eigen::MatrixXd output;                     // m x output_width
};

// Glorot-uniform weights, zero biases; deterministic per (spec, seed).
ParameterVector init_params(const ModelSpec& spec, std::uint64_t seed);

ForwardTrace forward(const ModelSpec& spec, const ParameterVector& params,
                     const Eigen::MatrixXd& inputs);

// Backpropagates loss_grad (dLoss/dOutput, m x output_width) to a gradient
// with the same layout as params. When input_grad is non-null it also
// receives dLoss/dInputs, so networks can be chained (generator <- critic).
ParameterVector backward(const ModelSpec& spec, const ParameterVector& params,
                         const ForwardTrace& trace, const Eigen::MatrixXd& loss_grad,
                         Eigen::MatrixXd* input_grad = nullptr);

// Central-difference gradient of an arbitrary scalar loss of the parameters.
// Test oracle; never used on a training path.
ParameterVector finite_diff_grad(const ModelSpec& spec, const ParameterVector& params,
                                 const std::function<double(const ParameterVector&)>& loss,
                                 double h);

// params - alpha * grad.
ParameterVector sgd_step(const ParameterVector& params, const ParameterVector& grad,
                         double alpha);

// Checkpoint format: u64 layer count, per-layer (offset, length) as u64 pairs,
// then the values as little-endian IEEE-754 doubles.
void write_parameter_vector(std::ostream& out, const ParameterVector& pv);
ParameterVector read_parameter_vector(std::istream& in);

double apply_activation(Activation a, double z);

}  // namespace fedsim
