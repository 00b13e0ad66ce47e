#include "fedsim/nn.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace fedsim {

namespace {

std::int64_t layer_param_count(const LayerSpec& l) {
  return static_cast<std::int64_t>(l.out_width) * l.in_width + l.out_width;
}

std::vector<LayerExtent> make_layout(const ModelSpec& spec) {
  std::vector<LayerExtent> layout;
  layout.reserve(spec.layers.size());
  std::int64_t offset = 0;
  for (const auto& l : spec.layers) {
    const std::int64_t len = layer_param_count(l);
    layout.push_back({offset, len});
    offset += len;
  }
  return layout;
}

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::kIdentity:
      return z;
    case Activation::kRelu:
      return z.cwiseMax(0.0);
    case Activation::kTanh:
      return z.array().tanh().matrix();
    case Activation::kSigmoid:
      return (1.0 / (1.0 + (-z.array()).exp())).matrix();
  }
  throw std::logic_error("unknown activation");
}

// Derivative of the activation evaluated at pre-activation z.
Eigen::MatrixXd activate_grad(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::kIdentity:
      return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    case Activation::kRelu:
      return (z.array() > 0.0).cast<double>().matrix();
    case Activation::kTanh: {
      Eigen::ArrayXXd t = z.array().tanh();
      return (1.0 - t * t).matrix();
    }
    case Activation::kSigmoid: {
      Eigen::ArrayXXd s = 1.0 / (1.0 + (-z.array()).exp());
      return (s * (1.0 - s)).matrix();
    }
  }
  throw std::logic_error("unknown activation");
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw std::runtime_error("truncated parameter vector stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

double apply_activation(Activation a, double z) {
  switch (a) {
    case Activation::kIdentity:
      return z;
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kSigmoid:
      return 1.0 / (1.0 + std::exp(-z));
  }
  throw std::logic_error("unknown activation");
}

void ModelSpec::validate() const {
  if (layers.empty()) throw std::invalid_argument("ModelSpec: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.in_width <= 0 || l.out_width <= 0)
      throw std::invalid_argument("ModelSpec: layer widths must be positive");
    if (l.residual && l.in_width != l.out_width)
      throw std::invalid_argument("ModelSpec: residual layer needs equal in/out width");
    if (i + 1 < layers.size() && l.out_width != layers[i + 1].in_width)
      throw std::invalid_argument("ModelSpec: width mismatch between layers " +
                                  std::to_string(i) + " and " + std::to_string(i + 1));
  }
}

std::int64_t ModelSpec::param_count() const {
  std::int64_t n = 0;
  for (const auto& l : layers) n += layer_param_count(l);
  return n;
}

bool ParameterVector::same_layout(const ParameterVector& other) const {
  if (layout.size() != other.layout.size()) return false;
  for (std::size_t i = 0; i < layout.size(); ++i)
    if (layout[i].offset != other.layout[i].offset || layout[i].length != other.layout[i].length)
      return false;
  return values.size() == other.values.size();
}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
ParameterVector::weights(const ModelSpec& spec, std::size_t layer) const {
  const auto& l = spec.layers[layer];
  return {values.data() + layout[layer].offset, l.out_width, l.in_width};
}

Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
ParameterVector::weights(const ModelSpec& spec, std::size_t layer) {
  const auto& l = spec.layers[layer];
  return {values.data() + layout[layer].offset, l.out_width, l.in_width};
}

Eigen::Map<const Eigen::VectorXd> ParameterVector::biases(const ModelSpec& spec,
                                                          std::size_t layer) const {
  const auto& l = spec.layers[layer];
  return {values.data() + layout[layer].offset +
              static_cast<std::int64_t>(l.out_width) * l.in_width,
          l.out_width};
}

Eigen::Map<Eigen::VectorXd> ParameterVector::biases(const ModelSpec& spec, std::size_t layer) {
  const auto& l = spec.layers[layer];
  return {values.data() + layout[layer].offset +
              static_cast<std::int64_t>(l.out_width) * l.in_width,
          l.out_width};
}

ParameterVector zeros_like(const ModelSpec& spec) {
  spec.validate();
  ParameterVector pv;
  pv.layout = make_layout(spec);
  pv.values = Eigen::VectorXd::Zero(spec.param_count());
  return pv;
}

ParameterVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  ParameterVector pv = zeros_like(spec);
  Rng rng(seed);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const double limit = std::sqrt(6.0 / (l.in_width + l.out_width));
    auto w = pv.weights(spec, i);
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    // biases stay zero
  }
  return pv;
}

ForwardTrace forward(const ModelSpec& spec, const ParameterVector& params,
                     const Eigen::MatrixXd& inputs) {
  spec.validate();
  if (params.size() != spec.param_count())
    throw std::invalid_argument("forward: parameter count mismatch");
  if (inputs.cols() != spec.input_width())
    throw std::invalid_argument("forward: input width mismatch");

  ForwardTrace trace;
  trace.layer_inputs.reserve(spec.layers.size());
  trace.preacts.reserve(spec.layers.size());

  Eigen::MatrixXd x = inputs;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    trace.layer_inputs.push_back(x);
    Eigen::MatrixXd z =
        (x * params.weights(spec, i).transpose()).rowwise() +
        params.biases(spec, i).transpose();
    trace.preacts.push_back(z);
    Eigen::MatrixXd a = activate(l.activation, z);
    if (l.residual) a += x;
    x = std::move(a);
  }
  trace.output = std::move(x);
  return trace;
}

ParameterVector backward(const ModelSpec& spec, const ParameterVector& params,
                         const ForwardTrace& trace, const Eigen::MatrixXd& loss_grad,
                         Eigen::MatrixXd* input_grad) {
  if (trace.layer_inputs.size() != spec.layers.size())
    throw std::invalid_argument("backward: trace does not match spec");
  if (loss_grad.rows() != trace.output.rows() || loss_grad.cols() != trace.output.cols())
    throw std::invalid_argument("backward: loss gradient shape mismatch");

  ParameterVector grad = zeros_like(spec);
  Eigen::MatrixXd g = loss_grad;  // dLoss/d(layer output)
  for (std::size_t i = spec.layers.size(); i-- > 0;) {
    const auto& l = spec.layers[i];
    Eigen::MatrixXd dz = g.cwiseProduct(activate_grad(l.activation, trace.preacts[i]));
    grad.weights(spec, i) = dz.transpose() * trace.layer_inputs[i];
    grad.biases(spec, i) = dz.colwise().sum().transpose();
    Eigen::MatrixXd dx = dz * params.weights(spec, i);
    if (l.residual) dx += g;  // skip path carries the gradient through unchanged
    g = std::move(dx);
  }
  if (input_grad) *input_grad = std::move(g);
  return grad;
}

ParameterVector finite_diff_grad(const ModelSpec& spec, const ParameterVector& params,
                                 const std::function<double(const ParameterVector&)>& loss,
                                 double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_grad: h must be positive");
  ParameterVector grad = zeros_like(spec);
  ParameterVector probe = params;
  for (std::int64_t i = 0; i < params.size(); ++i) {
    const double orig = probe.values[i];
    probe.values[i] = orig + h;
    const double up = loss(probe);
    probe.values[i] = orig - h;
    const double down = loss(probe);
    probe.values[i] = orig;
    grad.values[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

ParameterVector sgd_step(const ParameterVector& params, const ParameterVector& grad,
                         double alpha) {
  if (!params.same_layout(grad)) throw std::invalid_argument("sgd_step: layout mismatch");
  ParameterVector out = params;
  out.values -= alpha * grad.values;
  return out;
}

void write_parameter_vector(std::ostream& out, const ParameterVector& pv) {
  write_u64(out, pv.layout.size());
  for (const auto& ext : pv.layout) {
    write_u64(out, static_cast<std::uint64_t>(ext.offset));
    write_u64(out, static_cast<std::uint64_t>(ext.length));
  }
  for (std::int64_t i = 0; i < pv.values.size(); ++i) {
    std::uint64_t bits;
    const double v = pv.values[i];
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
  }
}

ParameterVector read_parameter_vector(std::istream& in) {
  ParameterVector pv;
  const std::uint64_t n_layers = read_u64(in);
  pv.layout.resize(n_layers);
  std::int64_t total = 0;
  for (auto& ext : pv.layout) {
    ext.offset = static_cast<std::int64_t>(read_u64(in));
    ext.length = static_cast<std::int64_t>(read_u64(in));
    if (ext.offset != total) throw std::runtime_error("parameter vector layout not contiguous");
    total += ext.length;
  }
  pv.values.resize(total);
  for (std::int64_t i = 0; i < total; ++i) {
    const std::uint64_t bits = read_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    pv.values[i] = v;
  }
  return pv;
}

}  // namespace fedsim
