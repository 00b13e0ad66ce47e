#include "fedsim/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fedsim {

void ClassifierConfig::validate() const {
  spec.validate();
  if (spec.output_width() != classes)
    throw std::invalid_argument("ClassifierConfig: output width must equal class count");
  if (alpha < 0.0) throw std::invalid_argument("ClassifierConfig: alpha must be >= 0");
  if (local_epochs < 1) throw std::invalid_argument("ClassifierConfig: E must be >= 1");
  if (batch < 1) throw std::invalid_argument("ClassifierConfig: B must be >= 1");
}

ModelSpec default_classifier_spec(int input_dim, int hidden, int classes) {
  ModelSpec spec;
  spec.layers = {
      {input_dim, hidden, Activation::kRelu, false},
      {hidden, hidden, Activation::kRelu, true},
      {hidden, hidden, Activation::kRelu, true},
      {hidden, hidden, Activation::kRelu, false},
      {hidden, classes, Activation::kIdentity, false},
  };
  return spec;
}

SoftmaxResult softmax_cross_entropy(const Eigen::MatrixXd& logits,
                                    const Eigen::VectorXi& labels) {
  const int m = static_cast<int>(logits.rows());
  const int classes = static_cast<int>(logits.cols());
  if (m != labels.size())
    throw std::invalid_argument("softmax_cross_entropy: batch size mismatch");
  if (m == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");

  SoftmaxResult res;
  res.grad.resize(m, classes);
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= classes)
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
    const double mx = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - mx).exp();
    const double z = e.sum();
    Eigen::ArrayXd p = e / z;
    total += -(std::log(p[y]));
    res.grad.row(i) = p.matrix().transpose() / m;
    res.grad(i, y) -= 1.0 / m;
  }
  res.loss = total / m;
  return res;
}

ParameterVector classifier_gradient(const ModelSpec& spec, const ParameterVector& params,
                                    const Eigen::MatrixXd& inputs,
                                    const Eigen::VectorXi& labels, double* loss_out) {
  ForwardTrace trace = forward(spec, params, inputs);
  SoftmaxResult sm = softmax_cross_entropy(trace.output, labels);
  if (loss_out) *loss_out = sm.loss;
  return backward(spec, params, trace, sm.grad);
}

ParameterVector local_train(const ParameterVector& params, const ClientShard& shard,
                            const ClassifierConfig& cfg, Rng& rng, double* mean_loss_out) {
  cfg.validate();
  const int n = shard.n_k();
  if (n == 0) throw std::invalid_argument("local_train: empty shard");

  ParameterVector p = params;
  double loss_sum = 0.0;
  int steps = 0;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    for (int start = 0; start < n; start += cfg.batch) {
      const int take = std::min(cfg.batch, n - start);
      Eigen::MatrixXd x(take, shard.dataset.dim());
      Eigen::VectorXi y(take);
      for (int j = 0; j < take; ++j) {
        x.row(j) = shard.dataset.samples.row(order[static_cast<std::size_t>(start + j)]);
        y[j] = shard.dataset.labels[order[static_cast<std::size_t>(start + j)]];
      }
      double loss = 0.0;
      ParameterVector grad = classifier_gradient(cfg.spec, p, x, y, &loss);
      p = sgd_step(p, grad, cfg.alpha);
      loss_sum += loss;
      ++steps;
    }
  }
  if (mean_loss_out) *mean_loss_out = steps > 0 ? loss_sum / steps : 0.0;
  return p;
}

double evaluate_accuracy(const ParameterVector& params, const ModelSpec& spec,
                         const LabeledDataset& test) {
  if (test.size() == 0) throw std::invalid_argument("evaluate_accuracy: empty test set");
  ForwardTrace trace = forward(spec, params, test.samples);
  int correct = 0;
  for (int i = 0; i < test.size(); ++i) {
    int best = 0;
    for (int c = 1; c < trace.output.cols(); ++c)
      if (trace.output(i, c) > trace.output(i, best)) best = c;  // ties keep lowest id
    if (best == test.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / test.size();
}

}  // namespace fedsim
