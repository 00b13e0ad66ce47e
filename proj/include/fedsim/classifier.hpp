#pragma once

#include "fedsim/data.hpp"
#include "fedsim/nn.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

struct ClassifierConfig {
  ModelSpec spec;          // must end in a `classes`-wide identity layer
  double alpha = 0.01;     // learning rate
  int local_epochs = 5;    // E
  int batch = 10;          // B
  int classes = kNumClasses;

  void validate() const;
};

// Residual-MLP default: input -> 4 hidden layers of `hidden` units (skips on
// layers 2 and 3) -> classes logits.
ModelSpec default_classifier_spec(int input_dim, int hidden = 64,
                                  int classes = kNumClasses);

struct SoftmaxResult {
  double loss = 0.0;          // mean cross-entropy over the batch
  Eigen::MatrixXd grad;       // dLoss/dLogits, m x classes
};

SoftmaxResult softmax_cross_entropy(const Eigen::MatrixXd& logits,
                                    const Eigen::VectorXi& labels);

// Mean cross-entropy gradient w.r.t. the parameters on one batch.
ParameterVector classifier_gradient(const ModelSpec& spec, const ParameterVector& params,
                                    const Eigen::MatrixXd& inputs,
                                    const Eigen::VectorXi& labels, double* loss_out = nullptr);

// E epochs of mini-batch SGD over the shard, shuffled per epoch from rng.
ParameterVector local_train(const ParameterVector& params, const ClientShard& shard,
                            const ClassifierConfig& cfg, Rng& rng,
                            double* mean_loss_out = nullptr);

// Fraction of samples whose argmax logit matches the label; ties break toward
// the lowest class id.
double evaluate_accuracy(const ParameterVector& params, const ModelSpec& spec,
                         const LabeledDataset& test);

}  // namespace fedsim
