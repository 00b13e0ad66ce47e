#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedsim/nn.hpp"

namespace fedsim {

inline constexpr int kNumClasses = 3;
// Class ids: 0 = normal, 1 = pneumonia, 2 = covid.
inline const std::array<std::string, kNumClasses> kClassNames = {"normal", "pneumonia", "covid"};

struct LabeledDataset {
  Eigen::MatrixXd samples;  // n x d, values in [0, 1]
  Eigen::VectorXi labels;   // n class ids

  int size() const { return static_cast<int>(samples.rows()); }
  int dim() const { return static_cast<int>(samples.cols()); }
  std::array<int, kNumClasses> class_counts() const;
  void validate() const;
};

// One client's local data.
struct ClientShard {
  int client_id = 0;
  LabeledDataset dataset;
  int n_k() const { return dataset.size(); }
};

enum class PartitionMode { kIid, kNonIid };

struct PartitionPlan {
  PartitionMode mode = PartitionMode::kIid;
  int num_clients = 100;
  // Fraction of clients that hold class-2 (covid) samples in non-IID mode.
  double covid_holder_fraction = 0.1;
};

// Synthetic three-class corpus: each class is a fixed smooth spatial template
// over a sqrt(d) x sqrt(d) grid plus per-sample noise, clamped to [0, 1].
// Deterministic per seed.
LabeledDataset synth_dataset(const std::array<int, kNumClasses>& n_per_class, int d,
                             std::uint64_t seed);

// Global shuffle, then near-equal contiguous splits.
std::vector<ClientShard> partition_iid(const LabeledDataset& ds, int num_clients,
                                       std::uint64_t seed);

// Classes 0 and 1 spread over all clients; all class-2 samples concentrated in
// ceil(covid_holder_fraction * K) randomly chosen clients.
std::vector<ClientShard> partition_noniid(const LabeledDataset& ds, const PartitionPlan& plan,
                                          std::uint64_t seed);

// Stratified train/test split; test_fraction of each class goes to the test set.
std::pair<LabeledDataset, LabeledDataset> split_train_test(const LabeledDataset& ds,
                                                           double test_fraction,
                                                           std::uint64_t seed);

LabeledDataset concat_datasets(const LabeledDataset& a, const LabeledDataset& b);

// Appends n_fake synthetic samples (m x d matrix) to the shard under `label`.
ClientShard augment_with_fakes(const ClientShard& shard, const Eigen::MatrixXd& fakes,
                               int label);

// CSV exchange format: header "d,<class names>", then rows of d feature values
// plus an integer label.
void write_dataset_csv(std::ostream& out, const LabeledDataset& ds);
LabeledDataset read_dataset_csv(std::istream& in);

}  // namespace fedsim
