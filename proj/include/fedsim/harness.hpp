#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedsim/classifier.hpp"
#include "fedsim/data.hpp"
#include "fedsim/dp.hpp"
#include "fedsim/fed.hpp"
#include "fedsim/gan.hpp"

namespace fedsim {

enum class TrainMode { kCentralized, kFederated };

struct DatasetConfig {
  std::array<int, kNumClasses> counts = {400, 250, 70};
  int dim = 64;  // flattened 8x8; 784 mirrors 28x28
  std::uint64_t seed = 42;
};

struct GanSection {
  int rounds = 30;  // federated GAN pretraining rounds before augmentation
  int latent_dim = 8;
  int hidden = 32;
  int n_g = 1;
  int n_d = 5;
  int batch_m = 10;
  double alpha = 0.05;
  int n_fake_per_shard = 8;
  LatentPrior prior = LatentPrior::kStandardNormal;
  bool per_example_clip = false;
};

struct ExperimentConfig {
  TrainMode mode = TrainMode::kFederated;
  bool augmentation = false;
  std::uint64_t seed = 1;  // master seed; all streams derive from it
  int rounds = 100;        // T
  int clients = 100;       // K
  double client_fraction = 0.1;
  int batch = 10;       // B
  int local_epochs = 5; // E
  double alpha = 0.01;
  int classifier_hidden = 64;
  std::string output_path = "out";
  PartitionPlan partition;
  PrivacyParams privacy;
  GanSection gan;
  DatasetConfig dataset;

  void validate() const;
  GanConfig gan_config() const;
  ClassifierConfig classifier_config() const;
};

// Parses a JSON config document. Missing keys take the defaults above;
// unknown keys are rejected with their full key path.
ExperimentConfig parse_config(const std::string& text);

// Canonical serialization; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

// FNV-1a over the canonical serialization.
std::uint64_t config_hash(const ExperimentConfig& cfg);

struct RoundMetrics {
  int round = 0;
  double accuracy = 0.0;
  double loss = 0.0;
};

struct ExperimentReport {
  std::string name;
  std::string mode;
  std::uint64_t seed = 0;
  std::uint64_t cfg_hash = 0;
  std::vector<RoundMetrics> rounds;
  double final_accuracy = 0.0;
  LabeledDataset generated_samples;  // empty unless augmentation ran

  // "round,mode,accuracy,loss" rows; byte-stable for a fixed config + seed.
  std::string metrics_csv() const;
  std::string summary() const;  // key-value JSON document
};

// Full pipeline: optional federated DP-GAN pretraining + minority-class
// augmentation, then centralized or federated classifier training.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

// Rebuilds the per-round metrics of a report from its metrics CSV.
ExperimentReport report_from_csv(std::istream& in, const std::string& name);

struct ComparisonTable {
  std::vector<std::string> names;
  std::vector<int> rounds;                    // common rounds across reports
  std::vector<std::vector<double>> accuracy;  // accuracy[report][row]
  std::vector<double> final_accuracy;
  std::vector<double> final_delta_vs_first;

  std::string to_csv() const;
};

// Aligns >= 2 reports on their common rounds. Throws if fewer than two
// reports are given or they share no rounds.
ComparisonTable compare_runs(const std::vector<ExperimentReport>& reports);

}  // namespace fedsim
