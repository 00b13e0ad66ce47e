#include "fedsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

// Fixed low-frequency spatial template per class, evaluated on a unit grid.
// Class 2 is deliberately a perturbed variant of class 1, so telling them
// apart requires actually seeing minority-class samples during training.
double class_template(int label, double x, double y) {
  constexpr double pi = 3.14159265358979323846;
  const double bump =
      std::exp(-((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)) / 0.08);
  switch (label) {
    case 0:  // smooth horizontal gradient
      return 0.2 + 0.2 * std::sin(2.0 * pi * x) + 0.3 * x;
    case 1:  // centered radial bump
      return bump;
    case 2:  // the bump overlaid with faint diagonal stripes
      return 0.8 * bump + 0.2 * (0.5 + 0.45 * std::cos(3.0 * pi * (x + y)));
    default:
      throw std::invalid_argument("class_template: bad label");
  }
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
}

LabeledDataset take_rows(const LabeledDataset& ds, const std::vector<int>& rows) {
  LabeledDataset out;
  out.samples.resize(static_cast<int>(rows.size()), ds.dim());
  out.labels.resize(static_cast<int>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.samples.row(static_cast<int>(i)) = ds.samples.row(rows[i]);
    out.labels[static_cast<int>(i)] = ds.labels[rows[i]];
  }
  return out;
}

}  // namespace

std::array<int, kNumClasses> LabeledDataset::class_counts() const {
  std::array<int, kNumClasses> counts{};
  for (int i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l < 0 || l >= kNumClasses) throw std::invalid_argument("label out of range");
    ++counts[static_cast<std::size_t>(l)];
  }
  return counts;
}

void LabeledDataset::validate() const {
  if (samples.rows() != labels.size())
    throw std::invalid_argument("LabeledDataset: sample/label count mismatch");
  (void)class_counts();
}

LabeledDataset synth_dataset(const std::array<int, kNumClasses>& n_per_class, int d,
                             std::uint64_t seed) {
  if (d < 4) throw std::invalid_argument("synth_dataset: d must be >= 4");
  for (int c : n_per_class)
    if (c < 0) throw std::invalid_argument("synth_dataset: negative class count");
  const int n = n_per_class[0] + n_per_class[1] + n_per_class[2];
  if (n == 0) throw std::invalid_argument("synth_dataset: zero total samples");

  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
  LabeledDataset ds;
  ds.samples.resize(n, d);
  ds.labels.resize(n);

  Rng rng(seed);
  int row = 0;
  for (int label = 0; label < kNumClasses; ++label) {
    for (int s = 0; s < n_per_class[static_cast<std::size_t>(label)]; ++s) {
      for (int j = 0; j < d; ++j) {
        const double x = side > 1 ? static_cast<double>(j % side) / (side - 1) : 0.0;
        const double y = side > 1 ? static_cast<double>(j / side) / (side - 1) : 0.0;
        const double v = class_template(label, x, y) + rng.normal(0.0, 0.15);
        ds.samples(row, j) = std::clamp(v, 0.0, 1.0);
      }
      ds.labels[row] = label;
      ++row;
    }
  }
  return ds;
}

std::vector<ClientShard> partition_iid(const LabeledDataset& ds, int num_clients,
                                       std::uint64_t seed) {
  const int n = ds.size();
  if (num_clients < 1 || num_clients > n)
    throw std::invalid_argument("partition_iid: need 1 <= K <= n");

  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  shuffle_indices(idx, rng);

  const int base = n / num_clients;
  const int remainder = n % num_clients;
  std::vector<ClientShard> shards;
  shards.reserve(static_cast<std::size_t>(num_clients));
  int pos = 0;
  for (int k = 0; k < num_clients; ++k) {
    const int take = base + (k < remainder ? 1 : 0);
    std::vector<int> rows(idx.begin() + pos, idx.begin() + pos + take);
    pos += take;
    shards.push_back({k, take_rows(ds, rows)});
  }
  return shards;
}

std::vector<ClientShard> partition_noniid(const LabeledDataset& ds, const PartitionPlan& plan,
                                          std::uint64_t seed) {
  if (plan.mode != PartitionMode::kNonIid)
    throw std::invalid_argument("partition_noniid: plan mode must be noniid");
  const int K = plan.num_clients;
  if (K < 1) throw std::invalid_argument("partition_noniid: K must be >= 1");
  if (plan.covid_holder_fraction <= 0.0 || plan.covid_holder_fraction > 1.0)
    throw std::invalid_argument("partition_noniid: covid_holder_fraction must be in (0, 1]");

  std::vector<int> majority;  // classes 0 and 1
  std::vector<int> minority;  // class 2
  for (int i = 0; i < ds.size(); ++i)
    (ds.labels[i] == 2 ? minority : majority).push_back(i);

  Rng rng(seed);
  shuffle_indices(majority, rng);
  shuffle_indices(minority, rng);

  const int n_holders =
      std::min(K, static_cast<int>(std::ceil(plan.covid_holder_fraction * K)));
  std::vector<int> clients(static_cast<std::size_t>(K));
  std::iota(clients.begin(), clients.end(), 0);
  shuffle_indices(clients, rng);
  std::vector<int> holders(clients.begin(), clients.begin() + n_holders);

  std::vector<std::vector<int>> rows_per_client(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < majority.size(); ++i)
    rows_per_client[i % static_cast<std::size_t>(K)].push_back(majority[i]);
  for (std::size_t i = 0; i < minority.size(); ++i)
    rows_per_client[static_cast<std::size_t>(holders[i % holders.size()])].push_back(
        minority[i]);

  std::vector<ClientShard> shards;
  shards.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    if (rows_per_client[static_cast<std::size_t>(k)].empty())
      throw std::invalid_argument("partition_noniid: client " + std::to_string(k) +
                                  " received no samples; reduce K");
    shards.push_back({k, take_rows(ds, rows_per_client[static_cast<std::size_t>(k)])});
  }
  return shards;
}

std::pair<LabeledDataset, LabeledDataset> split_train_test(const LabeledDataset& ds,
                                                           double test_fraction,
                                                           std::uint64_t seed) {
  if (test_fraction < 0.0 || test_fraction >= 1.0)
    throw std::invalid_argument("split_train_test: test_fraction must be in [0, 1)");
  Rng rng(seed);
  std::vector<int> train_rows, test_rows;
  for (int label = 0; label < kNumClasses; ++label) {
    std::vector<int> idx;
    for (int i = 0; i < ds.size(); ++i)
      if (ds.labels[i] == label) idx.push_back(i);
    shuffle_indices(idx, rng);
    const auto n_test = static_cast<std::size_t>(
        std::floor(test_fraction * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_test ? test_rows : train_rows).push_back(idx[i]);
  }
  return {take_rows(ds, train_rows), take_rows(ds, test_rows)};
}

LabeledDataset concat_datasets(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  if (a.dim() != b.dim()) throw std::invalid_argument("concat_datasets: dimension mismatch");
  LabeledDataset out;
  out.samples.resize(a.size() + b.size(), a.dim());
  out.samples << a.samples, b.samples;
  out.labels.resize(a.size() + b.size());
  out.labels << a.labels, b.labels;
  return out;
}

ClientShard augment_with_fakes(const ClientShard& shard, const Eigen::MatrixXd& fakes,
                               int label) {
  if (label < 0 || label >= kNumClasses)
    throw std::invalid_argument("augment_with_fakes: invalid label");
  if (fakes.rows() == 0) return shard;
  if (fakes.cols() != shard.dataset.dim())
    throw std::invalid_argument("augment_with_fakes: sample dimension mismatch");
  LabeledDataset extra;
  extra.samples = fakes;
  extra.labels = Eigen::VectorXi::Constant(fakes.rows(), label);
  return {shard.client_id, concat_datasets(shard.dataset, extra)};
}

void write_dataset_csv(std::ostream& out, const LabeledDataset& ds) {
  out << ds.dim();
  for (const auto& name : kClassNames) out << ',' << name;
  out << '\n';
  char buf[32];
  for (int i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.12g", ds.samples(i, j));
      out << buf << ',';
    }
    out << ds.labels[i] << '\n';
  }
}

LabeledDataset read_dataset_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("dataset csv: missing header");
  const int d = std::stoi(header.substr(0, header.find(',')));
  if (d < 1) throw std::runtime_error("dataset csv: bad dimension in header");

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != d + 1)
      throw std::runtime_error("dataset csv: row width mismatch");
    labels.push_back(static_cast<int>(row.back()));
    row.pop_back();
    rows.push_back(std::move(row));
  }
  LabeledDataset ds;
  ds.samples.resize(static_cast<int>(rows.size()), d);
  ds.labels.resize(static_cast<int>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < d; ++j) ds.samples(static_cast<int>(i), j) = rows[i][static_cast<std::size_t>(j)];
    ds.labels[static_cast<int>(i)] = labels[i];
  }
  ds.validate();
  return ds;
}

}  // namespace fedsim
