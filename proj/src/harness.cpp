#include "fedsim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fedsim {

namespace {

using Json = nlohmann::ordered_json;

// Seed-lineage tags. Each pipeline stage derives its stream from the master
// seed under its own tag, so stages never share randomness.
constexpr std::uint64_t kSplitTag = 0x01;
constexpr std::uint64_t kPartitionTag = 0x02;
constexpr std::uint64_t kGanInitTag = 0x03;
constexpr std::uint64_t kGanOmegaTag = 0x04;
constexpr std::uint64_t kGanFedTag = 0x05;
constexpr std::uint64_t kAugmentTag = 0x06;
constexpr std::uint64_t kDumpTag = 0x07;
constexpr std::uint64_t kClsInitTag = 0x08;
constexpr std::uint64_t kClsFedTag = 0x09;
constexpr std::uint64_t kCentralTag = 0x0A;

void check_keys(const Json& j, const std::string& path,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) throw std::invalid_argument("config: " + path + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key '" +
                                  (path.empty() ? key : path + "." + key) + "'");
  }
}

template <typename T>
void read_field(const Json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw std::invalid_argument("config: type mismatch at '" +
                                (path.empty() ? std::string(key) : path + "." + key) + "'");
  }
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (rounds < 0) throw std::invalid_argument("config: rounds must be >= 0");
  if (clients < 1) throw std::invalid_argument("config: clients must be >= 1");
  if (client_fraction <= 0.0 || client_fraction > 1.0)
    throw std::invalid_argument("config: client_fraction must be in (0, 1]");
  if (batch < 1) throw std::invalid_argument("config: batch must be >= 1");
  if (local_epochs < 1) throw std::invalid_argument("config: local_epochs must be >= 1");
  if (alpha <= 0.0) throw std::invalid_argument("config: alpha must be > 0");
  if (classifier_hidden < 1) throw std::invalid_argument("config: classifier_hidden must be >= 1");
  if (dataset.dim < 4) throw std::invalid_argument("config: dataset.dim must be >= 4");
  for (int c : dataset.counts)
    if (c < 0) throw std::invalid_argument("config: dataset.counts must be >= 0");
  if (partition.covid_holder_fraction <= 0.0 || partition.covid_holder_fraction > 1.0)
    throw std::invalid_argument("config: partition.covid_holder_fraction must be in (0, 1]");
  if (gan.rounds < 0) throw std::invalid_argument("config: gan.rounds must be >= 0");
  if (gan.latent_dim < 1) throw std::invalid_argument("config: gan.latent_dim must be >= 1");
  if (gan.hidden < 1) throw std::invalid_argument("config: gan.hidden must be >= 1");
  if (gan.n_g < 0) throw std::invalid_argument("config: gan.n_g must be >= 0");
  if (gan.n_d < 1) throw std::invalid_argument("config: gan.n_d must be >= 1");
  if (gan.batch_m < 1) throw std::invalid_argument("config: gan.batch_m must be >= 1");
  if (gan.alpha <= 0.0) throw std::invalid_argument("config: gan.alpha must be > 0");
  if (gan.n_fake_per_shard < 0)
    throw std::invalid_argument("config: gan.n_fake_per_shard must be >= 0");
  privacy.validate();
}

GanConfig ExperimentConfig::gan_config() const {
  GanConfig g;
  g.generator_spec.layers = {
      {gan.latent_dim, gan.hidden, Activation::kTanh, false},
      {gan.hidden, dataset.dim, Activation::kSigmoid, false},
  };
  g.critic_spec.layers = {
      {dataset.dim, gan.hidden, Activation::kTanh, false},
      {gan.hidden, 1, Activation::kIdentity, false},
  };
  g.latent_dim = gan.latent_dim;
  g.n_g = gan.n_g;
  g.n_d = gan.n_d;
  g.batch_m = gan.batch_m;
  g.alpha = gan.alpha;
  g.prior = gan.prior;
  g.privacy = privacy;
  g.privacy.n_d = gan.n_d;
  g.per_example_clip = gan.per_example_clip;
  return g;
}

ClassifierConfig ExperimentConfig::classifier_config() const {
  ClassifierConfig c;
  c.spec = default_classifier_spec(dataset.dim, classifier_hidden);
  c.alpha = alpha;
  c.local_epochs = local_epochs;
  c.batch = batch;
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text.empty() ? "{}" : text);
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("config: malformed document: ") + e.what());
  }

  ExperimentConfig cfg;
  check_keys(j, "",
             {"mode", "augmentation", "seed", "rounds", "clients", "client_fraction", "batch",
              "local_epochs", "alpha", "classifier_hidden", "output_path", "partition",
              "privacy", "gan", "dataset"});

  if (j.contains("mode")) {
    const std::string m = j.at("mode").get<std::string>();
    if (m == "centralized") cfg.mode = TrainMode::kCentralized;
    else if (m == "federated") cfg.mode = TrainMode::kFederated;
    else throw std::invalid_argument("config: mode must be 'centralized' or 'federated'");
  }
  read_field(j, "", "augmentation", cfg.augmentation);
  read_field(j, "", "seed", cfg.seed);
  read_field(j, "", "rounds", cfg.rounds);
  read_field(j, "", "clients", cfg.clients);
  read_field(j, "", "client_fraction", cfg.client_fraction);
  read_field(j, "", "batch", cfg.batch);
  read_field(j, "", "local_epochs", cfg.local_epochs);
  read_field(j, "", "alpha", cfg.alpha);
  read_field(j, "", "classifier_hidden", cfg.classifier_hidden);
  read_field(j, "", "output_path", cfg.output_path);

  if (j.contains("partition")) {
    const Json& p = j.at("partition");
    check_keys(p, "partition", {"mode", "covid_holder_fraction"});
    if (p.contains("mode")) {
      const std::string m = p.at("mode").get<std::string>();
      if (m == "iid") cfg.partition.mode = PartitionMode::kIid;
      else if (m == "noniid") cfg.partition.mode = PartitionMode::kNonIid;
      else throw std::invalid_argument("config: partition.mode must be 'iid' or 'noniid'");
    }
    read_field(p, "partition", "covid_holder_fraction", cfg.partition.covid_holder_fraction);
  }

  if (j.contains("privacy")) {
    const Json& p = j.at("privacy");
    check_keys(p, "privacy",
               {"epsilon", "delta", "sigma_n", "clip_threshold", "grad_sensitivity",
                "sample_rate", "n_d", "weight_clip"});
    read_field(p, "privacy", "epsilon", cfg.privacy.epsilon);
    read_field(p, "privacy", "delta", cfg.privacy.delta);
    read_field(p, "privacy", "sigma_n", cfg.privacy.sigma_n);
    read_field(p, "privacy", "clip_threshold", cfg.privacy.clip_threshold);
    if (p.contains("grad_sensitivity"))
      read_field(p, "privacy", "grad_sensitivity", cfg.privacy.grad_sensitivity);
    else
      cfg.privacy.grad_sensitivity = cfg.privacy.clip_threshold;
    read_field(p, "privacy", "sample_rate", cfg.privacy.sample_rate);
    read_field(p, "privacy", "n_d", cfg.privacy.n_d);
    read_field(p, "privacy", "weight_clip", cfg.privacy.weight_clip);
  }

  if (j.contains("gan")) {
    const Json& g = j.at("gan");
    check_keys(g, "gan",
               {"rounds", "latent_dim", "hidden", "n_g", "n_d", "batch_m", "alpha",
                "n_fake_per_shard", "prior", "per_example_clip"});
    read_field(g, "gan", "rounds", cfg.gan.rounds);
    read_field(g, "gan", "latent_dim", cfg.gan.latent_dim);
    read_field(g, "gan", "hidden", cfg.gan.hidden);
    read_field(g, "gan", "n_g", cfg.gan.n_g);
    read_field(g, "gan", "n_d", cfg.gan.n_d);
    read_field(g, "gan", "batch_m", cfg.gan.batch_m);
    read_field(g, "gan", "alpha", cfg.gan.alpha);
    read_field(g, "gan", "n_fake_per_shard", cfg.gan.n_fake_per_shard);
    if (g.contains("prior")) {
      const std::string pr = g.at("prior").get<std::string>();
      if (pr == "normal") cfg.gan.prior = LatentPrior::kStandardNormal;
      else if (pr == "uniform") cfg.gan.prior = LatentPrior::kUniform;
      else throw std::invalid_argument("config: gan.prior must be 'normal' or 'uniform'");
    }
    read_field(g, "gan", "per_example_clip", cfg.gan.per_example_clip);
  }

  if (j.contains("dataset")) {
    const Json& d = j.at("dataset");
    check_keys(d, "dataset", {"counts", "dim", "seed"});
    if (d.contains("counts")) {
      const auto counts = d.at("counts").get<std::vector<int>>();
      if (counts.size() != kNumClasses)
        throw std::invalid_argument("config: dataset.counts must have 3 entries");
      std::copy(counts.begin(), counts.end(), cfg.dataset.counts.begin());
    }
    read_field(d, "dataset", "dim", cfg.dataset.dim);
    read_field(d, "dataset", "seed", cfg.dataset.seed);
  }

  cfg.validate();
  return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  Json j;
  j["mode"] = cfg.mode == TrainMode::kCentralized ? "centralized" : "federated";
  j["augmentation"] = cfg.augmentation;
  j["seed"] = cfg.seed;
  j["rounds"] = cfg.rounds;
  j["clients"] = cfg.clients;
  j["client_fraction"] = cfg.client_fraction;
  j["batch"] = cfg.batch;
  j["local_epochs"] = cfg.local_epochs;
  j["alpha"] = cfg.alpha;
  j["classifier_hidden"] = cfg.classifier_hidden;
  j["output_path"] = cfg.output_path;
  j["partition"] = {
      {"mode", cfg.partition.mode == PartitionMode::kIid ? "iid" : "noniid"},
      {"covid_holder_fraction", cfg.partition.covid_holder_fraction}};
  j["privacy"] = {{"epsilon", cfg.privacy.epsilon},
                  {"delta", cfg.privacy.delta},
                  {"sigma_n", cfg.privacy.sigma_n},
                  {"clip_threshold", cfg.privacy.clip_threshold},
                  {"grad_sensitivity", cfg.privacy.grad_sensitivity},
                  {"sample_rate", cfg.privacy.sample_rate},
                  {"n_d", cfg.privacy.n_d},
                  {"weight_clip", cfg.privacy.weight_clip}};
  j["gan"] = {{"rounds", cfg.gan.rounds},
              {"latent_dim", cfg.gan.latent_dim},
              {"hidden", cfg.gan.hidden},
              {"n_g", cfg.gan.n_g},
              {"n_d", cfg.gan.n_d},
              {"batch_m", cfg.gan.batch_m},
              {"alpha", cfg.gan.alpha},
              {"n_fake_per_shard", cfg.gan.n_fake_per_shard},
              {"prior", cfg.gan.prior == LatentPrior::kStandardNormal ? "normal" : "uniform"},
              {"per_example_clip", cfg.gan.per_example_clip}};
  j["dataset"] = {{"counts", cfg.dataset.counts}, {"dim", cfg.dataset.dim},
                  {"seed", cfg.dataset.seed}};
  return j.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string s = serialize_config(cfg);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string ExperimentReport::metrics_csv() const {
  std::ostringstream out;
  out << "round,mode,accuracy,loss\n";
  for (const auto& r : rounds)
    out << r.round << ',' << mode << ',' << fmt_double(r.accuracy) << ','
        << fmt_double(r.loss) << '\n';
  return out.str();
}

std::string ExperimentReport::summary() const {
  Json j;
  j["name"] = name;
  j["mode"] = mode;
  j["seed"] = seed;
  char hash_buf[24];
  std::snprintf(hash_buf, sizeof hash_buf, "0x%016llx",
                static_cast<unsigned long long>(cfg_hash));
  j["config_hash"] = hash_buf;
  j["rounds"] = rounds.size();
  j["final_accuracy"] = final_accuracy;
  return j.dump(2);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentReport report;
  report.mode = cfg.mode == TrainMode::kCentralized ? "centralized" : "federated";
  report.name = report.mode + (cfg.augmentation ? "+aug" : "");
  report.seed = cfg.seed;
  report.cfg_hash = config_hash(cfg);

  // Stage: data
  LabeledDataset full;
  LabeledDataset train, test;
  std::vector<ClientShard> shards;
  try {
    full = synth_dataset(cfg.dataset.counts, cfg.dataset.dim, cfg.dataset.seed);
    std::tie(train, test) = split_train_test(full, 0.2, derive_seed(cfg.seed, kSplitTag));
    if (cfg.partition.mode == PartitionMode::kIid) {
      shards = partition_iid(train, cfg.clients, derive_seed(cfg.seed, kPartitionTag));
    } else {
      PartitionPlan plan = cfg.partition;
      plan.num_clients = cfg.clients;
      shards = partition_noniid(train, plan, derive_seed(cfg.seed, kPartitionTag));
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage data: ") + e.what());
  }

  // Stage: federated DP-GAN pretraining + minority-class augmentation
  if (cfg.augmentation) {
    try {
      const GanConfig gan_cfg = cfg.gan_config();

      // Only clients holding minority-class samples can train the generator.
      std::vector<int> holder_ids;
      std::vector<Eigen::MatrixXd> minority;
      for (const auto& shard : shards) {
        std::vector<int> rows;
        for (int i = 0; i < shard.n_k(); ++i)
          if (shard.dataset.labels[i] == 2) rows.push_back(i);
        if (rows.empty()) continue;
        Eigen::MatrixXd m(static_cast<int>(rows.size()), shard.dataset.dim());
        for (std::size_t i = 0; i < rows.size(); ++i)
          m.row(static_cast<int>(i)) = shard.dataset.samples.row(rows[i]);
        holder_ids.push_back(shard.client_id);
        minority.push_back(std::move(m));
      }
      if (holder_ids.empty())
        throw std::runtime_error("no client holds minority-class samples");

      ParameterVector theta =
          init_params(gan_cfg.generator_spec, derive_seed(cfg.seed, kGanInitTag));
      std::vector<ParameterVector> omegas;
      omegas.reserve(holder_ids.size());
      for (std::size_t i = 0; i < holder_ids.size(); ++i)
        omegas.push_back(init_params(
            gan_cfg.critic_spec,
            derive_seed(cfg.seed, kGanOmegaTag ^ (static_cast<std::uint64_t>(holder_ids[i]) << 8))));

      FedConfig fed_cfg;
      fed_cfg.num_clients = static_cast<int>(holder_ids.size());
      fed_cfg.client_fraction = cfg.client_fraction;
      fed_cfg.rounds = cfg.gan.rounds;
      fed_cfg.master_seed = derive_seed(cfg.seed, kGanFedTag);

      ClientFn gan_client = [&](int idx, const ParameterVector& global_theta,
                                Rng& rng) -> std::optional<ClientUpdateMsg> {
        ClientUpdateMsg msg;
        msg.params = client_update(global_theta, omegas[static_cast<std::size_t>(idx)],
                                   minority[static_cast<std::size_t>(idx)], gan_cfg, rng);
        msg.n_k = minority[static_cast<std::size_t>(idx)].rows();
        return msg;
      };
      GlobalModelState gan_state = run_training(std::move(theta), fed_cfg, gan_client);

      if (cfg.gan.n_fake_per_shard > 0) {
        for (auto& shard : shards) {
          Rng rng(derive_seed(cfg.seed,
                              kAugmentTag ^ (static_cast<std::uint64_t>(shard.client_id) << 8)));
          shard = augment_with_fakes(shard, gan_state.theta, gan_cfg,
                                     cfg.gan.n_fake_per_shard, 2, rng);
        }
      }

      Rng dump_rng(derive_seed(cfg.seed, kDumpTag));
      report.generated_samples.samples =
          sample_generator(gan_state.theta, gan_cfg, 32, dump_rng);
      report.generated_samples.labels = Eigen::VectorXi::Constant(32, 2);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("stage augmentation: ") + e.what());
    }
  }

  // Stage: classifier training
  try {
    const ClassifierConfig cls_cfg = cfg.classifier_config();
    ParameterVector params =
        init_params(cls_cfg.spec, derive_seed(cfg.seed, kClsInitTag));

    if (cfg.mode == TrainMode::kFederated) {
      FedConfig fed_cfg;
      fed_cfg.num_clients = cfg.clients;
      fed_cfg.client_fraction = cfg.client_fraction;
      fed_cfg.rounds = cfg.rounds;
      fed_cfg.master_seed = derive_seed(cfg.seed, kClsFedTag);

      ClientFn cls_client = [&](int id, const ParameterVector& theta,
                                Rng& rng) -> std::optional<ClientUpdateMsg> {
        ClientUpdateMsg msg;
        double loss = 0.0;
        msg.params = local_train(theta, shards[static_cast<std::size_t>(id)], cls_cfg, rng, &loss);
        msg.n_k = shards[static_cast<std::size_t>(id)].n_k();
        msg.mean_loss = loss;
        return msg;
      };
      EvalFn eval = [&](const ParameterVector& p) {
        return evaluate_accuracy(p, cls_cfg.spec, test);
      };
      GlobalModelState state = run_training(std::move(params), fed_cfg, cls_client, &eval);

      for (const auto& rec : state.history)
        report.rounds.push_back(
            {rec.round, rec.eval_accuracy.value_or(0.0), rec.mean_client_loss});
      report.final_accuracy = report.rounds.empty()
                                  ? evaluate_accuracy(state.theta, cls_cfg.spec, test)
                                  : report.rounds.back().accuracy;
    } else {
      // Centralized baseline: one epoch of mini-batch SGD per round on the
      // pooled (possibly augmented) training data.
      LabeledDataset pooled = train;
      if (cfg.augmentation) {
        pooled = LabeledDataset{};
        for (const auto& shard : shards) pooled = concat_datasets(pooled, shard.dataset);
      }
      ClientShard pool{0, pooled};
      ClassifierConfig per_round = cls_cfg;
      per_round.local_epochs = 1;
      const std::uint64_t central_master = derive_seed(cfg.seed, kCentralTag);
      for (int t = 0; t < cfg.rounds; ++t) {
        Rng rng(derive_seed(central_master, static_cast<std::uint64_t>(t)));
        double loss = 0.0;
        params = local_train(params, pool, per_round, rng, &loss);
        const double acc = evaluate_accuracy(params, cls_cfg.spec, test);
        report.rounds.push_back({t, acc, loss});
      }
      report.final_accuracy = report.rounds.empty()
                                  ? evaluate_accuracy(params, cls_cfg.spec, test)
                                  : report.rounds.back().accuracy;
    }
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("stage classifier: ") + e.what());
  }

  return report;
}

ExperimentReport report_from_csv(std::istream& in, const std::string& name) {
  ExperimentReport report;
  report.name = name;
  std::string line;
  if (!std::getline(in, line) || line != "round,mode,accuracy,loss")
    throw std::runtime_error("metrics csv: bad header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string round_s, mode_s, acc_s, loss_s;
    if (!std::getline(ss, round_s, ',') || !std::getline(ss, mode_s, ',') ||
        !std::getline(ss, acc_s, ',') || !std::getline(ss, loss_s))
      throw std::runtime_error("metrics csv: malformed row");
    report.mode = mode_s;
    report.rounds.push_back({std::stoi(round_s), std::stod(acc_s), std::stod(loss_s)});
  }
  if (!report.rounds.empty()) report.final_accuracy = report.rounds.back().accuracy;
  return report;
}

ComparisonTable compare_runs(const std::vector<ExperimentReport>& reports) {
  if (reports.size() < 2)
    throw std::invalid_argument("compare_runs: need at least two reports");

  std::set<int> common;
  for (const auto& r : reports.front().rounds) common.insert(r.round);
  for (std::size_t i = 1; i < reports.size(); ++i) {
    std::set<int> seen;
    for (const auto& r : reports[i].rounds) seen.insert(r.round);
    std::set<int> next;
    std::set_intersection(common.begin(), common.end(), seen.begin(), seen.end(),
                          std::inserter(next, next.begin()));
    common = std::move(next);
  }
  if (common.empty())
    throw std::invalid_argument("compare_runs: reports share no rounds");

  ComparisonTable table;
  table.rounds.assign(common.begin(), common.end());
  for (const auto& report : reports) {
    table.names.push_back(report.name);
    std::vector<double> acc;
    for (int round : table.rounds) {
      const auto it = std::find_if(report.rounds.begin(), report.rounds.end(),
                                   [round](const RoundMetrics& m) { return m.round == round; });
      acc.push_back(it->accuracy);
    }
    table.accuracy.push_back(std::move(acc));
    table.final_accuracy.push_back(report.final_accuracy);
    table.final_delta_vs_first.push_back(report.final_accuracy -
                                         reports.front().final_accuracy);
  }
  return table;
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream out;
  out << "round";
  for (const auto& name : names) out << ",accuracy_" << name;
  out << '\n';
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    out << rounds[i];
    for (const auto& acc : accuracy) out << ',' << fmt_double(acc[i]);
    out << '\n';
  }
  return out.str();
}

}  // namespace fedsim
