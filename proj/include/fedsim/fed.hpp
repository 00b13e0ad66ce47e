#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "fedsim/nn.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// One client's contribution to a round.
struct ClientUpdateMsg {
  int client_id = 0;
  ParameterVector params;  // locally updated global-model parameters
  std::int64_t n_k = 0;    // local sample count, the FedAvg weight
  double mean_loss = 0.0;

  std::uint64_t round = 0;  // set by the server when checkpointing
};

struct RoundRecord {
  int round = 0;
  std::vector<int> selected;
  std::vector<int> dropped;  // selected clients whose update failed
  double mean_client_loss = 0.0;
  std::optional<double> eval_accuracy;
  std::uint64_t seed = 0;  // round-level seed, for replay
};

struct GlobalModelState {
  int round = 0;
  ParameterVector theta;
  std::vector<RoundRecord> history;
};

struct FedConfig {
  int num_clients = 100;        // K
  double client_fraction = 0.1; // C
  int rounds = 100;             // T
  std::uint64_t master_seed = 0;
};

// Runs the client's local training; returns nullopt (or throws) to signal
// failure, in which case the client is dropped from this round's aggregation.
using ClientFn =
    std::function<std::optional<ClientUpdateMsg>(int client_id, const ParameterVector& theta,
                                                 Rng& rng)>;
using EvalFn = std::function<double(const ParameterVector&)>;

// Uniform subset without replacement of size max(1, round(c_frac * K)).
std::vector<int> select_clients(int num_clients, double c_frac, Rng& rng);

// Sample-count-weighted parameter mean: sum_k (n_k / N) params_k.
// Consumes updates in ascending client-id order for deterministic summation.
ParameterVector fedavg_aggregate(std::vector<ClientUpdateMsg> updates);

// One synchronous round: select, broadcast, train locally, aggregate,
// record. Throws if every selected client fails.
GlobalModelState run_round(GlobalModelState state, const FedConfig& cfg,
                           const ClientFn& client_fn, const EvalFn* eval_fn = nullptr);

// T rounds of run_round from the given initial parameters.
GlobalModelState run_training(ParameterVector initial, const FedConfig& cfg,
                              const ClientFn& client_fn, const EvalFn* eval_fn = nullptr);

// Wire format: client_id, n_k, round as little-endian u64, then the
// ParameterVector checkpoint format.
void write_client_update(std::ostream& out, const ClientUpdateMsg& msg);
ClientUpdateMsg read_client_update(std::istream& in);

// Seed lineage: each (master, client, round) tuple maps to one stream.
std::uint64_t round_seed(std::uint64_t master_seed, int round);
std::uint64_t client_round_seed(std::uint64_t master_seed, int client_id, int round);

}  // namespace fedsim
