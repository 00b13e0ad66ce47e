#include "fedsim/fed.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fedsim {

namespace {

constexpr std::uint64_t kSelectTag = 0x53454C4543540000ULL;
constexpr std::uint64_t kClientTag = 0x434C49454E540000ULL;

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw std::runtime_error("truncated client update stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

std::uint64_t round_seed(std::uint64_t master_seed, int round) {
  return derive_seed(derive_seed(master_seed, kSelectTag), static_cast<std::uint64_t>(round));
}

std::uint64_t client_round_seed(std::uint64_t master_seed, int client_id, int round) {
  return derive_seed(derive_seed(master_seed, kClientTag ^ static_cast<std::uint64_t>(client_id)),
                     static_cast<std::uint64_t>(round));
}

std::vector<int> select_clients(int num_clients, double c_frac, Rng& rng) {
  if (num_clients < 1) throw std::invalid_argument("select_clients: K must be >= 1");
  if (c_frac <= 0.0 || c_frac > 1.0)
    throw std::invalid_argument("select_clients: c_frac must be in (0, 1]");
  const int take = std::max(1, static_cast<int>(std::llround(c_frac * num_clients)));

  std::vector<int> ids(static_cast<std::size_t>(num_clients));
  std::iota(ids.begin(), ids.end(), 0);
  // partial Fisher-Yates: the first `take` slots end up uniform without replacement
  for (int i = 0; i < take; ++i) {
    const auto j = i + static_cast<int>(rng.uniform_index(
                           static_cast<std::uint64_t>(num_clients - i)));
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
  }
  ids.resize(static_cast<std::size_t>(take));
  return ids;
}

ParameterVector fedavg_aggregate(std::vector<ClientUpdateMsg> updates) {
  if (updates.empty()) throw std::runtime_error("fedavg_aggregate: no client updates");
  std::sort(updates.begin(), updates.end(),
            [](const ClientUpdateMsg& a, const ClientUpdateMsg& b) {
              return a.client_id < b.client_id;
            });
  std::int64_t total = 0;
  for (const auto& u : updates) {
    if (u.n_k <= 0) throw std::invalid_argument("fedavg_aggregate: n_k must be positive");
    if (!u.params.same_layout(updates.front().params))
      throw std::invalid_argument("fedavg_aggregate: parameter layout mismatch");
    total += u.n_k;
  }
  ParameterVector out = updates.front().params;
  out.values.setZero();
  for (const auto& u : updates)
    out.values += (static_cast<double>(u.n_k) / static_cast<double>(total)) * u.params.values;
  return out;
}

GlobalModelState run_round(GlobalModelState state, const FedConfig& cfg,
                           const ClientFn& client_fn, const EvalFn* eval_fn) {
  const std::uint64_t rseed = round_seed(cfg.master_seed, state.round);
  Rng select_rng(rseed);
  std::vector<int> selected = select_clients(cfg.num_clients, cfg.client_fraction, select_rng);
  std::sort(selected.begin(), selected.end());

  RoundRecord rec;
  rec.round = state.round;
  rec.selected = selected;
  rec.seed = rseed;

  std::vector<ClientUpdateMsg> updates;
  for (int id : selected) {
    Rng client_rng(client_round_seed(cfg.master_seed, id, state.round));
    std::optional<ClientUpdateMsg> msg;
    try {
      msg = client_fn(id, state.theta, client_rng);
    } catch (const std::exception&) {
      msg = std::nullopt;
    }
    if (msg) {
      msg->client_id = id;
      msg->round = static_cast<std::uint64_t>(state.round);
      updates.push_back(std::move(*msg));
    } else {
      rec.dropped.push_back(id);
    }
  }
  if (updates.empty())
    throw std::runtime_error("run_round: all selected clients failed in round " +
                             std::to_string(state.round));

  state.theta = fedavg_aggregate(updates);

  double loss_sum = 0.0;
  for (const auto& u : updates) loss_sum += u.mean_loss;
  rec.mean_client_loss = loss_sum / static_cast<double>(updates.size());
  if (eval_fn) rec.eval_accuracy = (*eval_fn)(state.theta);

  state.history.push_back(std::move(rec));
  state.round += 1;
  return state;
}

GlobalModelState run_training(ParameterVector initial, const FedConfig& cfg,
                              const ClientFn& client_fn, const EvalFn* eval_fn) {
  if (cfg.rounds < 0) throw std::invalid_argument("run_training: rounds must be >= 0");
  GlobalModelState state;
  state.theta = std::move(initial);
  for (int t = 0; t < cfg.rounds; ++t)
    state = run_round(std::move(state), cfg, client_fn, eval_fn);
  return state;
}

void write_client_update(std::ostream& out, const ClientUpdateMsg& msg) {
  write_u64(out, static_cast<std::uint64_t>(msg.client_id));
  write_u64(out, static_cast<std::uint64_t>(msg.n_k));
  write_u64(out, msg.round);
  write_parameter_vector(out, msg.params);
}

ClientUpdateMsg read_client_update(std::istream& in) {
  ClientUpdateMsg msg;
  msg.client_id = static_cast<int>(read_u64(in));
  msg.n_k = static_cast<std::int64_t>(read_u64(in));
  msg.round = read_u64(in);
  msg.params = read_parameter_vector(in);
  return msg;
}

}  // namespace fedsim
