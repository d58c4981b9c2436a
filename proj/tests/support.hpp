#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <queue>
#include <vector>

#include "wavesim/wavesim.hpp"

namespace wstest {

using namespace wavesim;

/// Static stations on one medium, each running a bare DCF MAC.
struct MacBench {
  explicit MacBench(std::vector<double> pos, PhyParams phy = {}, MacParams mac = {}, std::uint64_t seed = 1)
      : positions(std::move(pos)),
        medium(sched, phy, [this](NodeId n, SimTime) { return positions.at(n); }),
        rng(seed) {
    for (NodeId id = 0; id < positions.size(); ++id) {
      macs.push_back(std::make_unique<DcfMac>(id, sched, medium, mac, rng.stream("backoff", id)));
      medium.attach(id, ChannelId(), macs.back().get());
      delivered.emplace_back();
      MacHooks h;
      h.deliver = [this, id](const Frame& f) { delivered[id].push_back(f); };
      h.attempt = [this, id](const TxAttempt& a) { attempts.push_back({id, a}); };
      h.complete = [this](const TxCompletion& c) { completions.push_back(c); };
      macs.back()->set_hooks(std::move(h));
    }
  }

  Frame unicast(NodeId to, std::size_t octets) const {
    Frame f;
    f.dst = MacAddress::for_node(to);
    f.payload_len = octets;
    return f;
  }
  Frame broadcast(std::size_t octets) const {
    Frame f;
    f.payload_len = octets;
    return f;
  }

  std::vector<double> positions;
  Scheduler sched;
  Medium medium;
  RngFactory rng;
  std::vector<std::unique_ptr<DcfMac>> macs;
  std::vector<std::vector<Frame>> delivered;
  std::vector<std::pair<NodeId, TxAttempt>> attempts;
  std::vector<TxCompletion> completions;
};

/// Hop distances from `src` on the unit-disc graph; nullopt when unreachable.
inline std::vector<std::optional<int>> bfs_hops(const std::vector<double>& pos, double range, std::size_t src) {
  std::vector<std::optional<int>> dist(pos.size());
  dist[src] = 0;
  std::queue<std::size_t> q;
  q.push(src);
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    for (std::size_t v = 0; v < pos.size(); ++v) {
      if (dist[v] || std::fabs(pos[u] - pos[v]) > range) continue;
      dist[v] = *dist[u] + 1;
      q.push(v);
    }
  }
  return dist;
}

/// A network of fixed nodes with no traffic scheduled.
inline std::unique_ptr<Network> static_network(const std::vector<double>& pos, NetworkOptions opts = {}) {
  auto net = std::make_unique<Network>(std::move(opts));
  for (double x : pos) net->add_node(MobilityProfile::fixed(x));
  return net;
}

}  // namespace wstest
