#pragma once

// AODV on-demand routing: sequence-numbered route table, RREQ flood with
// duplicate suppression, RREP along the reverse path, RERR on link break,
// periodic hello beacons.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wavesim/engine.hpp"
#include "wavesim/packet.hpp"

namespace wavesim {

struct AodvParams {
  bool hello_enabled = true;
  SimTime hello_interval = from_seconds(1.0);
  int allowed_hello_loss = 2;
  SimTime active_route_lifetime = from_seconds(3.0);
  int rreq_retries = 2;
  SimTime discovery_timeout = from_seconds(1.0);
  /// Hold time before a node rebroadcasts a received RREQ, plus uniform jitter.
  SimTime rreq_forward_delay = from_millis(40);
  SimTime broadcast_jitter = from_millis(10);
  int net_diameter = 35;
  std::size_t rreq_octets = 24;
  std::size_t rrep_octets = 20;
  std::size_t rerr_octets = 20;
  std::size_t hello_octets = 20;
  /// Times a source packet may be re-routed after a link failure.
  int reroute_limit = 1;

  void validate() const {
    if (hello_interval.count() <= 0) throw std::invalid_argument("aodv.hello_interval_s must be > 0");
    if (allowed_hello_loss < 1) throw std::invalid_argument("aodv.allowed_hello_loss must be >= 1");
    if (active_route_lifetime.count() <= 0)
      throw std::invalid_argument("aodv.active_route_lifetime_s must be > 0");
    if (rreq_retries < 0) throw std::invalid_argument("aodv.rreq_retries must be >= 0");
    if (discovery_timeout.count() <= 0)
      throw std::invalid_argument("aodv.discovery_timeout_s must be > 0");
    if (rreq_forward_delay.count() < 0 || broadcast_jitter.count() < 0)
      throw std::invalid_argument("aodv.rreq_forward_delay_ms and aodv.broadcast_jitter_ms must be >= 0");
    if (hello_enabled && broadcast_jitter >= hello_interval)
      throw std::invalid_argument("aodv.broadcast_jitter_ms must be shorter than the hello interval");
    if (net_diameter < 1) throw std::invalid_argument("aodv.net_diameter must be >= 1");
  }
};

enum class RouteState : std::uint8_t { valid, invalid };

struct RouteEntry {
  NodeId dest = kNoNode;
  NodeId next_hop = kNoNode;
  std::uint32_t hop_count = 0;
  std::uint32_t dest_seq = 0;
  bool seq_known = false;
  SimTime expiry{0};
  RouteState state = RouteState::invalid;

  bool usable(SimTime now) const { return state == RouteState::valid && expiry > now; }
};

class RouteTable {
 public:
  const RouteEntry* find(NodeId dest) const {
    auto it = routes_.find(dest);
    return it == routes_.end() ? nullptr : &it->second;
  }
  RouteEntry* find(NodeId dest) {
    auto it = routes_.find(dest);
    return it == routes_.end() ? nullptr : &it->second;
  }
  const RouteEntry* valid(NodeId dest, SimTime now) const {
    const RouteEntry* e = find(dest);
    return e && e->usable(now) ? e : nullptr;
  }
  RouteEntry& upsert(NodeId dest) {
    auto& e = routes_[dest];
    e.dest = dest;
    return e;
  }
  const std::map<NodeId, RouteEntry>& entries() const { return routes_; }
  std::map<NodeId, RouteEntry>& entries() { return routes_; }

 private:
  std::map<NodeId, RouteEntry> routes_;
};

/// Sequence-number comparison with 32-bit wraparound.
inline bool seq_newer(std::uint32_t a, std::uint32_t b) {
  return static_cast<std::int32_t>(a - b) > 0;
}

enum class SendStatus : std::uint8_t { sent, no_route, link_failure };

inline const char* to_string(SendStatus s) {
  switch (s) {
    case SendStatus::sent: return "sent";
    case SendStatus::no_route: return "no_route";
    case SendStatus::link_failure: return "link_failure";
  }
  return "?";
}

enum class RreqAction : std::uint8_t { rebroadcast, reply_rrep, drop_duplicate, drop_ttl };
enum class RrepAction : std::uint8_t { forward, consume, drop_no_reverse, hello };

/// What AODV needs from the link layer below it.
class LinkLayer {
 public:
  virtual ~LinkLayer() = default;
  /// `done(true)` when the next hop acknowledged the frame.
  virtual void unicast(NodeId next_hop, PacketPtr packet, std::function<void(bool)> done) = 0;
  virtual void broadcast(PacketPtr packet) = 0;
};

enum class ControlKind : std::uint8_t { rreq, rrep, rerr, hello };

struct AodvHooks {
  std::function<void(const PacketPtr&, NodeId from)> deliver_local;
  std::function<void(ControlKind)> control_sent;
  std::function<void(ControlKind)> control_received;
  std::function<void(NodeId dest, SimTime duration)> discovery_complete;
  std::function<void(NodeId dest)> discovery_failed;
  std::function<void(const PacketPtr&, const char* reason)> dropped;
};

class AodvRouter {
 public:
  using SendDone = std::function<void(SendStatus)>;

  struct ResolveResult {
    std::optional<NodeId> next_hop;
    bool discovery_started = false;
  };

  AodvRouter(NodeId self, Scheduler& scheduler, LinkLayer& link, AodvParams params, RngStream jitter)
      : self_(self), scheduler_(scheduler), link_(link), params_(params), jitter_(std::move(jitter)) {
    params_.validate();
  }

  AodvRouter(const AodvRouter&) = delete;
  AodvRouter& operator=(const AodvRouter&) = delete;

  NodeId id() const { return self_; }
  const RouteTable& table() const { return table_; }
  const AodvParams& params() const { return params_; }
  std::uint32_t own_seq() const { return own_seq_; }
  void set_hooks(AodvHooks hooks) { hooks_ = std::move(hooks); }
  std::uint64_t rreq_rebroadcasts() const { return rreq_rebroadcasts_; }
  bool discovery_pending(NodeId dest) const { return discoveries_.count(dest) > 0; }

  /// Schedules the first hello; later ones follow every hello_interval.
  void start() {
    if (!params_.hello_enabled) return;
    const SimTime span = params_.hello_interval - params_.broadcast_jitter;
    const auto offset = SimTime{rng_uniform(jitter_, 0, std::max<std::int64_t>(0, span.count() - 1))};
    hello_nominal_ = scheduler_.now() + offset;
    schedule_hello();
  }

  std::uint64_t hellos_sent() const { return hellos_sent_; }

  /// Hands an originated packet to routing. `done` reports the first-hop outcome.
  void send(PacketPtr packet, SendDone done = {}) {
    send_internal(std::move(packet), std::move(done), params_.reroute_limit);
  }

  ResolveResult resolve_route(NodeId dest) {
    if (dest == self_) throw std::invalid_argument("resolve_route: destination is this node");
    if (const RouteEntry* e = table_.valid(dest, scheduler_.now())) return {e->next_hop, false};
    if (discoveries_.count(dest)) return {std::nullopt, false};
    Discovery& d = discoveries_[dest];
    d.first_emit = scheduler_.now();
    emit_rreq(dest, d);
    return {std::nullopt, true};
  }

  void on_receive(const PacketPtr& packet, NodeId from) {
    last_heard_[from] = scheduler_.now();
    refresh_neighbor(from);
    if (const auto* rreq = std::get_if<RreqMessage>(&packet->body)) {
      count_received(ControlKind::rreq);
      process_rreq(*rreq, from);
    } else if (const auto* rrep = std::get_if<RrepMessage>(&packet->body)) {
      count_received(rrep->hello ? ControlKind::hello : ControlKind::rrep);
      process_rrep(*rrep, from);
    } else if (const auto* rerr = std::get_if<RerrMessage>(&packet->body)) {
      count_received(ControlKind::rerr);
      process_rerr(*rerr, from);
    } else {
      on_data(packet, from);
    }
  }

  RreqAction process_rreq(const RreqMessage& rreq, NodeId from) {
    const SimTime now = scheduler_.now();
    touch_neighbor_route(from);
    if (!seen_.insert({rreq.originator, rreq.rreq_id}).second) return RreqAction::drop_duplicate;

    const std::uint32_t hops = rreq.hop_count + 1;
    update_route(rreq.originator, from, hops, rreq.originator_seq, true, now + params_.active_route_lifetime);

    if (rreq.dest == self_) {
      if (rreq.dest_seq_known && rreq.dest_seq == own_seq_ + 1) ++own_seq_;
      RrepMessage rrep{self_, own_seq_, 0, rreq.originator, params_.active_route_lifetime, false};
      send_control_unicast(from, make_control(rreq.originator, params_.rrep_octets, rrep),
                           ControlKind::rrep);
      return RreqAction::reply_rrep;
    }
    if (const RouteEntry* e = table_.valid(rreq.dest, now);
        e && e->seq_known && (!rreq.dest_seq_known || !seq_newer(rreq.dest_seq, e->dest_seq))) {
      RrepMessage rrep{rreq.dest, e->dest_seq, e->hop_count, rreq.originator,
                       e->expiry - now, false};
      send_control_unicast(from, make_control(rreq.originator, params_.rrep_octets, rrep),
                           ControlKind::rrep);
      return RreqAction::reply_rrep;
    }
    if (rreq.ttl <= 1) return RreqAction::drop_ttl;

    RreqMessage fwd = rreq;
    fwd.hop_count = hops;
    fwd.ttl = rreq.ttl - 1;
    if (const RouteEntry* e = table_.find(rreq.dest); e && e->seq_known &&
        (!fwd.dest_seq_known || seq_newer(e->dest_seq, fwd.dest_seq))) {
      fwd.dest_seq = e->dest_seq;
      fwd.dest_seq_known = true;
    }
    ++rreq_rebroadcasts_;
    auto pkt = make_control(kNoNode, params_.rreq_octets, fwd);
    scheduler_.schedule_in(params_.rreq_forward_delay + jitter(), self_, "aodv.rreq_forward",
                           [this, pkt] { broadcast_control(pkt, ControlKind::rreq); });
    return RreqAction::rebroadcast;
  }

  RrepAction process_rrep(const RrepMessage& rrep, NodeId from) {
    const SimTime now = scheduler_.now();
    if (rrep.hello) {
      update_route(from, from, 1, rrep.dest_seq, true,
                   now + params_.allowed_hello_loss * params_.hello_interval);
      arm_neighbor_timeout(from);
      return RrepAction::hello;
    }
    touch_neighbor_route(from);
    const std::uint32_t hops = rrep.hop_count + 1;
    if (rrep.dest != self_)
      update_route(rrep.dest, from, hops, rrep.dest_seq, true, now + params_.active_route_lifetime);

    if (rrep.originator == self_) {
      auto it = discoveries_.find(rrep.dest);
      if (it != discoveries_.end() && table_.valid(rrep.dest, now)) {
        const SimTime took = now - it->second.first_emit;
        scheduler_.cancel(it->second.timer);
        auto buffered = std::move(it->second.buffered);
        discoveries_.erase(it);
        if (hooks_.discovery_complete) hooks_.discovery_complete(rrep.dest, took);
        for (auto& b : buffered) send_internal(std::move(b.packet), std::move(b.done), b.reroutes_left);
      }
      return RrepAction::consume;
    }
    const RouteEntry* back = table_.valid(rrep.originator, now);
    if (!back) {
      ++rrep_dropped_;
      return RrepAction::drop_no_reverse;
    }
    RrepMessage fwd = rrep;
    fwd.hop_count = hops;
    extend(rrep.originator, now);
    send_control_unicast(back->next_hop, make_control(rrep.originator, params_.rrep_octets, fwd),
                         ControlKind::rrep);
    return RrepAction::forward;
  }

  /// Invalidates every route through `next_hop`; returns the RERR list sent
  /// (empty means no RERR was emitted).
  std::vector<RerrMessage::Unreachable> on_link_break(NodeId next_hop) {
    std::vector<RerrMessage::Unreachable> lost;
    const SimTime now = scheduler_.now();
    for (auto& [dest, e] : table_.entries()) {
      if (e.next_hop == next_hop && e.state == RouteState::valid) {
        e.state = RouteState::invalid;
        if (e.seq_known) ++e.dest_seq;
        e.expiry = now;
        lost.push_back({dest, e.dest_seq});
      }
    }
    disarm_neighbor(next_hop);
    if (!lost.empty()) broadcast_rerr(lost);
    return lost;
  }

  std::vector<RerrMessage::Unreachable> process_rerr(const RerrMessage& rerr, NodeId from) {
    std::vector<RerrMessage::Unreachable> lost;
    const SimTime now = scheduler_.now();
    for (const auto& u : rerr.unreachable) {
      RouteEntry* e = table_.find(u.dest);
      if (e && e->state == RouteState::valid && e->next_hop == from) {
        e->state = RouteState::invalid;
        if (!e->seq_known || seq_newer(u.dest_seq, e->dest_seq)) e->dest_seq = u.dest_seq;
        e->seq_known = true;
        e->expiry = now;
        lost.push_back({u.dest, e->dest_seq});
      }
    }
    if (!lost.empty()) broadcast_rerr(lost);
    return lost;
  }

  /// Broadcasts one hello (a zero-hop RREP about this node).
  void hello_tick() {
    RrepMessage hello{self_, own_seq_, 0, self_,
                      params_.allowed_hello_loss * params_.hello_interval, true};
    ++hellos_sent_;
    broadcast_control(make_control(kNoNode, params_.hello_octets, hello), ControlKind::hello);
  }

  std::uint64_t rrep_dropped() const { return rrep_dropped_; }

 private:
  struct Buffered {
    PacketPtr packet;
    SendDone done;
    int reroutes_left;
  };
  struct Discovery {
    int attempts = 0;
    SimTime first_emit{0};
    EventHandle timer;
    std::vector<Buffered> buffered;
  };

  SimTime jitter() {
    if (params_.broadcast_jitter.count() <= 0) return SimTime{0};
    return SimTime{rng_uniform(jitter_, 0, params_.broadcast_jitter.count() - 1)};
  }

  void schedule_hello() {
    const SimTime at = hello_nominal_ + jitter();
    scheduler_.schedule(std::max(at, scheduler_.now()), self_, "aodv.hello", [this] {
      hello_tick();
      hello_nominal_ += params_.hello_interval;
      schedule_hello();
    });
  }

  PacketPtr make_control(NodeId dst, std::size_t octets, PacketBody body) {
    auto p = std::make_shared<NetPacket>();
    p->uid = (static_cast<std::uint64_t>(self_) << 40) | ++next_uid_;
    p->src = self_;
    p->dst = dst;
    p->size_octets = octets;
    p->created = scheduler_.now();
    p->body = std::move(body);
    return p;
  }

  void count_sent(ControlKind k) {
    if (hooks_.control_sent) hooks_.control_sent(k);
  }
  void count_received(ControlKind k) {
    if (hooks_.control_received) hooks_.control_received(k);
  }

  void broadcast_control(const PacketPtr& p, ControlKind k) {
    count_sent(k);
    link_.broadcast(p);
  }

  void send_control_unicast(NodeId next_hop, const PacketPtr& p, ControlKind k) {
    count_sent(k);
    link_.unicast(next_hop, p, [this, next_hop](bool acked) {
      if (!acked) on_link_break(next_hop);
    });
  }

  void broadcast_rerr(const std::vector<RerrMessage::Unreachable>& lost) {
    broadcast_control(make_control(kNoNode, params_.rerr_octets, RerrMessage{lost}), ControlKind::rerr);
  }

  void emit_rreq(NodeId dest, Discovery& d) {
    ++d.attempts;
    ++own_seq_;
    RreqMessage rreq;
    rreq.originator = self_;
    rreq.originator_seq = own_seq_;
    rreq.rreq_id = ++rreq_id_;
    rreq.dest = dest;
    if (const RouteEntry* e = table_.find(dest); e && e->seq_known) {
      rreq.dest_seq = e->dest_seq;
      rreq.dest_seq_known = true;
    }
    rreq.hop_count = 0;
    rreq.ttl = params_.net_diameter;
    seen_.insert({self_, rreq.rreq_id});
    broadcast_control(make_control(kNoNode, params_.rreq_octets, rreq), ControlKind::rreq);
    d.timer = scheduler_.schedule_in(params_.discovery_timeout, self_, "aodv.discovery_timeout",
                                     [this, dest] { on_discovery_timeout(dest); });
  }

  void on_discovery_timeout(NodeId dest) {
    auto it = discoveries_.find(dest);
    if (it == discoveries_.end()) return;
    if (it->second.attempts <= params_.rreq_retries) {
      emit_rreq(dest, it->second);
      return;
    }
    auto buffered = std::move(it->second.buffered);
    discoveries_.erase(it);
    if (hooks_.discovery_failed) hooks_.discovery_failed(dest);
    for (auto& b : buffered) {
      if (hooks_.dropped) hooks_.dropped(b.packet, "no_route");
      if (b.done) b.done(SendStatus::no_route);
    }
  }

  void send_internal(PacketPtr packet, SendDone done, int reroutes_left) {
    const NodeId dest = packet->dst;
    if (dest == self_) {
      if (hooks_.deliver_local) hooks_.deliver_local(packet, self_);
      if (done) done(SendStatus::sent);
      return;
    }
    const ResolveResult r = resolve_route(dest);
    if (!r.next_hop) {
      discoveries_.at(dest).buffered.push_back({std::move(packet), std::move(done), reroutes_left});
      return;
    }
    const NodeId nh = *r.next_hop;
    extend(dest, scheduler_.now());
    link_.unicast(nh, packet, [this, packet, done = std::move(done), nh, reroutes_left](bool acked) mutable {
      if (acked) {
        if (done) done(SendStatus::sent);
        return;
      }
      on_link_break(nh);
      if (reroutes_left > 0) {
        send_internal(std::move(packet), std::move(done), reroutes_left - 1);
      } else {
        if (hooks_.dropped) hooks_.dropped(packet, "link_failure");
        if (done) done(SendStatus::link_failure);
      }
    });
  }

  void on_data(const PacketPtr& packet, NodeId from) {
    const SimTime now = scheduler_.now();
    extend(packet->src, now);
    if (packet->dst == self_) {
      if (hooks_.deliver_local) hooks_.deliver_local(packet, from);
      return;
    }
    const RouteEntry* e = table_.valid(packet->dst, now);
    if (!e) {
      if (hooks_.dropped) hooks_.dropped(packet, "no_route_at_relay");
      const RouteEntry* known = table_.find(packet->dst);
      broadcast_rerr({{packet->dst, known ? known->dest_seq : 0U}});
      return;
    }
    const NodeId nh = e->next_hop;
    extend(packet->dst, now);
    link_.unicast(nh, packet, [this, packet, nh](bool acked) {
      if (acked) return;
      if (hooks_.dropped) hooks_.dropped(packet, "link_failure_at_relay");
      on_link_break(nh);
    });
  }

  /// Route update rule: replace when unknown, invalid, fresher, or equally
  /// fresh with fewer hops. Returns whether the entry changed.
  bool update_route(NodeId dest, NodeId next_hop, std::uint32_t hops, std::uint32_t seq,
                    bool seq_known, SimTime expiry) {
    if (dest == self_) return false;
    RouteEntry* e = table_.find(dest);
    const SimTime now = scheduler_.now();
    bool replace = !e || !e->usable(now) || !e->seq_known || !seq_known;
    if (!replace && seq_known) {
      replace = seq_newer(seq, e->dest_seq) || (seq == e->dest_seq && hops < e->hop_count);
    }
    if (e && e->usable(now) && e->seq_known && seq_known && seq_newer(e->dest_seq, seq)) replace = false;
    if (e && e->usable(now) && e->seq_known && !seq_known) {
      // Hop-count only information never displaces a sequenced route, except
      // that a direct neighbour is always one hop away.
      replace = hops == 1 && next_hop == dest;
      if (replace) {
        seq = e->dest_seq;
        seq_known = true;
      }
    }
    if (!replace) {
      if (e && e->usable(now) && e->next_hop == next_hop && e->hop_count == hops)
        e->expiry = std::max(e->expiry, expiry);
      return false;
    }
    RouteEntry& r = table_.upsert(dest);
    if (!seq_known && e && e->seq_known) {
      seq = e->dest_seq;
      seq_known = true;
    }
    r.next_hop = next_hop;
    r.hop_count = hops;
    r.dest_seq = seq;
    r.seq_known = seq_known;
    r.expiry = (e && e->usable(now)) ? std::max(e->expiry, expiry) : expiry;
    r.state = RouteState::valid;
    return true;
  }

  /// Every packet heard from a neighbour proves a one-hop route to it.
  void touch_neighbor_route(NodeId from) {
    update_route(from, from, 1, 0, false, scheduler_.now() + params_.active_route_lifetime);
  }

  void refresh_neighbor(NodeId from) {
    if (neighbor_timers_.count(from)) arm_neighbor_timeout(from);
  }

  void extend(NodeId dest, SimTime now) {
    RouteEntry* e = table_.find(dest);
    if (!e || !e->usable(now)) return;
    e->expiry = std::max(e->expiry, now + params_.active_route_lifetime);
    if (e->next_hop != dest) {
      RouteEntry* nh = table_.find(e->next_hop);
      if (nh && nh->usable(now)) nh->expiry = std::max(nh->expiry, now + params_.active_route_lifetime);
    }
  }

  void arm_neighbor_timeout(NodeId neighbor) {
    auto& h = neighbor_timers_[neighbor];
    scheduler_.cancel(h);
    h = scheduler_.schedule_in(params_.allowed_hello_loss * params_.hello_interval, self_,
                               "aodv.neighbor_lost", [this, neighbor] {
                                 neighbor_timers_.erase(neighbor);
                                 on_link_break(neighbor);
                               });
  }

  void disarm_neighbor(NodeId neighbor) {
    auto it = neighbor_timers_.find(neighbor);
    if (it == neighbor_timers_.end()) return;
    scheduler_.cancel(it->second);
    neighbor_timers_.erase(it);
  }

  NodeId self_;
  Scheduler& scheduler_;
  LinkLayer& link_;
  AodvParams params_;
  RngStream jitter_;
  AodvHooks hooks_;
  RouteTable table_;
  std::uint32_t own_seq_ = 0;
  std::uint32_t rreq_id_ = 0;
  std::uint64_t next_uid_ = 0;
  std::set<std::pair<NodeId, std::uint32_t>> seen_;
  std::map<NodeId, Discovery> discoveries_;
  std::map<NodeId, SimTime> last_heard_;
  std::map<NodeId, EventHandle> neighbor_timers_;
  SimTime hello_nominal_{0};
  std::uint64_t hellos_sent_ = 0;
  std::uint64_t rreq_rebroadcasts_ = 0;
  std::uint64_t rrep_dropped_ = 0;
};

}  // namespace wavesim
