#pragma once

// A set of nodes sharing one medium: mobility, DCF MAC, AODV router and the
// application layer, plus the counters behind every metric series.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wavesim/aodv.hpp"
#include "wavesim/apps.hpp"
#include "wavesim/engine.hpp"
#include "wavesim/frame.hpp"
#include "wavesim/mac.hpp"
#include "wavesim/metrics.hpp"
#include "wavesim/mobility.hpp"
#include "wavesim/phy.hpp"

namespace wavesim {

struct NetworkOptions {
  std::uint64_t seed = 1;
  ChannelId channel;
  PhyParams phy;
  MacParams mac;
  AodvParams aodv;
  VoiceParams voice;
  H323Params h323;
  FtpParams ftp;
  SimTime throughput_window = from_seconds(1.0);
  SimTime rate_window = from_seconds(1.0);
  /// Pairwise in-range probing period; nullopt disables contact tracking.
  std::optional<SimTime> contact_probe;
};

struct ContactWindow {
  NodeId a = kNoNode;
  NodeId b = kNoNode;
  SimTime enter{0};
  /// Unset while the pair is still in range.
  std::optional<SimTime> leave;
};

/// Per-node AODV control packet counters.
struct ControlCounters {
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  std::map<ControlKind, std::uint64_t> sent_by_kind;
  std::map<ControlKind, std::uint64_t> received_by_kind;
};

inline const char* to_string(ControlKind k) {
  switch (k) {
    case ControlKind::rreq: return "rreq";
    case ControlKind::rrep: return "rrep";
    case ControlKind::rerr: return "rerr";
    case ControlKind::hello: return "hello";
  }
  return "?";
}

class Network final : public AppTransport {
 public:
  explicit Network(NetworkOptions opts)
      : opts_(std::move(opts)),
        rng_(opts_.seed),
        medium_(scheduler_, opts_.phy, [this](NodeId n, SimTime t) { return nodes_.at(n)->mobility.position_at(t); }),
        apps_(scheduler_, *this, &metrics_, opts_.voice, opts_.h323, opts_.ftp) {
    opts_.phy.validate();
    opts_.mac.validate();
    opts_.aodv.validate();
  }

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  NodeId add_node(MobilityProfile mobility) {
    const auto id = static_cast<NodeId>(nodes_.size());
    auto node = std::make_unique<Node>(id, mobility);
    node->mac = std::make_unique<DcfMac>(id, scheduler_, medium_, opts_.mac, rng_.stream("backoff", id));
    node->router = std::make_unique<AodvRouter>(id, scheduler_, node->link, opts_.aodv, rng_.stream("aodv", id));
    medium_.attach(id, opts_.channel, node->mac.get());
    wire(*node);
    nodes_.push_back(std::move(node));
    control_.emplace_back();
    return id;
  }

  /// Starts hellos and contact probing; call once before running.
  void start() {
    if (started_) return;
    started_ = true;
    for (auto& n : nodes_) n->router->start();
    if (opts_.contact_probe) probe_contacts();
  }

  RunSummary run_until(SimTime t_end) {
    start();
    return scheduler_.run_until(t_end);
  }

  /// Turns event logs into windowed series and closes open sessions.
  void finalize(SimTime t_end) {
    if (finalized_) return;
    finalized_ = true;
    apps_.finalize();
    auto emit = [&](Series s, const std::vector<WeightedEvent>& ev, SimTime window) {
      for (const auto& sample : windowed_rate(ev, window, t_end)) metrics_.record(s, sample.t, sample.value);
    };
    emit(Series::wlan_throughput_bps, throughput_events_, opts_.throughput_window);
    emit(Series::aodv_sent_pps, aodv_sent_events_, opts_.rate_window);
    emit(Series::aodv_received_pps, aodv_received_events_, opts_.rate_window);
    emit(Series::pkts_tx_pps, tx_events_, opts_.rate_window);
    emit(Series::pkts_rx_pps, rx_events_, opts_.rate_window);
    metrics_.enable(Series::wlan_delay_s);
    metrics_.enable(Series::aodv_discovery_time_s);
  }

  // AppTransport
  void send_app(NodeId from, NodeId to, std::size_t octets, const AppPayload& payload,
                std::function<void(SendStatus)> done) override {
    auto p = std::make_shared<NetPacket>();
    p->uid = ++next_uid_;
    p->src = from;
    p->dst = to;
    p->size_octets = octets;
    p->created = scheduler_.now();
    p->body = payload;
    nodes_.at(from)->router->send(std::move(p), std::move(done));
  }

  std::size_t size() const { return nodes_.size(); }
  Scheduler& scheduler() { return scheduler_; }
  Medium& medium() { return medium_; }
  AppLayer& apps() { return apps_; }
  const AppLayer& apps() const { return apps_; }
  MetricsRecorder& metrics() { return metrics_; }
  const MetricsRecorder& metrics() const { return metrics_; }
  const NetworkOptions& options() const { return opts_; }
  DcfMac& mac(NodeId id) { return *nodes_.at(id)->mac; }
  const DcfMac& mac(NodeId id) const { return *nodes_.at(id)->mac; }
  AodvRouter& router(NodeId id) { return *nodes_.at(id)->router; }
  const AodvRouter& router(NodeId id) const { return *nodes_.at(id)->router; }
  const MobilityProfile& mobility(NodeId id) const { return nodes_.at(id)->mobility; }
  double position(NodeId id, SimTime t) const { return nodes_.at(id)->mobility.position_at(t); }
  const ControlCounters& control(NodeId id) const { return control_.at(id); }
  const std::vector<WeightedEvent>& aodv_sent_events() const { return aodv_sent_events_; }
  const std::vector<WeightedEvent>& aodv_received_events() const { return aodv_received_events_; }
  const std::vector<ContactWindow>& contacts() const { return contacts_; }
  const std::map<std::string, std::uint64_t>& drops() const { return drops_; }
  std::uint64_t discoveries_failed() const { return discoveries_failed_; }

  /// Per-node control events, for per-node rate series.
  const std::vector<WeightedEvent>& aodv_sent_events(NodeId id) const { return per_node_sent_.at(id); }
  const std::vector<WeightedEvent>& aodv_received_events(NodeId id) const { return per_node_received_.at(id); }

  /// MSDU ledger summed over all stations, queued frames counted in flight.
  FrameLedger ledger() const {
    FrameLedger total;
    for (const auto& n : nodes_) total += n->mac->ledger_snapshot();
    return total;
  }

 private:
  struct Node;

  class NodeLink final : public LinkLayer {
   public:
    explicit NodeLink(Node& node) : node_(node) {}
    void unicast(NodeId next_hop, PacketPtr packet, std::function<void(bool)> done) override {
      Frame f;
      f.dst = MacAddress::for_node(next_hop);
      f.bssid = packet->is_control() ? Bssid::wildcard() : node_.mac->data_bssid();
      f.kind = FrameKind::data;
      f.payload_len = packet->size_octets;
      f.packet = std::move(packet);
      node_.mac->enqueue(std::move(f), [done = std::move(done)](const TxCompletion& c) {
        if (done) done(c.status == TxStatus::acked);
      });
    }
    void broadcast(PacketPtr packet) override {
      Frame f;
      f.dst = MacAddress::broadcast();
      f.bssid = Bssid::wildcard();
      f.kind = FrameKind::data;
      f.payload_len = packet->size_octets;
      f.packet = std::move(packet);
      node_.mac->enqueue(std::move(f));
    }

   private:
    Node& node_;
  };

  struct Node {
    Node(NodeId node_id, MobilityProfile m) : id(node_id), mobility(m), link(*this) {}
    NodeId id;
    MobilityProfile mobility;
    NodeLink link;
    std::unique_ptr<DcfMac> mac;
    std::unique_ptr<AodvRouter> router;
  };

  void wire(Node& node) {
    const NodeId id = node.id;
    per_node_sent_.emplace_back();
    per_node_received_.emplace_back();
    MacHooks mh;
    mh.deliver = [this, id](const Frame& f) {
      rx_events_.push_back({scheduler_.now(), 1.0});
      if (f.packet) nodes_.at(id)->router->on_receive(f.packet, f.src.node());
    };
    mh.transmitted = [this](const Frame&) { tx_events_.push_back({scheduler_.now(), 1.0}); };
    mh.complete = [this](const TxCompletion& c) {
      if (c.status == TxStatus::gave_up) return;
      metrics_.record(Series::wlan_delay_s, c.done, to_seconds(c.done - c.head_of_queue));
      const bool delivered = c.status == TxStatus::acked || c.last_report.accepted > 0;
      if (delivered) throughput_events_.push_back({c.done, static_cast<double>(c.payload_len) * 8.0});
    };
    node.mac->set_hooks(std::move(mh));

    AodvHooks ah;
    ah.deliver_local = [this, id](const PacketPtr& p, NodeId) { apps_.on_deliver(id, *p); };
    ah.control_sent = [this, id](ControlKind k) {
      const WeightedEvent e{scheduler_.now(), 1.0};
      aodv_sent_events_.push_back(e);
      per_node_sent_[id].push_back(e);
      ++control_[id].sent;
      ++control_[id].sent_by_kind[k];
    };
    ah.control_received = [this, id](ControlKind k) {
      const WeightedEvent e{scheduler_.now(), 1.0};
      aodv_received_events_.push_back(e);
      per_node_received_[id].push_back(e);
      ++control_[id].received;
      ++control_[id].received_by_kind[k];
    };
    ah.discovery_complete = [this](NodeId, SimTime took) {
      metrics_.record(Series::aodv_discovery_time_s, scheduler_.now(), to_seconds(took));
    };
    ah.discovery_failed = [this](NodeId) { ++discoveries_failed_; };
    ah.dropped = [this](const PacketPtr&, const char* reason) { ++drops_[reason]; };
    node.router->set_hooks(std::move(ah));
  }

  void probe_contacts() {
    const SimTime now = scheduler_.now();
    for (NodeId a = 0; a < nodes_.size(); ++a) {
      for (NodeId b = a + 1; b < nodes_.size(); ++b) {
        const bool in = in_range(position(a, now), position(b, now), opts_.phy);
        auto key = std::make_pair(a, b);
        auto open = open_contacts_.find(key);
        if (in && open == open_contacts_.end()) {
          open_contacts_[key] = contacts_.size();
          contacts_.push_back({a, b, now, std::nullopt});
        } else if (!in && open != open_contacts_.end()) {
          contacts_[open->second].leave = now;
          open_contacts_.erase(open);
        }
      }
    }
    scheduler_.schedule_in(*opts_.contact_probe, kNoNode, "net.contact_probe", [this] { probe_contacts(); });
  }

  NetworkOptions opts_;
  Scheduler scheduler_;
  RngFactory rng_;
  Medium medium_;
  MetricsRecorder metrics_;
  AppLayer apps_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<ControlCounters> control_;
  std::vector<std::vector<WeightedEvent>> per_node_sent_;
  std::vector<std::vector<WeightedEvent>> per_node_received_;
  std::vector<WeightedEvent> throughput_events_;
  std::vector<WeightedEvent> aodv_sent_events_;
  std::vector<WeightedEvent> aodv_received_events_;
  std::vector<WeightedEvent> tx_events_;
  std::vector<WeightedEvent> rx_events_;
  std::vector<ContactWindow> contacts_;
  std::map<std::pair<NodeId, NodeId>, std::size_t> open_contacts_;
  std::map<std::string, std::uint64_t> drops_;
  std::uint64_t discoveries_failed_ = 0;
  std::uint64_t next_uid_ = 0;
  bool started_ = false;
  bool finalized_ = false;
};

}  // namespace wavesim
