#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "support.hpp"

using namespace wavesim;

namespace {

struct RecordingLink final : LinkLayer {
  struct Sent {
    NodeId next_hop;
    PacketPtr packet;
  };
  std::vector<Sent> unicasts;
  std::vector<PacketPtr> broadcasts;
  bool ack = true;
  void unicast(NodeId nh, PacketPtr p, std::function<void(bool)> done) override {
    unicasts.push_back({nh, p});
    if (done) done(ack);
  }
  void broadcast(PacketPtr p) override { broadcasts.push_back(std::move(p)); }
};

struct Solo {
  explicit Solo(NodeId self, AodvParams p = quiet()) : router(self, sched, link, p, RngStream(1, "aodv")) {}
  static AodvParams quiet() {
    AodvParams p;
    p.hello_enabled = false;
    return p;
  }
  Scheduler sched;
  RecordingLink link;
  AodvRouter router;
};

RreqMessage rreq(NodeId orig, std::uint32_t id, NodeId dest, int ttl = 10) {
  RreqMessage m;
  m.originator = orig;
  m.originator_seq = 1;
  m.rreq_id = id;
  m.dest = dest;
  m.ttl = ttl;
  return m;
}

NetworkOptions no_hello(double range = 1000) {
  NetworkOptions o;
  o.aodv.hello_enabled = false;
  o.phy.comm_range_m = range;
  return o;
}

// Walks next hops from src to dst; returns the hop count or -1 on a loop or a
// dead end.
int walk(const Network& net, NodeId src, NodeId dst, SimTime now) {
  std::set<NodeId> visited{src};
  NodeId at = src;
  int hops = 0;
  while (at != dst) {
    const RouteEntry* e = net.router(at).table().valid(dst, now);
    if (!e) return -1;
    at = e->next_hop;
    if (!visited.insert(at).second) return -1;
    ++hops;
  }
  return hops;
}

}  // namespace

TEST(SeqNumbers, WraparoundComparison) {
  EXPECT_TRUE(seq_newer(2, 1));
  EXPECT_FALSE(seq_newer(1, 2));
  EXPECT_FALSE(seq_newer(5, 5));
  EXPECT_TRUE(seq_newer(0, 0xFFFF'FFFFu));
  EXPECT_TRUE(seq_newer(3, 0xFFFF'FFF0u));
  EXPECT_FALSE(seq_newer(0xFFFF'FFF0u, 3));
}

TEST(AodvParams, Validation) {
  AodvParams p;
  EXPECT_NO_THROW(p.validate());
  p.broadcast_jitter = from_seconds(1);
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.hello_enabled = false;
  EXPECT_NO_THROW(p.validate());
  p.allowed_hello_loss = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Rreq, DuplicateDropped) {
  Solo s(1);
  EXPECT_EQ(s.router.process_rreq(rreq(0, 7, 5), 0), RreqAction::rebroadcast);
  EXPECT_EQ(s.router.process_rreq(rreq(0, 7, 5), 2), RreqAction::drop_duplicate);
  EXPECT_EQ(s.router.process_rreq(rreq(0, 8, 5), 0), RreqAction::rebroadcast);
}

TEST(Rreq, TtlExhaustedDropped) {
  Solo s(1);
  EXPECT_EQ(s.router.process_rreq(rreq(0, 1, 5, 1), 0), RreqAction::drop_ttl);
}

TEST(Rreq, ReverseRouteInstalled) {
  Solo s(1);
  auto m = rreq(0, 1, 5);
  m.hop_count = 2;
  m.originator_seq = 9;
  s.router.process_rreq(m, 3);
  const RouteEntry* e = s.router.table().valid(0, s.sched.now());
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->next_hop, 3u);
  EXPECT_EQ(e->hop_count, 3u);
  EXPECT_EQ(e->dest_seq, 9u);
  ASSERT_NE(s.router.table().valid(3, s.sched.now()), nullptr);
}

TEST(Rreq, DestinationReplies) {
  Solo s(5);
  EXPECT_EQ(s.router.process_rreq(rreq(0, 1, 5), 2), RreqAction::reply_rrep);
  ASSERT_EQ(s.link.unicasts.size(), 1u);
  EXPECT_EQ(s.link.unicasts[0].next_hop, 2u);
  const auto* rrep = std::get_if<RrepMessage>(&s.link.unicasts[0].packet->body);
  ASSERT_NE(rrep, nullptr);
  EXPECT_EQ(rrep->dest, 5u);
  EXPECT_EQ(rrep->originator, 0u);
  EXPECT_EQ(rrep->hop_count, 0u);
}

TEST(Rreq, ForwardedAfterHoldTime) {
  Solo s(1);
  s.router.process_rreq(rreq(0, 1, 5), 0);
  EXPECT_TRUE(s.link.broadcasts.empty());
  s.sched.run_until(from_millis(40) - SimTime{1});
  EXPECT_TRUE(s.link.broadcasts.empty());
  s.sched.run_until(from_millis(50));
  ASSERT_EQ(s.link.broadcasts.size(), 1u);
  const auto* fwd = std::get_if<RreqMessage>(&s.link.broadcasts[0]->body);
  ASSERT_NE(fwd, nullptr);
  EXPECT_EQ(fwd->hop_count, 1u);
  EXPECT_EQ(fwd->ttl, 9);
}

TEST(Rrep, DroppedWithoutReverseRoute) {
  Solo s(1);
  RrepMessage m{5, 1, 0, 0, from_seconds(3), false};
  EXPECT_EQ(s.router.process_rrep(m, 5), RrepAction::drop_no_reverse);
  EXPECT_EQ(s.router.rrep_dropped(), 1u);
}

TEST(Rrep, ForwardedAlongReverseRoute) {
  Solo s(1);
  s.router.process_rreq(rreq(0, 1, 5), 0);
  RrepMessage m{5, 4, 0, 0, from_seconds(3), false};
  EXPECT_EQ(s.router.process_rrep(m, 5), RrepAction::forward);
  ASSERT_EQ(s.link.unicasts.size(), 1u);
  EXPECT_EQ(s.link.unicasts[0].next_hop, 0u);
  const RouteEntry* e = s.router.table().valid(5, s.sched.now());
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->next_hop, 5u);
  EXPECT_EQ(e->hop_count, 1u);
  EXPECT_EQ(e->dest_seq, 4u);
}

TEST(RouteUpdate, FresherSequenceWinsAndStaleIgnored) {
  Solo s(0);
  s.router.process_rrep(RrepMessage{9, 5, 2, 0, from_seconds(3), false}, 1);
  EXPECT_EQ(s.router.table().find(9)->next_hop, 1u);
  s.router.process_rrep(RrepMessage{9, 4, 0, 0, from_seconds(3), false}, 2);
  EXPECT_EQ(s.router.table().find(9)->next_hop, 1u);
  s.router.process_rrep(RrepMessage{9, 5, 0, 0, from_seconds(3), false}, 2);
  EXPECT_EQ(s.router.table().find(9)->next_hop, 2u);
  EXPECT_EQ(s.router.table().find(9)->hop_count, 1u);
  s.router.process_rrep(RrepMessage{9, 6, 4, 0, from_seconds(3), false}, 3);
  EXPECT_EQ(s.router.table().find(9)->next_hop, 3u);
  EXPECT_EQ(s.router.table().find(9)->dest_seq, 6u);
}

TEST(Rerr, LinkBreakInvalidatesAndReports) {
  Solo s(0);
  s.router.process_rrep(RrepMessage{9, 5, 2, 0, from_seconds(3), false}, 1);
  s.router.process_rrep(RrepMessage{8, 2, 1, 0, from_seconds(3), false}, 1);
  s.router.process_rrep(RrepMessage{7, 2, 1, 0, from_seconds(3), false}, 4);
  const auto lost = s.router.on_link_break(1);
  EXPECT_EQ(lost.size(), 3u);  // 8, 9 and the neighbour itself
  EXPECT_EQ(s.router.table().valid(9, s.sched.now()), nullptr);
  EXPECT_EQ(s.router.table().find(9)->dest_seq, 6u);
  EXPECT_NE(s.router.table().valid(7, s.sched.now()), nullptr);
  ASSERT_EQ(s.link.broadcasts.size(), 1u);
  EXPECT_TRUE(std::holds_alternative<RerrMessage>(s.link.broadcasts[0]->body));
}

TEST(Rerr, OnlyRoutesThroughSenderInvalidated) {
  Solo s(0);
  s.router.process_rrep(RrepMessage{9, 5, 2, 0, from_seconds(3), false}, 1);
  s.router.process_rrep(RrepMessage{8, 5, 2, 0, from_seconds(3), false}, 2);
  RerrMessage rerr{{{9, 6}, {8, 6}}};
  const auto lost = s.router.process_rerr(rerr, 1);
  ASSERT_EQ(lost.size(), 1u);
  EXPECT_EQ(lost[0].dest, 9u);
  EXPECT_EQ(s.router.table().valid(9, s.sched.now()), nullptr);
  EXPECT_NE(s.router.table().valid(8, s.sched.now()), nullptr);
  EXPECT_TRUE(s.router.process_rerr(rerr, 1).empty());
}

TEST(Discovery, ChainThreeNodes) {
  auto net = wstest::static_network({0, 500, 1000}, no_hello(600));
  net->scheduler().schedule(SimTime{0}, 0, "go", [&] { net->router(0).resolve_route(2); });
  net->run_until(from_seconds(2));
  const RouteEntry* a = net->router(0).table().valid(2, net->scheduler().now());
  ASSERT_NE(a, nullptr);
  EXPECT_EQ(a->next_hop, 1u);
  EXPECT_EQ(a->hop_count, 2u);
  const RouteEntry* b = net->router(1).table().valid(2, net->scheduler().now());
  ASSERT_NE(b, nullptr);
  EXPECT_EQ(b->next_hop, 2u);
  EXPECT_EQ(b->hop_count, 1u);
  const RouteEntry* c = net->router(2).table().valid(0, net->scheduler().now());
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->next_hop, 1u);
  EXPECT_EQ(c->hop_count, 2u);
}

TEST(Discovery, UnreachableFailsAfterRetries) {
  auto net = wstest::static_network({0, 500, 3000}, no_hello());
  SendStatus status = SendStatus::sent;
  net->scheduler().schedule(SimTime{0}, 0, "go", [&] {
    auto p = std::make_shared<NetPacket>();
    p->src = 0;
    p->dst = 2;
    p->size_octets = 100;
    net->router(0).send(p, [&](SendStatus s) { status = s; });
  });
  net->run_until(from_seconds(2.5));
  EXPECT_EQ(net->discoveries_failed(), 0u);
  EXPECT_TRUE(net->router(0).discovery_pending(2));
  net->run_until(from_seconds(4));
  EXPECT_EQ(net->discoveries_failed(), 1u);
  EXPECT_EQ(status, SendStatus::no_route);
  EXPECT_EQ(net->control(0).sent_by_kind.at(ControlKind::rreq), 3u);
}

TEST(Discovery, DataFollowsDiscoveredRoute) {
  auto net = wstest::static_network({0, 800, 1600, 2400}, no_hello());
  net->scheduler().schedule(SimTime{0}, 0, "go", [&] {
    net->send_app(0, 3, 200, AppPayload{}, {});
  });
  net->run_until(from_seconds(1));
  EXPECT_EQ(walk(*net, 0, 3, net->scheduler().now()), 3);
  EXPECT_EQ(net->metrics().samples(Series::aodv_discovery_time_s).size(), 1u);
}

TEST(Hello, PeriodicAndBuildsNeighbourRoutes) {
  NetworkOptions o;
  auto net = wstest::static_network({0, 500, 1000}, o);
  net->run_until(from_seconds(10.5));
  for (NodeId n = 0; n < 3; ++n) {
    const auto sent = net->router(n).hellos_sent();
    EXPECT_GE(sent, 10u);
    EXPECT_LE(sent, 11u);
  }
  EXPECT_NE(net->router(0).table().valid(1, net->scheduler().now()), nullptr);
  EXPECT_NE(net->router(1).table().valid(2, net->scheduler().now()), nullptr);
  EXPECT_NE(net->router(0).table().valid(2, net->scheduler().now()), nullptr) << "0 and 2 are 1000 m apart";
}

TEST(Hello, NeighbourLostAfterMissedHellos) {
  NetworkOptions o;
  auto net = std::make_unique<Network>(o);
  net->add_node(MobilityProfile::fixed(0));
  net->add_node(MobilityProfile(900, 360.0));  // leaves range after 1 s
  net->run_until(from_seconds(4.5));
  EXPECT_EQ(net->router(0).table().valid(1, net->scheduler().now()), nullptr);
}

TEST(Hello, ControlRatesMatchHelloInterval) {
  NetworkOptions o;
  auto net = wstest::static_network({0, 500}, o);
  net->run_until(from_seconds(60));
  EXPECT_NEAR(static_cast<double>(net->control(0).sent) / 60.0, 1.0, 0.05);
  EXPECT_NEAR(static_cast<double>(net->control(0).received) / 60.0, 1.0, 0.05);
}

// BFS oracle on random static line topologies; one fresh network per pair.
TEST(Discovery, HopCountsMatchBfsOnRandomTopologies) {
  RngStream topo(4242, "topologies");
  int reachable = 0;
  int unreachable = 0;
  for (int t = 0; t < 40; ++t) {
    const auto n = static_cast<std::size_t>(rng_uniform(topo, 3, 5));
    std::vector<double> pos;
    for (std::size_t i = 0; i < n; ++i) pos.push_back(static_cast<double>(rng_uniform(topo, 0, 3000)));
    for (std::size_t src = 0; src < n; ++src) {
      const auto oracle = wstest::bfs_hops(pos, 1000, src);
      for (std::size_t dst = 0; dst < n; ++dst) {
        if (src == dst) continue;
        NetworkOptions o = no_hello();
        o.seed = static_cast<std::uint64_t>(t * 100 + src * 10 + dst + 1);
        auto net = wstest::static_network(pos, o);
        const auto s = static_cast<NodeId>(src);
        const auto d = static_cast<NodeId>(dst);
        net->scheduler().schedule(SimTime{0}, s, "go", [&] { net->router(s).resolve_route(d); });
        net->run_until(from_seconds(1));
        const RouteEntry* e = net->router(s).table().find(d);
        if (oracle[dst]) {
          ++reachable;
          ASSERT_TRUE(e && e->state == RouteState::valid) << "t=" << t << " " << src << "->" << dst;
          EXPECT_EQ(static_cast<int>(e->hop_count), *oracle[dst]) << "t=" << t << " " << src << "->" << dst;
          EXPECT_EQ(walk(*net, s, d, net->scheduler().now()), *oracle[dst]);
        } else {
          ++unreachable;
        }
        net->run_until(from_seconds(4));
        EXPECT_EQ(net->discoveries_failed(), oracle[dst] ? 0u : 1u) << "t=" << t << " " << src << "->" << dst;
      }
    }
  }
  EXPECT_GT(reachable, 0);
  EXPECT_GT(unreachable, 0);
}

TEST(LoopFreedom, RoutesAcyclicUnderMobility) {
  NetworkOptions o;
  o.seed = 3;
  Network net(o);
  net.add_node(MobilityProfile(-1000, 32));
  net.add_node(MobilityProfile::fixed(0));
  net.add_node(MobilityProfile::fixed(950));
  net.add_node(MobilityProfile(1800, 97, -1));
  net.apps().start_call(0, 2, SimTime{0});
  for (int k = 1; k <= 60; ++k) {
    net.run_until(from_seconds(k));
    const SimTime now = net.scheduler().now();
    for (NodeId src = 0; src < net.size(); ++src) {
      for (NodeId dst = 0; dst < net.size(); ++dst) {
        if (src == dst || !net.router(src).table().valid(dst, now)) continue;
        std::set<NodeId> seen{src};
        NodeId at = src;
        while (at != dst) {
          const RouteEntry* e = net.router(at).table().valid(dst, now);
          if (!e) break;
          at = e->next_hop;
          ASSERT_TRUE(seen.insert(at).second) << "loop " << src << "->" << dst << " at t=" << k;
        }
      }
    }
  }
}
