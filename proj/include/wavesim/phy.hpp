#pragma once

// 10 MHz OFDM PHY abstraction and the shared wireless medium.
//
// Propagation is a deterministic unit disc on a 1-D road. Any temporal
// overlap of two in-range transmissions on one channel destroys both at the
// receiver; out-of-range senders neither deliver nor interfere.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wavesim/engine.hpp"
#include "wavesim/frame.hpp"

namespace wavesim {

/// Highest EIRP class allowed for 802.11p devices (30 W).
inline constexpr double kMaxEirpDbm = 44.8;
/// Power reserved for emergency-vehicle safety messages.
inline constexpr double kEmergencyEirpDbm = 33.0;

struct PhyParams {
  double center_frequency_ghz = 5.9;
  double channel_bandwidth_mhz = 10.0;
  std::int64_t data_rate_bps = 6'000'000;
  /// Descriptive only; airtime is driven by data_rate_bps.
  std::string modulation = "BPSK1/2";
  // 802.11a 20 MHz timings doubled for the 10 MHz channel.
  SimTime slot{13};
  SimTime sifs{32};
  SimTime difs{58};
  SimTime phy_overhead{40};
  double tx_power_dbm = 30.0;
  double comm_range_m = 1000.0;

  /// Throws std::invalid_argument naming the violated constraint.
  void validate() const {
    if (data_rate_bps <= 0) throw std::invalid_argument("phy.data_rate_bps must be > 0");
    if (!(comm_range_m > 0)) throw std::invalid_argument("phy.comm_range_m must be > 0");
    if (slot.count() <= 0 || sifs.count() <= 0)
      throw std::invalid_argument("phy.slot_us and phy.sifs_us must be > 0");
    if (phy_overhead.count() < 0) throw std::invalid_argument("phy.phy_overhead_us must be >= 0");
    if (difs != sifs + 2 * slot) {
      throw std::invalid_argument("phy.difs_us must equal sifs_us + 2*slot_us (" +
                                  std::to_string((sifs + 2 * slot).count()) + "), got " +
                                  std::to_string(difs.count()));
    }
    if (tx_power_dbm > kMaxEirpDbm) {
      throw std::invalid_argument("phy.tx_power_dbm " + std::to_string(tx_power_dbm) +
                                  " exceeds the 44.8 dBm (30 W) EIRP ceiling");
    }
  }

  static PhyParams emergency() {
    PhyParams p;
    p.tx_power_dbm = kEmergencyEirpDbm;
    return p;
  }
};

/// phy_overhead + ceil(8 * octets * 1e6 / rate) microseconds.
inline SimTime frame_airtime(std::size_t payload_octets, const PhyParams& params) {
  const auto bits = static_cast<std::int64_t>(payload_octets) * 8;
  const std::int64_t num = bits * 1'000'000;
  const std::int64_t body = (num + params.data_rate_bps - 1) / params.data_rate_bps;
  return params.phy_overhead + SimTime{body};
}

inline bool in_range(double pos_a, double pos_b, const PhyParams& params) {
  return std::abs(pos_a - pos_b) <= params.comm_range_m;
}

struct TransmissionRecord {
  NodeId sender = kNoNode;
  ChannelId channel;
  SimTime start{0};
  SimTime end{0};
  /// Sender position when the transmission started.
  double sender_pos = 0.0;
  Frame frame;
};

inline bool overlaps(const TransmissionRecord& a, const TransmissionRecord& b) {
  return a.start < b.end && b.start < a.end;
}

enum class Reception : std::uint8_t { delivered, collided, out_of_range, self };

inline const char* to_string(Reception r) {
  switch (r) {
    case Reception::delivered: return "delivered";
    case Reception::collided: return "collided";
    case Reception::out_of_range: return "out_of_range";
    case Reception::self: return "self";
  }
  return "?";
}

/// Per-record verdict at one receiver. Records from other channels than the
/// one the verdict is computed for must not be passed in. The receiver's own
/// transmissions count as interference (half duplex) and get Reception::self.
inline std::vector<Reception> reception_outcome(NodeId receiver, double receiver_pos,
                                                std::span<const TransmissionRecord> overlapping,
                                                const PhyParams& params) {
  std::vector<Reception> out(overlapping.size(), Reception::delivered);
  auto audible = [&](const TransmissionRecord& r) {
    return r.sender == receiver || in_range(r.sender_pos, receiver_pos, params);
  };
  for (std::size_t i = 0; i < overlapping.size(); ++i) {
    const auto& rec = overlapping[i];
    if (rec.sender == receiver) {
      out[i] = Reception::self;
      continue;
    }
    if (!in_range(rec.sender_pos, receiver_pos, params)) {
      out[i] = Reception::out_of_range;
      continue;
    }
    for (std::size_t j = 0; j < overlapping.size(); ++j) {
      if (j == i) continue;
      const auto& other = overlapping[j];
      if (other.channel == rec.channel && audible(other) && overlaps(rec, other)) {
        out[i] = Reception::collided;
        break;
      }
    }
  }
  return out;
}

/// Carrier sense over a set of records: any audible record on `channel`
/// spanning `at` (half-open airtime interval).
inline bool busy(NodeId receiver, double receiver_pos, ChannelId channel, SimTime at,
                 std::span<const TransmissionRecord> records, const PhyParams& params) {
  return std::any_of(records.begin(), records.end(), [&](const TransmissionRecord& r) {
    return r.sender != receiver && r.channel == channel && r.start <= at && at < r.end &&
           in_range(r.sender_pos, receiver_pos, params);
  });
}

// ---------------------------------------------------------------------------
// Shared medium
// ---------------------------------------------------------------------------

enum class RxDisposition : std::uint8_t { accepted, filtered, ignored };

/// What happened to one transmission across its audience.
struct TxReport {
  int audience = 0;
  int accepted = 0;
  int filtered = 0;
  int collided = 0;
};

class RadioListener {
 public:
  virtual ~RadioListener() = default;
  virtual void on_medium_busy() = 0;
  virtual void on_medium_idle() = 0;
  virtual RxDisposition on_frame_received(const Frame& frame) = 0;
  virtual void on_transmit_end(const Frame& frame, const TxReport& report) = 0;
};

class Medium {
 public:
  using PositionFn = std::function<double(NodeId, SimTime)>;

  struct LogEntry {
    TransmissionRecord record;
    std::vector<std::pair<NodeId, Reception>> outcomes;
  };

  Medium(Scheduler& scheduler, PhyParams params, PositionFn position)
      : scheduler_(scheduler), params_(std::move(params)), position_(std::move(position)) {}

  Medium(const Medium&) = delete;
  Medium& operator=(const Medium&) = delete;

  void attach(NodeId node, ChannelId channel, RadioListener* listener) {
    if (node >= stations_.size()) stations_.resize(node + 1);
    stations_[node] = Station{listener, channel, true, 0, false};
  }

  /// A disabled receiver hears nothing (no carrier sense, no frames).
  void set_receiver_enabled(NodeId node, bool enabled) { stations_.at(node).enabled = enabled; }

  const PhyParams& params() const { return params_; }
  double position(NodeId node, SimTime t) const { return position_(node, t); }

  /// Starts a transmission now; returns its end time.
  SimTime transmit(NodeId sender, Frame frame, SimTime airtime) {
    if (airtime.count() <= 0) throw SimulationError("transmit: non-positive airtime");
    Station& tx = stations_.at(sender);
    if (tx.transmitting) throw SimulationError("transmit: node " + std::to_string(sender) +
                                               " is already transmitting");
    tx.transmitting = true;
    const SimTime now = scheduler_.now();
    Active act;
    act.id = ++next_id_;
    act.record = TransmissionRecord{sender, tx.channel, now, now + airtime,
                                    position_(sender, now), std::move(frame)};
    act.record.frame.channel = tx.channel;
    for (NodeId n = 0; n < stations_.size(); ++n) {
      Station& st = stations_[n];
      if (n == sender || !st.listener || !st.enabled || !(st.channel == tx.channel)) continue;
      if (!in_range(act.record.sender_pos, position_(n, now), params_)) continue;
      act.audience.push_back(n);
      if (st.busy_count++ == 0) st.listener->on_medium_busy();
    }
    ++transmissions_;
    const std::uint64_t id = act.id;
    const SimTime end = act.record.end;
    records_.push_back(std::move(act));
    scheduler_.schedule(end, sender, "phy.tx_end", [this, id] { finish(id); });
    return end;
  }

  bool busy(NodeId node) const { return stations_.at(node).busy_count > 0; }
  bool transmitting(NodeId node) const { return stations_.at(node).transmitting; }

  /// Pure carrier-sense query over the medium's current records.
  bool busy_at(NodeId node, SimTime at) const {
    std::vector<TransmissionRecord> recs;
    for (const auto& a : records_) recs.push_back(a.record);
    return wavesim::busy(node, position_(node, at), stations_.at(node).channel, at, recs, params_);
  }

  void enable_log(bool on) { logging_ = on; }
  const std::vector<LogEntry>& log() const { return log_; }
  std::uint64_t transmissions() const { return transmissions_; }

 private:
  struct Station {
    RadioListener* listener = nullptr;
    ChannelId channel;
    bool enabled = true;
    int busy_count = 0;
    bool transmitting = false;
  };
  struct Active {
    std::uint64_t id = 0;
    TransmissionRecord record;
    std::vector<NodeId> audience;
    bool ended = false;
  };

  void finish(std::uint64_t id) {
    auto it = std::find_if(records_.begin(), records_.end(),
                           [id](const Active& a) { return a.id == id; });
    if (it == records_.end()) throw SimulationError("medium: unknown transmission");
    it->ended = true;
    const TransmissionRecord rec = it->record;
    const std::vector<NodeId> audience = it->audience;

    std::vector<TransmissionRecord> overlapping{rec};
    for (const auto& a : records_) {
      if (a.id != id && a.record.channel == rec.channel && overlaps(a.record, rec))
        overlapping.push_back(a.record);
    }

    TxReport report;
    LogEntry entry;
    if (logging_) entry.record = rec;
    for (NodeId r : audience) {
      Station& st = stations_[r];
      if (!st.enabled) continue;
      ++report.audience;
      const auto verdicts = reception_outcome(r, position_(r, rec.start), overlapping, params_);
      const Reception v = verdicts.front();
      if (logging_) entry.outcomes.emplace_back(r, v);
      if (v == Reception::delivered) {
        switch (st.listener->on_frame_received(rec.frame)) {
          case RxDisposition::accepted: ++report.accepted; break;
          case RxDisposition::filtered: ++report.filtered; break;
          case RxDisposition::ignored: break;
        }
      } else if (v == Reception::collided) {
        ++report.collided;
      }
    }
    if (logging_) log_.push_back(std::move(entry));

    Station& tx = stations_[rec.sender];
    tx.transmitting = false;
    tx.listener->on_transmit_end(rec.frame, report);

    for (NodeId r : audience) {
      Station& st = stations_[r];
      if (st.busy_count > 0 && --st.busy_count == 0 && st.enabled) st.listener->on_medium_idle();
    }
    prune();
  }

  void prune() {
    SimTime horizon = scheduler_.now();
    for (const auto& a : records_)
      if (!a.ended) horizon = std::min(horizon, a.record.start);
    std::erase_if(records_, [&](const Active& a) { return a.ended && a.record.end <= horizon; });
  }

  Scheduler& scheduler_;
  PhyParams params_;
  PositionFn position_;
  std::vector<Station> stations_;
  std::vector<Active> records_;
  std::uint64_t next_id_ = 0;
  std::uint64_t transmissions_ = 0;
  bool logging_ = false;
  std::vector<LogEntry> log_;
};

}  // namespace wavesim
