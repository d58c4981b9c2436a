#pragma once

// IEEE 802.11p MAC: DCF channel access plus the WAVE additions (wildcard
// BSSID operation, single-beacon WBSS join, DS-bit validity).

#include <bit>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wavesim/engine.hpp"
#include "wavesim/frame.hpp"
#include "wavesim/phy.hpp"

namespace wavesim {

// ---------------------------------------------------------------------------
// Station mode and receive filter
// ---------------------------------------------------------------------------

/// Either plain WAVE mode (no BSS) or membership of exactly one WBSS.
struct StationMode {
  std::optional<Bssid> wbss;

  static StationMode wave_mode() { return {}; }
  static StationMode member_of(Bssid b) {
    if (b.is_wildcard()) throw std::invalid_argument("cannot be a member of the wildcard BSSID");
    return StationMode{b};
  }
  bool is_member() const { return wbss.has_value(); }
  friend bool operator==(const StationMode&, const StationMode&) = default;
};

enum class FrameVerdict : std::uint8_t { accept, drop_filter, drop_invalid };

inline const char* to_string(FrameVerdict v) {
  switch (v) {
    case FrameVerdict::accept: return "accept";
    case FrameVerdict::drop_filter: return "drop_filter";
    case FrameVerdict::drop_invalid: return "drop_invalid";
  }
  return "?";
}

/// Receive filter for data and beacon frames. Wildcard-BSSID frames are
/// accepted by every station as long as both DS bits are clear; a WBSS
/// member additionally accepts its own BSSID.
inline FrameVerdict accept_frame(const StationMode& mode, MacAddress self, const Frame& frame) {
  if (frame.bssid.is_wildcard()) {
    if (frame.to_ds || frame.from_ds) return FrameVerdict::drop_invalid;
  } else if (!(mode.wbss && *mode.wbss == frame.bssid)) {
    return FrameVerdict::drop_filter;
  }
  if (!(frame.dst == self || frame.dst.is_broadcast())) return FrameVerdict::drop_filter;
  return FrameVerdict::accept;
}

// ---------------------------------------------------------------------------
// Contention window
// ---------------------------------------------------------------------------

inline constexpr bool is_cw_size(int v) {
  return v >= 0 && std::has_single_bit(static_cast<unsigned>(v) + 1U);
}

/// Binary exponential contention window: doubled (+1) on failure up to
/// cw_max, reset to cw_min on success.
class ContentionWindow {
 public:
  ContentionWindow(int cw_min = 15, int cw_max = 1023) : min_(cw_min), max_(cw_max), cw_(cw_min) {
    if (!is_cw_size(cw_min) || !is_cw_size(cw_max) || cw_min > cw_max) {
      throw std::invalid_argument("contention window bounds must be 2^k-1 with cw_min <= cw_max");
    }
  }
  int value() const { return cw_; }
  int min() const { return min_; }
  int max() const { return max_; }
  void on_failure() { cw_ = std::min(2 * (cw_ + 1) - 1, max_); }
  void reset() { cw_ = min_; }

 private:
  int min_;
  int max_;
  int cw_;
};

/// Uniform backoff slot count in [0, cw].
inline int next_backoff(int cw, RngStream& stream) {
  return static_cast<int>(rng_uniform(stream, 0, cw));
}

// ---------------------------------------------------------------------------
// WBSS advertisement
// ---------------------------------------------------------------------------

struct WbssAdvertisement {
  Bssid bssid{0};
  std::vector<std::uint8_t> service;
  ChannelId channel;

  /// Beacon body: 6-octet BSSID, 1-octet channel, service description.
  std::vector<std::uint8_t> encode() const {
    std::vector<std::uint8_t> out;
    for (int i = 5; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(bssid.value() >> (8 * i)));
    out.push_back(static_cast<std::uint8_t>(channel.number()));
    out.insert(out.end(), service.begin(), service.end());
    return out;
  }

  static std::optional<WbssAdvertisement> decode(const std::vector<std::uint8_t>& body) {
    if (body.size() < 7 || !ChannelId::is_legal(body[6])) return std::nullopt;
    std::uint64_t b = 0;
    for (int i = 0; i < 6; ++i) b = (b << 8) | body[i];
    WbssAdvertisement ad;
    ad.bssid = Bssid(b);
    ad.channel = ChannelId(body[6]);
    ad.service.assign(body.begin() + 7, body.end());
    return ad;
  }
};

/// Upper-layer decision whether to join an advertised WBSS: the first
/// advertisement whose service description equals the filter wins and later
/// ones are ignored. An empty filter joins nothing.
struct JoinPolicy {
  std::optional<std::vector<std::uint8_t>> service_filter;

  bool matches(const WbssAdvertisement& ad) const {
    return service_filter && *service_filter == ad.service;
  }
};

inline StationMode wbss_join_on_beacon(const StationMode& current, const JoinPolicy& policy,
                                       const WbssAdvertisement& ad) {
  if (current.is_member() || ad.bssid.is_wildcard() || !policy.matches(ad)) return current;
  return StationMode::member_of(ad.bssid);
}

// ---------------------------------------------------------------------------
// DCF
// ---------------------------------------------------------------------------

struct MacParams {
  int cw_min = 15;
  int cw_max = 1023;
  int retry_limit = 7;
  /// Unicast payloads at or above this size use RTS/CTS; nullopt disables.
  std::optional<std::size_t> rts_threshold;
  std::size_t ack_octets = 10;
  std::size_t rts_octets = 16;
  std::size_t cts_octets = 10;
  /// Defaults to SIFS + ACK airtime + 2 slots.
  std::optional<SimTime> ack_timeout;

  void validate() const {
    if (!is_cw_size(cw_min)) throw std::invalid_argument("mac.cw_min must be 2^k-1");
    if (!is_cw_size(cw_max)) throw std::invalid_argument("mac.cw_max must be 2^k-1");
    if (cw_min > cw_max) throw std::invalid_argument("mac.cw_min must be <= mac.cw_max");
    if (retry_limit < 0) throw std::invalid_argument("mac.retry_limit must be >= 0");
    if (ack_timeout && ack_timeout->count() <= 0)
      throw std::invalid_argument("mac.ack_timeout_us must be > 0");
  }

  SimTime effective_ack_timeout(const PhyParams& phy) const {
    return ack_timeout.value_or(phy.sifs + frame_airtime(ack_octets, phy) + 2 * phy.slot);
  }
  SimTime cts_timeout(const PhyParams& phy) const {
    return phy.sifs + frame_airtime(cts_octets, phy) + 2 * phy.slot;
  }
};

enum class TxStatus : std::uint8_t { acked, gave_up, sent_no_ack_expected };

inline const char* to_string(TxStatus s) {
  switch (s) {
    case TxStatus::acked: return "acked";
    case TxStatus::gave_up: return "gave_up";
    case TxStatus::sent_no_ack_expected: return "sent_no_ack_expected";
  }
  return "?";
}

/// Final disposition of every MSDU handed to a MAC.
struct FrameLedger {
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  /// Broadcasts that no station received cleanly (collision or nobody in range).
  std::uint64_t collided = 0;
  /// Broadcasts received cleanly but rejected by every receiver's filter.
  std::uint64_t filtered = 0;
  std::uint64_t retry_exhausted = 0;
  std::uint64_t in_flight = 0;

  bool balanced() const {
    return generated == delivered + collided + filtered + retry_exhausted + in_flight;
  }
  FrameLedger& operator+=(const FrameLedger& o) {
    generated += o.generated;
    delivered += o.delivered;
    collided += o.collided;
    filtered += o.filtered;
    retry_exhausted += o.retry_exhausted;
    in_flight += o.in_flight;
    return *this;
  }
};

struct TxAttempt {
  std::uint64_t seq = 0;
  int attempt = 1;
  int cw = 0;
  int backoff_slots = 0;
  SimTime at{0};
};

struct TxCompletion {
  std::uint64_t seq = 0;
  FrameKind kind = FrameKind::data;
  MacAddress dst;
  TxStatus status = TxStatus::acked;
  int attempts = 0;
  std::size_t payload_len = 0;
  /// Head-of-queue instant and completion instant (ACK or airtime end).
  SimTime head_of_queue{0};
  SimTime done{0};
  TxReport last_report;
  PacketPtr packet;
};

struct MacHooks {
  /// Accepted data frame addressed to this station or broadcast, duplicates removed.
  std::function<void(const Frame&)> deliver;
  std::function<void(const Frame&, const WbssAdvertisement&)> beacon;
  std::function<void(const TxAttempt&)> attempt;
  std::function<void(const TxCompletion&)> complete;
  /// Data/beacon frame placed on the medium (every attempt).
  std::function<void(const Frame&)> transmitted;
};

class DcfMac final : public RadioListener {
 public:
  using CompletionFn = std::function<void(const TxCompletion&)>;

  enum class State : std::uint8_t { idle, defer, difs, backoff, tx_rts, wait_cts, sifs_data,
                                    tx_data, wait_ack };

  DcfMac(NodeId node, Scheduler& scheduler, Medium& medium, MacParams params, RngStream backoff)
      : node_(node),
        self_(MacAddress::for_node(node)),
        scheduler_(scheduler),
        medium_(medium),
        params_(params),
        cw_(params.cw_min, params.cw_max),
        backoff_rng_(std::move(backoff)) {
    params_.validate();
  }

  DcfMac(const DcfMac&) = delete;
  DcfMac& operator=(const DcfMac&) = delete;

  NodeId node() const { return node_; }
  MacAddress address() const { return self_; }
  const StationMode& mode() const { return mode_; }
  void set_mode(StationMode m) { mode_ = m; }
  void set_join_policy(JoinPolicy p) { join_policy_ = std::move(p); }
  void set_hooks(MacHooks hooks) { hooks_ = std::move(hooks); }
  const ContentionWindow& contention_window() const { return cw_; }
  State state() const { return state_; }
  const FrameLedger& ledger() const { return ledger_; }
  std::size_t queue_length() const { return queue_.size(); }
  const MacParams& params() const { return params_; }

  /// BSSID this station stamps on its application data frames.
  Bssid data_bssid() const { return mode_.wbss.value_or(Bssid::wildcard()); }

  /// Ledger snapshot with frames still queued or in service counted in flight.
  FrameLedger ledger_snapshot() const {
    FrameLedger l = ledger_;
    l.in_flight = queue_.size();
    return l;
  }

  void enqueue(Frame frame, CompletionFn done = {}) {
    if (frame.is_control()) throw std::invalid_argument("control frames are generated by the MAC");
    frame.src = self_;
    frame.seq = ++next_seq_;
    ++ledger_.generated;
    queue_.push_back(Pending{std::move(frame), std::move(done)});
    if (state_ == State::idle) start_access();
  }

  /// Queues one on-demand beacon advertising `ad`; never repeated by the MAC.
  void wbss_advertise(const WbssAdvertisement& ad) {
    if (ad.bssid.is_wildcard()) throw std::invalid_argument("WBSS advertisement needs a non-wildcard BSSID");
    Frame f;
    f.kind = FrameKind::wave_beacon;
    f.dst = MacAddress::broadcast();
    f.bssid = Bssid::wildcard();
    f.body = ad.encode();
    f.payload_len = f.body.size();
    if (!mode_.is_member()) mode_ = StationMode::member_of(ad.bssid);
    enqueue(std::move(f));
  }

  // RadioListener ----------------------------------------------------------

  void on_medium_busy() override {
    if (state_ == State::difs) {
      scheduler_.cancel(timer_);
      state_ = State::defer;
    } else if (state_ == State::backoff) {
      const auto elapsed = (scheduler_.now() - backoff_started_) / medium_.params().slot;
      backoff_remaining_ = std::max<int>(0, backoff_remaining_ - static_cast<int>(elapsed));
      scheduler_.cancel(timer_);
      state_ = State::defer;
    }
  }

  void on_medium_idle() override {
    if (state_ == State::defer) try_difs();
  }

  RxDisposition on_frame_received(const Frame& frame) override {
    switch (frame.kind) {
      case FrameKind::ack:
        if (frame.dst == self_ && state_ == State::wait_ack) {
          scheduler_.cancel(timer_);
          finish_current(TxStatus::acked);
        }
        return RxDisposition::ignored;
      case FrameKind::cts:
        if (frame.dst == self_ && state_ == State::wait_cts) {
          scheduler_.cancel(timer_);
          state_ = State::sifs_data;
          timer_ = scheduler_.schedule_in(medium_.params().sifs, node_, "mac.sifs_data",
                                          [this] { send_current_data(); });
        }
        return RxDisposition::ignored;
      case FrameKind::rts:
        if (frame.dst == self_) respond(FrameKind::cts, frame);
        return RxDisposition::ignored;
      case FrameKind::data:
      case FrameKind::wave_beacon:
        break;
    }
    const FrameVerdict verdict = accept_frame(mode_, self_, frame);
    if (verdict != FrameVerdict::accept) return RxDisposition::filtered;
    if (frame.kind == FrameKind::wave_beacon) {
      if (auto ad = WbssAdvertisement::decode(frame.body)) {
        mode_ = wbss_join_on_beacon(mode_, join_policy_, *ad);
        if (hooks_.beacon) hooks_.beacon(frame, *ad);
      }
      return RxDisposition::accepted;
    }
    if (!frame.dst.is_broadcast()) {
      respond(FrameKind::ack, frame);
      auto [it, fresh] = last_rx_seq_.try_emplace(frame.src.value(), frame.seq);
      if (!fresh) {
        if (it->second == frame.seq) return RxDisposition::accepted;  // retransmission
        it->second = frame.seq;
      }
    }
    if (hooks_.deliver) hooks_.deliver(frame);
    return RxDisposition::accepted;
  }

  void on_transmit_end(const Frame& frame, const TxReport& report) override {
    if (frame.kind == FrameKind::ack || frame.kind == FrameKind::cts) {
      responding_ = false;
      if (state_ == State::defer && !medium_.busy(node_)) try_difs();
      return;
    }
    const PhyParams& phy = medium_.params();
    if (frame.kind == FrameKind::rts) {
      state_ = State::wait_cts;
      timer_ = scheduler_.schedule_in(params_.cts_timeout(phy), node_, "mac.cts_timeout",
                                      [this] { on_response_timeout(); });
      return;
    }
    last_report_ = report;
    if (frame.dst.is_broadcast()) {
      finish_current(TxStatus::sent_no_ack_expected);
      return;
    }
    state_ = State::wait_ack;
    timer_ = scheduler_.schedule_in(params_.effective_ack_timeout(phy), node_, "mac.ack_timeout",
                                    [this] { on_response_timeout(); });
  }

 private:
  struct Pending {
    Frame frame;
    CompletionFn done;
  };

  void start_access() {
    if (queue_.empty()) {
      state_ = State::idle;
      return;
    }
    head_of_queue_ = scheduler_.now();
    retries_ = 0;
    backoff_remaining_ = next_backoff(cw_.value(), backoff_rng_);
    attempt_backoff_ = backoff_remaining_;
    state_ = State::defer;
    try_difs();
  }

  void try_difs() {
    if (responding_ || medium_.busy(node_) || medium_.transmitting(node_)) {
      state_ = State::defer;
      return;
    }
    state_ = State::difs;
    timer_ = scheduler_.schedule_in(medium_.params().difs, node_, "mac.difs_end", [this] {
      state_ = State::backoff;
      backoff_started_ = scheduler_.now();
      if (backoff_remaining_ == 0) {
        transmit_current();
      } else {
        timer_ = scheduler_.schedule_in(backoff_remaining_ * medium_.params().slot, node_,
                                        "mac.backoff_end", [this] {
                                          backoff_remaining_ = 0;
                                          transmit_current();
                                        });
      }
    });
  }

  void transmit_current() {
    const Frame& f = queue_.front().frame;
    if (hooks_.attempt)
      hooks_.attempt(TxAttempt{f.seq, retries_ + 1, cw_.value(), attempt_backoff_, scheduler_.now()});
    const bool use_rts = !f.dst.is_broadcast() && params_.rts_threshold &&
                         f.payload_len >= *params_.rts_threshold;
    if (use_rts) {
      Frame rts;
      rts.kind = FrameKind::rts;
      rts.src = self_;
      rts.dst = f.dst;
      rts.bssid = f.bssid;
      state_ = State::tx_rts;
      medium_.transmit(node_, std::move(rts), frame_airtime(params_.rts_octets, medium_.params()));
      return;
    }
    send_current_data();
  }

  void send_current_data() {
    const Frame& f = queue_.front().frame;
    state_ = State::tx_data;
    if (hooks_.transmitted) hooks_.transmitted(f);
    medium_.transmit(node_, f, frame_airtime(f.payload_len, medium_.params()));
  }

  void on_response_timeout() {
    ++retries_;
    if (retries_ > params_.retry_limit) {
      finish_current(TxStatus::gave_up);
      return;
    }
    cw_.on_failure();
    backoff_remaining_ = next_backoff(cw_.value(), backoff_rng_);
    attempt_backoff_ = backoff_remaining_;
    state_ = State::defer;
    try_difs();
  }

  void respond(FrameKind kind, const Frame& to) {
    Frame r;
    r.kind = kind;
    r.src = self_;
    r.dst = to.src;
    r.bssid = to.bssid;
    responding_ = true;
    const std::size_t octets = kind == FrameKind::ack ? params_.ack_octets : params_.cts_octets;
    scheduler_.schedule_in(medium_.params().sifs, node_, kind == FrameKind::ack ? "mac.ack" : "mac.cts",
                           [this, r, octets] {
                             if (medium_.transmitting(node_)) {
                               responding_ = false;
                               return;
                             }
                             medium_.transmit(node_, r, frame_airtime(octets, medium_.params()));
                           });
  }

  void finish_current(TxStatus status) {
    Pending p = std::move(queue_.front());
    queue_.pop_front();
    const bool broadcast = p.frame.dst.is_broadcast();
    switch (status) {
      case TxStatus::acked: ++ledger_.delivered; break;
      case TxStatus::gave_up: ++ledger_.retry_exhausted; break;
      case TxStatus::sent_no_ack_expected:
        if (last_report_.accepted > 0) ++ledger_.delivered;
        else if (last_report_.filtered > 0) ++ledger_.filtered;
        else ++ledger_.collided;
        break;
    }
    if (!broadcast) cw_.reset();
    TxCompletion c;
    c.seq = p.frame.seq;
    c.kind = p.frame.kind;
    c.dst = p.frame.dst;
    c.status = status;
    c.attempts = retries_ + (status == TxStatus::gave_up ? 0 : 1);
    c.payload_len = p.frame.payload_len;
    c.head_of_queue = head_of_queue_;
    c.done = scheduler_.now();
    c.last_report = broadcast ? last_report_ : TxReport{};
    c.packet = p.frame.packet;
    last_report_ = TxReport{};
    state_ = State::idle;
    if (hooks_.complete) hooks_.complete(c);
    if (p.done) p.done(c);
    if (state_ == State::idle && !queue_.empty()) start_access();
  }

  NodeId node_;
  MacAddress self_;
  Scheduler& scheduler_;
  Medium& medium_;
  MacParams params_;
  ContentionWindow cw_;
  RngStream backoff_rng_;
  StationMode mode_;
  JoinPolicy join_policy_;
  MacHooks hooks_;
  FrameLedger ledger_;

  State state_ = State::idle;
  std::deque<Pending> queue_;
  EventHandle timer_;
  bool responding_ = false;
  int retries_ = 0;
  int backoff_remaining_ = 0;
  int attempt_backoff_ = 0;
  SimTime backoff_started_{0};
  SimTime head_of_queue_{0};
  TxReport last_report_;
  std::uint64_t next_seq_ = 0;
  std::map<std::uint64_t, std::uint64_t> last_rx_seq_;
};

}  // namespace wavesim
