#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "wavesim/packet.hpp"

namespace wavesim {

/// DSRC channel number: even values 172..184.
class ChannelId {
 public:
  static constexpr std::array<int, 7> kLegal{172, 174, 176, 178, 180, 182, 184};
  static constexpr int kControlChannel = 178;

  constexpr ChannelId() = default;
  explicit ChannelId(int number) : number_(number) {
    if (!is_legal(number)) {
      throw std::invalid_argument("channel " + std::to_string(number) +
                                  " is not a DSRC channel (even 172..184)");
    }
  }
  static constexpr bool is_legal(int n) {
    return std::find(kLegal.begin(), kLegal.end(), n) != kLegal.end();
  }
  constexpr int number() const { return number_; }
  friend constexpr bool operator==(ChannelId, ChannelId) = default;

 private:
  int number_ = kControlChannel;
};

/// 48-bit IEEE address.
class MacAddress {
 public:
  static constexpr std::uint64_t kMask = 0xFFFF'FFFF'FFFFULL;

  constexpr MacAddress() = default;
  explicit constexpr MacAddress(std::uint64_t value) : value_(value & kMask) {}

  static constexpr MacAddress broadcast() { return MacAddress(kMask); }
  /// Locally administered unicast address derived from a node id.
  static constexpr MacAddress for_node(NodeId id) { return MacAddress(0x0200'0000'0000ULL | id); }

  constexpr std::uint64_t value() const { return value_; }
  constexpr bool is_broadcast() const { return value_ == kMask; }
  constexpr NodeId node() const { return static_cast<NodeId>(value_ & 0xFFFF'FFFFULL); }
  friend constexpr auto operator<=>(MacAddress, MacAddress) = default;

  std::string str() const {
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x",
                  unsigned(value_ >> 40 & 0xff), unsigned(value_ >> 32 & 0xff),
                  unsigned(value_ >> 24 & 0xff), unsigned(value_ >> 16 & 0xff),
                  unsigned(value_ >> 8 & 0xff), unsigned(value_ & 0xff));
    return buf;
  }

 private:
  std::uint64_t value_ = 0;
};

/// BSS identifier; all-ones is the WAVE wildcard.
class Bssid {
 public:
  constexpr Bssid() : value_(MacAddress::kMask) {}
  explicit constexpr Bssid(std::uint64_t value) : value_(value & MacAddress::kMask) {}
  static constexpr Bssid wildcard() { return Bssid(); }

  constexpr bool is_wildcard() const { return value_ == MacAddress::kMask; }
  constexpr std::uint64_t value() const { return value_; }
  friend constexpr auto operator<=>(Bssid, Bssid) = default;

 private:
  std::uint64_t value_;
};

enum class FrameKind : std::uint8_t { data, ack, rts, cts, wave_beacon };

inline const char* to_string(FrameKind k) {
  switch (k) {
    case FrameKind::data: return "data";
    case FrameKind::ack: return "ack";
    case FrameKind::rts: return "rts";
    case FrameKind::cts: return "cts";
    case FrameKind::wave_beacon: return "wave_beacon";
  }
  return "?";
}

struct Frame {
  MacAddress src;
  MacAddress dst = MacAddress::broadcast();
  Bssid bssid = Bssid::wildcard();
  bool to_ds = false;
  bool from_ds = false;
  FrameKind kind = FrameKind::data;
  std::size_t payload_len = 0;
  ChannelId channel;
  /// Per-sender MSDU sequence number (retransmissions keep it).
  std::uint64_t seq = 0;
  /// Upper-layer packet for data frames.
  PacketPtr packet;
  /// Management body (wave_beacon advertisement).
  std::vector<std::uint8_t> body;

  bool is_control() const {
    return kind == FrameKind::ack || kind == FrameKind::rts || kind == FrameKind::cts;
  }
};

}  // namespace wavesim
