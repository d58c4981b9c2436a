#pragma once

// Network-layer packets carried inside MAC data frames.

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "wavesim/engine.hpp"

namespace wavesim {

struct RreqMessage {
  NodeId originator = kNoNode;
  std::uint32_t originator_seq = 0;
  std::uint32_t rreq_id = 0;
  NodeId dest = kNoNode;
  std::uint32_t dest_seq = 0;
  bool dest_seq_known = false;
  std::uint32_t hop_count = 0;
  int ttl = 0;
};

/// Also used for hello messages (dest == sender, hop_count 0).
struct RrepMessage {
  NodeId dest = kNoNode;
  std::uint32_t dest_seq = 0;
  std::uint32_t hop_count = 0;
  NodeId originator = kNoNode;
  SimTime lifetime{0};
  bool hello = false;
};

struct RerrMessage {
  struct Unreachable {
    NodeId dest;
    std::uint32_t dest_seq;
  };
  std::vector<Unreachable> unreachable;
};

enum class AppKind : std::uint8_t { voice, h323, ftp };

enum class H323Message : std::uint8_t { rrq, rcf, arq, acf, setup, connect };

enum class FtpMessage : std::uint8_t { request, segment };

struct AppPayload {
  AppKind app = AppKind::voice;
  std::uint64_t flow_id = 0;
  std::uint32_t seq = 0;
  /// Capture/creation instant used for end-to-end delay.
  SimTime origin_time{0};
  H323Message h323 = H323Message::rrq;
  FtpMessage ftp = FtpMessage::request;
  bool last_segment = false;
};

using PacketBody = std::variant<AppPayload, RreqMessage, RrepMessage, RerrMessage>;

struct NetPacket {
  std::uint64_t uid = 0;
  NodeId src = kNoNode;
  NodeId dst = kNoNode;  // kNoNode for link-local broadcast
  std::size_t size_octets = 0;
  SimTime created{0};
  PacketBody body;

  bool is_control() const { return !std::holds_alternative<AppPayload>(body); }
};

using PacketPtr = std::shared_ptr<const NetPacket>;

}  // namespace wavesim
