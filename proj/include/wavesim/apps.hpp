#pragma once

// Application traffic: H.323-style call setup followed by a constant-rate
// voice stream, and stop-and-wait FTP downloads.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wavesim/aodv.hpp"
#include "wavesim/engine.hpp"
#include "wavesim/metrics.hpp"
#include "wavesim/packet.hpp"

namespace wavesim {

struct VoiceParams {
  std::int64_t codec_rate_bps = 64'000;
  SimTime frame_interval = from_millis(20);
  /// Stamp each frame with the capture time of its first sample, so the
  /// end-to-end delay includes one frame interval of packetization.
  bool include_packetization_delay = true;

  std::size_t payload_octets() const {
    return static_cast<std::size_t>(codec_rate_bps * frame_interval.count() / 8'000'000);
  }
  void validate() const {
    if (codec_rate_bps <= 0) throw std::invalid_argument("voice.codec_rate_bps must be > 0");
    if (frame_interval.count() <= 0) throw std::invalid_argument("voice.frame_interval_ms must be > 0");
    if ((codec_rate_bps * frame_interval.count()) % 8'000'000 != 0)
      throw std::invalid_argument("voice.codec_rate_bps * voice.frame_interval_ms must be a whole number of octets");
  }
};

struct H323Params {
  std::size_t message_octets = 64;
  SimTime response_timeout = from_seconds(3.0);

  void validate() const {
    if (response_timeout.count() <= 0) throw std::invalid_argument("h323.response_timeout_s must be > 0");
  }
};

struct FtpParams {
  std::size_t file_size_octets = 100'000;
  std::size_t segment_octets = 1460;
  std::size_t request_octets = 64;
  SimTime session_timeout = from_seconds(30.0);

  std::size_t segment_count() const {
    return file_size_octets == 0 ? 1 : (file_size_octets + segment_octets - 1) / segment_octets;
  }
  void validate() const {
    if (segment_octets == 0) throw std::invalid_argument("ftp.segment_octets must be > 0");
    if (session_timeout.count() <= 0) throw std::invalid_argument("ftp.session_timeout_s must be > 0");
  }
};

/// How the application layer hands packets to the network.
class AppTransport {
 public:
  virtual ~AppTransport() = default;
  virtual void send_app(NodeId from, NodeId to, std::size_t octets, const AppPayload& payload,
                        std::function<void(SendStatus)> done) = 0;
};

enum class CallState : std::uint8_t { scheduled, registering, admitting, setting_up, streaming, ended, aborted };

inline const char* to_string(CallState s) {
  switch (s) {
    case CallState::scheduled: return "scheduled";
    case CallState::registering: return "registering";
    case CallState::admitting: return "admitting";
    case CallState::setting_up: return "setting_up";
    case CallState::streaming: return "streaming";
    case CallState::ended: return "ended";
    case CallState::aborted: return "aborted";
  }
  return "?";
}

struct VoiceCall {
  std::uint64_t id = 0;
  NodeId caller = kNoNode;
  NodeId callee = kNoNode;
  SimTime start{0};
  std::optional<SimTime> end;
  CallState state = CallState::scheduled;
  std::string abort_reason;

  SimTime rrq_sent{0};
  std::optional<SimTime> setup_time;
  /// One-way latency of each signaling message, in order.
  std::vector<SimTime> message_latencies;
  std::optional<SimTime> streaming_since;

  std::uint64_t frames_sent = 0;
  std::uint64_t frames_received = 0;
  std::uint64_t frames_lost = 0;
};

enum class FtpState : std::uint8_t { scheduled, requested, transferring, completed, failed };

inline const char* to_string(FtpState s) {
  switch (s) {
    case FtpState::scheduled: return "scheduled";
    case FtpState::requested: return "requested";
    case FtpState::transferring: return "transferring";
    case FtpState::completed: return "completed";
    case FtpState::failed: return "failed";
  }
  return "?";
}

struct FtpSession {
  std::uint64_t id = 0;
  NodeId client = kNoNode;
  NodeId server = kNoNode;
  std::size_t file_size = 0;
  std::size_t segment_size = 0;
  FtpState state = FtpState::scheduled;
  std::string failure_reason;
  SimTime request_time{0};
  std::optional<SimTime> completion_time;
  std::size_t segments_sent = 0;
  std::size_t delivered_octets = 0;

  std::size_t segment_count() const {
    return file_size == 0 ? 1 : (file_size + segment_size - 1) / segment_size;
  }
  std::size_t lost_octets() const { return state == FtpState::failed ? file_size - delivered_octets : 0; }
  std::optional<SimTime> response_time() const {
    if (!completion_time) return std::nullopt;
    return *completion_time - request_time;
  }
};

class AppLayer {
 public:
  AppLayer(Scheduler& scheduler, AppTransport& transport, MetricsRecorder* metrics, VoiceParams voice = {},
           H323Params h323 = {}, FtpParams ftp = {})
      : scheduler_(scheduler), transport_(transport), metrics_(metrics), voice_(voice), h323_(h323), ftp_(ftp) {
    voice_.validate();
    h323_.validate();
    ftp_.validate();
  }

  AppLayer(const AppLayer&) = delete;
  AppLayer& operator=(const AppLayer&) = delete;

  const VoiceParams& voice_params() const { return voice_; }
  const FtpParams& ftp_params() const { return ftp_; }

  /// Schedules signaling at `start`; streaming runs until `end` if given.
  std::uint64_t start_call(NodeId caller, NodeId callee, SimTime start, std::optional<SimTime> end = std::nullopt) {
    if (caller == callee) throw std::invalid_argument("voice call needs distinct caller and callee");
    const std::uint64_t id = ++next_flow_;
    VoiceCall& c = calls_[id];
    c.id = id;
    c.caller = caller;
    c.callee = callee;
    c.start = start;
    c.end = end;
    scheduler_.schedule(start, caller, "app.call_start", [this, id] {
      VoiceCall& call = calls_.at(id);
      call.state = CallState::registering;
      call.rrq_sent = scheduler_.now();
      send_signal(call, H323Message::rrq);
    });
    if (end) {
      scheduler_.schedule(*end, caller, "app.call_end", [this, id] {
        VoiceCall& call = calls_.at(id);
        if (call.state != CallState::aborted) call.state = CallState::ended;
        scheduler_.cancel(call_timers_[id]);
        scheduler_.cancel(voice_timers_[id]);
      });
    }
    return id;
  }

  /// Schedules one download of `file_size` octets from `server` to `client`.
  std::uint64_t start_ftp(NodeId client, NodeId server, SimTime at, std::optional<std::size_t> file_size = std::nullopt) {
    if (client == server) throw std::invalid_argument("ftp session needs distinct client and server");
    const std::uint64_t id = ++next_flow_;
    FtpSession& s = sessions_[id];
    s.id = id;
    s.client = client;
    s.server = server;
    s.file_size = file_size.value_or(ftp_.file_size_octets);
    s.segment_size = ftp_.segment_octets;
    scheduler_.schedule(at, client, "app.ftp_request", [this, id] { request_ftp(id); });
    return id;
  }

  /// Repeats downloads every `interval` from `first` before `until`;
  /// a tick is skipped while the previous download is still running.
  void start_ftp_series(NodeId client, NodeId server, SimTime first, SimTime interval, SimTime until) {
    if (interval.count() <= 0) throw std::invalid_argument("ftp.inter_request_s must be > 0");
    schedule_ftp_tick(client, server, first, interval, until, 0);
  }

  void on_deliver(NodeId at, const NetPacket& pkt) {
    const auto* app = std::get_if<AppPayload>(&pkt.body);
    if (!app) return;
    switch (app->app) {
      case AppKind::h323: on_signal(at, *app); break;
      case AppKind::voice: on_voice(at, *app); break;
      case AppKind::ftp: on_ftp(at, pkt, *app); break;
    }
  }

  /// Closes sessions still open at the end of the run.
  void finalize() {
    for (auto& [id, s] : sessions_) {
      if (s.state == FtpState::requested || s.state == FtpState::transferring) fail_ftp(s, "run ended");
    }
  }

  const std::map<std::uint64_t, VoiceCall>& calls() const { return calls_; }
  const std::map<std::uint64_t, FtpSession>& sessions() const { return sessions_; }
  const VoiceCall& call(std::uint64_t id) const { return calls_.at(id); }
  const FtpSession& session(std::uint64_t id) const { return sessions_.at(id); }

 private:
  static H323Message response_to(H323Message m) {
    switch (m) {
      case H323Message::rrq: return H323Message::rcf;
      case H323Message::arq: return H323Message::acf;
      case H323Message::setup: return H323Message::connect;
      default: throw std::logic_error("not an H.323 request");
    }
  }

  void record(Series s, double v) {
    if (metrics_) metrics_->record(s, scheduler_.now(), v);
  }

  void send_signal(VoiceCall& call, H323Message msg) {
    const bool request = msg == H323Message::rrq || msg == H323Message::arq || msg == H323Message::setup;
    const NodeId from = request ? call.caller : call.callee;
    const NodeId to = request ? call.callee : call.caller;
    AppPayload p;
    p.app = AppKind::h323;
    p.flow_id = call.id;
    p.h323 = msg;
    p.origin_time = scheduler_.now();
    const std::uint64_t id = call.id;
    if (request) {
      scheduler_.cancel(call_timers_[id]);
      call_timers_[id] = scheduler_.schedule_in(h323_.response_timeout, from, "app.h323_timeout",
                                                [this, id] { abort_call(calls_.at(id), "response timeout"); });
    }
    transport_.send_app(from, to, h323_.message_octets, p, [this, id](SendStatus st) {
      if (st != SendStatus::sent) abort_call(calls_.at(id), to_string(st));
    });
  }

  void abort_call(VoiceCall& call, const std::string& reason) {
    if (call.state == CallState::streaming || call.state == CallState::ended ||
        call.state == CallState::aborted)
      return;
    call.state = CallState::aborted;
    call.abort_reason = reason;
    scheduler_.cancel(call_timers_[call.id]);
  }

  void on_signal(NodeId at, const AppPayload& app) {
    auto it = calls_.find(app.flow_id);
    if (it == calls_.end()) return;
    VoiceCall& call = it->second;
    if (call.state == CallState::aborted || call.state == CallState::ended) return;
    call.message_latencies.push_back(scheduler_.now() - app.origin_time);
    if (at == call.callee) {
      send_signal(call, response_to(app.h323));
      return;
    }
    switch (app.h323) {
      case H323Message::rcf:
        if (call.state != CallState::registering) return;
        call.state = CallState::admitting;
        send_signal(call, H323Message::arq);
        break;
      case H323Message::acf:
        if (call.state != CallState::admitting) return;
        call.state = CallState::setting_up;
        send_signal(call, H323Message::setup);
        break;
      case H323Message::connect: {
        if (call.state != CallState::setting_up) return;
        scheduler_.cancel(call_timers_[call.id]);
        call.state = CallState::streaming;
        call.setup_time = scheduler_.now() - call.rrq_sent;
        call.streaming_since = scheduler_.now();
        record(Series::h323_setup_time_s, to_seconds(*call.setup_time));
        schedule_voice(call.id, scheduler_.now() + voice_.frame_interval);
        break;
      }
      default: break;
    }
  }

  void schedule_voice(std::uint64_t id, SimTime at) {
    const VoiceCall& call = calls_.at(id);
    if (call.end && at > *call.end) return;
    voice_timers_[id] = scheduler_.schedule(at, call.caller, "app.voice_frame", [this, id] {
      VoiceCall& c = calls_.at(id);
      if (c.state != CallState::streaming) return;
      AppPayload p;
      p.app = AppKind::voice;
      p.flow_id = id;
      p.seq = static_cast<std::uint32_t>(++c.frames_sent);
      p.origin_time = voice_.include_packetization_delay ? scheduler_.now() - voice_.frame_interval : scheduler_.now();
      transport_.send_app(c.caller, c.callee, voice_.payload_octets(), p, [this, id](SendStatus st) {
        if (st != SendStatus::sent) ++calls_.at(id).frames_lost;
      });
      schedule_voice(id, scheduler_.now() + voice_.frame_interval);
    });
  }

  void on_voice(NodeId at, const AppPayload& app) {
    auto it = calls_.find(app.flow_id);
    if (it == calls_.end() || at != it->second.callee) return;
    ++it->second.frames_received;
    record(Series::voice_e2e_delay_s, to_seconds(scheduler_.now() - app.origin_time));
  }

  void schedule_ftp_tick(NodeId client, NodeId server, SimTime at, SimTime interval, SimTime until, std::uint64_t last) {
    if (at >= until) return;
    scheduler_.schedule(at, client, "app.ftp_tick", [=, this] {
      std::uint64_t current = last;
      const bool busy = last != 0 && (sessions_.at(last).state == FtpState::requested ||
                                      sessions_.at(last).state == FtpState::transferring);
      if (!busy) current = start_ftp(client, server, scheduler_.now());
      schedule_ftp_tick(client, server, at + interval, interval, until, current);
    });
  }

  void request_ftp(std::uint64_t id) {
    FtpSession& s = sessions_.at(id);
    s.state = FtpState::requested;
    s.request_time = scheduler_.now();
    ftp_timers_[id] = scheduler_.schedule_in(ftp_.session_timeout, s.client, "app.ftp_timeout",
                                             [this, id] { fail_ftp(sessions_.at(id), "session timeout"); });
    AppPayload p;
    p.app = AppKind::ftp;
    p.flow_id = id;
    p.ftp = FtpMessage::request;
    p.origin_time = scheduler_.now();
    transport_.send_app(s.client, s.server, ftp_.request_octets, p, [this, id](SendStatus st) {
      if (st != SendStatus::sent) fail_ftp(sessions_.at(id), std::string("request ") + to_string(st));
    });
  }

  void fail_ftp(FtpSession& s, const std::string& reason) {
    if (s.state == FtpState::completed || s.state == FtpState::failed) return;
    s.state = FtpState::failed;
    s.failure_reason = reason;
    scheduler_.cancel(ftp_timers_[s.id]);
  }

  void send_segment(std::uint64_t id) {
    FtpSession& s = sessions_.at(id);
    if (s.state != FtpState::transferring) return;
    const std::size_t i = s.segments_sent;
    const std::size_t offset = i * s.segment_size;
    const std::size_t octets = s.file_size == 0 ? 0 : std::min(s.segment_size, s.file_size - offset);
    ++s.segments_sent;
    AppPayload p;
    p.app = AppKind::ftp;
    p.flow_id = id;
    p.ftp = FtpMessage::segment;
    p.seq = static_cast<std::uint32_t>(i);
    p.last_segment = i + 1 == s.segment_count();
    p.origin_time = scheduler_.now();
    const bool last = p.last_segment;
    transport_.send_app(s.server, s.client, octets, p, [this, id, last](SendStatus st) {
      if (st != SendStatus::sent) {
        fail_ftp(sessions_.at(id), std::string("segment ") + to_string(st));
        return;
      }
      if (!last) send_segment(id);
    });
  }

  void on_ftp(NodeId at, const NetPacket& pkt, const AppPayload& app) {
    auto it = sessions_.find(app.flow_id);
    if (it == sessions_.end()) return;
    FtpSession& s = it->second;
    if (app.ftp == FtpMessage::request) {
      if (at != s.server || s.state != FtpState::requested) return;
      s.state = FtpState::transferring;
      send_segment(s.id);
      return;
    }
    if (at != s.client || s.state != FtpState::transferring) return;
    s.delivered_octets += pkt.size_octets;
    if (app.last_segment) {
      s.state = FtpState::completed;
      s.completion_time = scheduler_.now();
      scheduler_.cancel(ftp_timers_[s.id]);
      record(Series::ftp_response_s, to_seconds(*s.response_time()));
    }
  }

  Scheduler& scheduler_;
  AppTransport& transport_;
  MetricsRecorder* metrics_;
  VoiceParams voice_;
  H323Params h323_;
  FtpParams ftp_;
  std::uint64_t next_flow_ = 0;
  std::map<std::uint64_t, VoiceCall> calls_;
  std::map<std::uint64_t, FtpSession> sessions_;
  std::map<std::uint64_t, EventHandle> call_timers_;
  std::map<std::uint64_t, EventHandle> voice_timers_;
  std::map<std::uint64_t, EventHandle> ftp_timers_;
};

}  // namespace wavesim
