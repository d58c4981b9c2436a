#pragma once

// Deterministic discrete-event core: virtual clock, ordered event queue,
// counter-based named random streams.

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace wavesim {

/// Microseconds since simulation start.
using SimTime = std::chrono::duration<std::int64_t, std::micro>;

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

inline constexpr SimTime from_seconds(double s) {
  // round half away from zero
  const double us = s * 1e6;
  return SimTime{static_cast<std::int64_t>(us < 0 ? us - 0.5 : us + 0.5)};
}
inline constexpr SimTime from_millis(double ms) { return from_seconds(ms / 1e3); }
inline constexpr double to_seconds(SimTime t) { return static_cast<double>(t.count()) / 1e6; }

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// Counter-based generator: output i is splitmix64(key + (i+1)*gamma) where
/// key mixes the run seed with the stream name. The algorithm is pinned so a
/// (seed, name, call sequence) triple reproduces on every platform.
class RngStream {
 public:
  RngStream() = default;
  RngStream(std::uint64_t seed, std::string name)
      : name_(std::move(name)),
        seed_(seed),
        key_(detail::splitmix64_mix(seed ^ detail::splitmix64_mix(detail::fnv1a64(name_)))) {}

  std::uint64_t next_u64() {
    ++counter_;
    return detail::splitmix64_mix(key_ + counter_ * kGamma);
  }

  /// Uniform in [0, 1) with 53 bits of precision.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  const std::string& name() const { return name_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  std::string name_;
  std::uint64_t seed_ = 0;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// Uniform integer over the closed range [lo, hi], unbiased (rejection).
inline std::int64_t rng_uniform(RngStream& stream, std::int64_t lo, std::int64_t hi) {
  if (lo > hi) {
    throw std::invalid_argument("rng_uniform: lo > hi (" + std::to_string(lo) + " > " +
                                std::to_string(hi) + ")");
  }
  const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(stream.next_u64());  // full 64-bit range
  const std::uint64_t threshold = (0 - span) % span;
  for (;;) {
    const std::uint64_t r = stream.next_u64();
    if (r >= threshold) return lo + static_cast<std::int64_t>(r % span);
  }
}

/// Hands out named streams derived from one run seed.
class RngFactory {
 public:
  explicit RngFactory(std::uint64_t seed) : seed_(seed) {}
  RngStream stream(std::string_view purpose, NodeId node) const {
    return RngStream(seed_, std::string(purpose) + "/node" + std::to_string(node));
  }
  RngStream stream(std::string_view name) const { return RngStream(seed_, std::string(name)); }
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Event queue
// ---------------------------------------------------------------------------

struct EventHandle {
  SimTime fire_at{0};
  std::uint64_t seq = 0;
  bool valid() const { return seq != 0; }
};

struct RunSummary {
  std::uint64_t events_processed = 0;
  SimTime final_clock{0};
};

/// Observer invoked before each delivered event; used for trace hashing.
using TraceHook = std::function<void(SimTime, std::uint64_t seq, NodeId, std::string_view kind)>;

class Scheduler {
 public:
  using Handler = std::function<void()>;

  SimTime now() const { return now_; }

  EventHandle schedule(SimTime fire_at, NodeId target, std::string kind, Handler handler) {
    if (fire_at < now_) {
      throw SimulationError("schedule: event '" + kind + "' at t=" +
                            std::to_string(fire_at.count()) + "us is before current clock t=" +
                            std::to_string(now_.count()) + "us");
    }
    const std::uint64_t seq = ++next_seq_;
    queue_.emplace(Key{fire_at, seq}, Event{target, std::move(kind), std::move(handler)});
    return EventHandle{fire_at, seq};
  }

  EventHandle schedule_in(SimTime delay, NodeId target, std::string kind, Handler handler) {
    return schedule(now_ + delay, target, std::move(kind), std::move(handler));
  }

  /// Returns true if the event was still pending.
  bool cancel(EventHandle& handle) {
    if (!handle.valid()) return false;
    const bool erased = queue_.erase(Key{handle.fire_at, handle.seq}) > 0;
    handle = EventHandle{};
    return erased;
  }

  bool pending(const EventHandle& handle) const {
    return handle.valid() && queue_.count(Key{handle.fire_at, handle.seq}) > 0;
  }

  std::size_t queued() const { return queue_.size(); }

  RunSummary run_until(SimTime t_end) {
    RunSummary summary;
    while (!queue_.empty()) {
      auto it = queue_.begin();
      if (it->first.fire_at > t_end) break;
      const Key key = it->first;
      Event ev = std::move(it->second);
      queue_.erase(it);
      now_ = key.fire_at;
      if (trace_) trace_(now_, key.seq, ev.target, ev.kind);
      try {
        ev.handler();
      } catch (const std::exception& e) {
        throw SimulationError("event '" + ev.kind + "' (node " + node_label(ev.target) +
                              ", t=" + std::to_string(now_.count()) + "us) failed: " + e.what());
      }
      ++summary.events_processed;
    }
    if (t_end > now_) now_ = t_end;
    summary.final_clock = now_;
    return summary;
  }

  void set_trace(TraceHook hook) { trace_ = std::move(hook); }

 private:
  struct Key {
    SimTime fire_at;
    std::uint64_t seq;
    bool operator<(const Key& o) const {
      return fire_at != o.fire_at ? fire_at < o.fire_at : seq < o.seq;
    }
  };
  struct Event {
    NodeId target;
    std::string kind;
    Handler handler;
  };

  static std::string node_label(NodeId id) {
    return id == kNoNode ? std::string("-") : std::to_string(id);
  }

  SimTime now_{0};
  std::uint64_t next_seq_ = 0;
  std::map<Key, Event> queue_;
  TraceHook trace_;
};

}  // namespace wavesim
