#pragma once

// Metric series, incremental aggregates, windowed rates and CSV export.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "wavesim/engine.hpp"

namespace wavesim {

enum class Series : std::uint8_t {
  wlan_throughput_bps,
  wlan_delay_s,
  aodv_discovery_time_s,
  h323_setup_time_s,
  aodv_sent_pps,
  aodv_received_pps,
  voice_e2e_delay_s,
  pkts_tx_pps,
  pkts_rx_pps,
  ftp_response_s,
};

struct SeriesInfo {
  Series id;
  std::string_view name;
  std::string_view unit;
};

inline constexpr std::array<SeriesInfo, 10> kSeriesCatalog{{
    {Series::wlan_throughput_bps, "wlan_throughput_bps", "bps"},
    {Series::wlan_delay_s, "wlan_delay_s", "s"},
    {Series::aodv_discovery_time_s, "aodv_discovery_time_s", "s"},
    {Series::h323_setup_time_s, "h323_setup_time_s", "s"},
    {Series::aodv_sent_pps, "aodv_sent_pps", "pps"},
    {Series::aodv_received_pps, "aodv_received_pps", "pps"},
    {Series::voice_e2e_delay_s, "voice_e2e_delay_s", "s"},
    {Series::pkts_tx_pps, "pkts_tx_pps", "pps"},
    {Series::pkts_rx_pps, "pkts_rx_pps", "pps"},
    {Series::ftp_response_s, "ftp_response_s", "s"},
}};

inline const SeriesInfo& info(Series s) { return kSeriesCatalog[static_cast<std::size_t>(s)]; }

inline std::optional<Series> series_from_name(std::string_view name) {
  for (const auto& i : kSeriesCatalog)
    if (i.name == name) return i.id;
  return std::nullopt;
}

struct MetricSample {
  SimTime t{0};
  double value = 0.0;
};

struct Aggregate {
  std::uint64_t count = 0;
  double sum = 0.0;
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  void add(double v) {
    ++count;
    sum += v;
    min = std::min(min, v);
    max = std::max(max, v);
  }
  double mean() const { return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN(); }
};

class MetricsRecorder {
 public:
  /// Marks a series as applicable to the run; only enabled series are exported.
  void enable(Series s) { slot(s).enabled = true; }
  bool enabled(Series s) const { return slots_[index(s)].enabled; }

  void record(Series s, SimTime t, double value) {
    Slot& sl = slot(s);
    if (!sl.samples.empty() && t < sl.samples.back().t) {
      throw std::invalid_argument("metrics: sample at t=" + std::to_string(t.count()) + " us precedes the last " +
                                  std::string(info(s).name) + " sample at " +
                                  std::to_string(sl.samples.back().t.count()) + " us");
    }
    sl.enabled = true;
    sl.samples.push_back({t, value});
    sl.agg.add(value);
  }

  void record(std::string_view name, SimTime t, double value) {
    const auto s = series_from_name(name);
    if (!s) throw std::invalid_argument("metrics: unknown series '" + std::string(name) + "'");
    record(*s, t, value);
  }

  const std::vector<MetricSample>& samples(Series s) const { return slots_[index(s)].samples; }
  const Aggregate& aggregate(Series s) const { return slots_[index(s)].agg; }
  double mean(Series s) const { return aggregate(s).mean(); }

 private:
  struct Slot {
    bool enabled = false;
    std::vector<MetricSample> samples;
    Aggregate agg;
  };
  static std::size_t index(Series s) { return static_cast<std::size_t>(s); }
  Slot& slot(Series s) { return slots_[index(s)]; }

  std::array<Slot, kSeriesCatalog.size()> slots_;
};

struct WeightedEvent {
  SimTime t{0};
  double weight = 1.0;
};

/// Sum of weights per consecutive window [k*w, (k+1)*w) divided by the window
/// length in seconds; one sample per window, stamped at the window start.
/// The last window may be partial; events at exactly t_end fall into it.
inline std::vector<MetricSample> windowed_rate(const std::vector<WeightedEvent>& events, SimTime window,
                                               SimTime t_end) {
  if (window.count() <= 0) throw std::invalid_argument("windowed_rate: window must be > 0");
  if (t_end.count() < 0) throw std::invalid_argument("windowed_rate: t_end must be >= 0");
  const std::int64_t n = std::max<std::int64_t>(1, (t_end.count() + window.count() - 1) / window.count());
  std::vector<double> sums(static_cast<std::size_t>(n), 0.0);
  for (const auto& e : events) {
    if (e.t < SimTime{0} || e.t > t_end)
      throw std::invalid_argument("windowed_rate: event at " + std::to_string(e.t.count()) +
                                  " us lies outside [0, t_end]");
    const std::int64_t k = std::min(n - 1, e.t.count() / window.count());
    sums[static_cast<std::size_t>(k)] += e.weight;
  }
  std::vector<MetricSample> out;
  out.reserve(sums.size());
  const double w = to_seconds(window);
  for (std::int64_t k = 0; k < n; ++k) out.push_back({window * k, sums[static_cast<std::size_t>(k)] / w});
  return out;
}

inline std::vector<MetricSample> windowed_rate(const std::vector<SimTime>& events, SimTime window, SimTime t_end) {
  std::vector<WeightedEvent> w;
  w.reserve(events.size());
  for (SimTime t : events) w.push_back({t, 1.0});
  return windowed_rate(w, window, t_end);
}

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

class ExportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes `<series>.csv` for each enabled series plus `summary.csv`.
inline void export_csv(const MetricsRecorder& rec, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ExportError("cannot create output directory " + dir.string() + ": " + ec.message());
  auto open = [&](const std::string& file) {
    std::ofstream out(dir / file, std::ios::binary | std::ios::trunc);
    if (!out) throw ExportError("cannot write " + (dir / file).string());
    return out;
  };
  std::ofstream summary = open("summary.csv");
  summary << "series,unit,count,mean,min,max\n";
  for (const auto& si : kSeriesCatalog) {
    if (!rec.enabled(si.id)) continue;
    std::ofstream out = open(std::string(si.name) + ".csv");
    out << "t_us,value,unit\n";
    for (const auto& s : rec.samples(si.id))
      out << s.t.count() << ',' << format_double(s.value) << ',' << si.unit << '\n';
    const Aggregate& a = rec.aggregate(si.id);
    summary << si.name << ',' << si.unit << ',' << a.count << ',';
    if (a.count) summary << format_double(a.mean()) << ',' << format_double(a.min) << ',' << format_double(a.max);
    else summary << ",,";
    summary << '\n';
    if (!out) throw ExportError("write failed for " + (dir / (std::string(si.name) + ".csv")).string());
  }
  if (!summary) throw ExportError("write failed for " + (dir / "summary.csv").string());
}

}  // namespace wavesim
