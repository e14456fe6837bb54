#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "knock/gf2.hpp"

namespace knock {

enum class Label : std::uint8_t { no_conflict, conflict };

struct TraceRecord {
  BitVector a;
  BitVector b;
  std::optional<std::uint32_t> latency;
  std::optional<Label> label;

  BitVector difference() const { return a ^ b; }
  bool is_conflict() const { return label == Label::conflict; }
  bool operator==(const TraceRecord&) const = default;
};

struct Trace {
  unsigned width = 0;
  std::vector<TraceRecord> records;

  bool operator==(const Trace&) const = default;
};

// File format:
//   # knock-trace v1 width=<n>
//   addr_a,addr_b,latency[,label]
// Addresses are 0x-hex, latency decimal cycles (may be empty), label C or N.
// Further lines starting with '#' and blank lines are ignored.
Trace read_trace(std::istream& in, const std::string& source = "<stream>");
Trace read_trace(const std::string& path);
void write_trace(const Trace& trace, std::ostream& out);
void write_trace(const Trace& trace, const std::string& path);

struct ThresholdOptions {
  // A split is accepted as two distributions when the class means are at least
  // this many pooled standard deviations apart.
  double min_separation = 5.0;
  double min_class_fraction = 0.0;
  std::size_t min_class_count = 10;
  // Floor on the reported between/total variance ratio.
  double min_score = 0.0;
  std::size_t min_samples = 100;
};

struct ThresholdReport {
  double threshold = 0;  // conflict iff latency > threshold
  double low_mode = 0;
  double high_mode = 0;
  double low_mean = 0;
  double high_mean = 0;
  double separation_score = 0;  // between-class / total variance
  double separation = 0;        // (high_mean - low_mean) / pooled std
  double low_fraction = 0;
  std::size_t samples = 0;
  bool bimodal = false;
};

struct HistogramBin {
  double lower;
  std::size_t count;
};

/// Integer-binned latency histogram (bin width 1 cycle, widened only for
/// very large ranges).
std::vector<HistogramBin> latency_histogram(std::span<const std::uint32_t> latencies);
void write_histogram(std::span<const std::uint32_t> latencies, std::ostream& out);

/// Best two-class split without the bimodality verdict turning into an error.
ThresholdReport analyze_threshold(std::span<const std::uint32_t> latencies,
                                  const ThresholdOptions& opts = {});
/// Throws NoBimodalDistribution when the latencies form a single population.
ThresholdReport find_threshold(std::span<const std::uint32_t> latencies,
                               const ThresholdOptions& opts = {});

std::vector<std::uint32_t> latencies_of(const Trace& trace);

/// label = conflict iff latency > threshold. Records that already carry a
/// label keep it unless `relabel` is set.
Trace classify(const Trace& trace, double threshold, bool relabel = false);

}  // namespace knock
