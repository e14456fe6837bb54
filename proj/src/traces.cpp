#include "knock/traces.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "knock/error.hpp"

namespace knock {

namespace {

constexpr std::string_view kHeader = "# knock-trace v1 width=";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& what) {
  throw Error(ErrorKind::Parse, source + ":" + std::to_string(line) + ": " + what);
}

TraceRecord parse_record(std::string_view line, unsigned width, const std::string& source,
                         std::size_t lineno) {
  std::string_view fields[5];
  std::size_t count = 0;
  while (true) {
    const auto comma = line.find(',');
    if (count == 4) parse_fail(source, lineno, "too many fields");
    fields[count++] = trim(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  if (count < 3) parse_fail(source, lineno, "expected addr_a,addr_b,latency[,label]");

  auto address = [&](std::string_view text) {
    std::uint64_t w;
    try {
      w = parse_hex(text);
    } catch (const Error& e) {
      parse_fail(source, lineno, e.what());
    }
    if ((w & ~low_mask(width)) != 0) {
      throw Error(ErrorKind::WidthMismatch, source + ":" + std::to_string(lineno) + ": address " +
                                                std::string(text) + " exceeds width " +
                                                std::to_string(width));
    }
    return BitVector(width, w);
  };

  TraceRecord rec{address(fields[0]), address(fields[1]), std::nullopt, std::nullopt};
  if (!fields[2].empty()) {
    std::uint32_t lat = 0;
    auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), lat);
    if (ec != std::errc() || ptr != fields[2].data() + fields[2].size()) {
      parse_fail(source, lineno, "malformed latency '" + std::string(fields[2]) + "'");
    }
    rec.latency = lat;
  }
  if (count == 4 && !fields[3].empty()) {
    if (fields[3] == "C") {
      rec.label = Label::conflict;
    } else if (fields[3] == "N") {
      rec.label = Label::no_conflict;
    } else {
      parse_fail(source, lineno, "label must be C or N, got '" + std::string(fields[3]) + "'");
    }
  }
  return rec;
}

}  // namespace

Trace read_trace(std::istream& in, const std::string& source) {
  Trace trace;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = trim(line);
    if (!have_header) {
      if (view.substr(0, kHeader.size()) != kHeader) {
        parse_fail(source, lineno, "missing '# knock-trace v1 width=<n>' header");
      }
      const auto num = view.substr(kHeader.size());
      unsigned width = 0;
      auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), width);
      if (ec != std::errc() || ptr != num.data() + num.size() || width == 0 || width > kMaxWidth) {
        parse_fail(source, lineno, "bad width in header");
      }
      trace.width = width;
      have_header = true;
      continue;
    }
    if (view.empty() || view.front() == '#') continue;
    auto rec = parse_record(view, trace.width, source, lineno);
    trace.records.push_back(std::move(rec));
  }
  if (!have_header) parse_fail(source, lineno, "empty trace file");
  return trace;
}

Trace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open trace " + path);
  return read_trace(in, path);
}

void write_trace(const Trace& trace, std::ostream& out) {
  out << kHeader << trace.width << '\n';
  std::string buf;
  for (const auto& r : trace.records) {
    if (r.a.width() != trace.width || r.b.width() != trace.width) {
      throw Error(ErrorKind::WidthMismatch, "record width differs from trace width");
    }
    buf.clear();
    buf += r.a.to_hex();
    buf += ',';
    buf += r.b.to_hex();
    buf += ',';
    if (r.latency) buf += std::to_string(*r.latency);
    if (r.label) {
      buf += ',';
      buf += *r.label == Label::conflict ? 'C' : 'N';
    }
    buf += '\n';
    out << buf;
  }
}

void write_trace(const Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write trace " + path);
  write_trace(trace, out);
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path);
}

// ------------------------------------------------------------- thresholding

std::vector<HistogramBin> latency_histogram(std::span<const std::uint32_t> latencies) {
  if (latencies.empty()) return {};
  const auto [lo_it, hi_it] = std::minmax_element(latencies.begin(), latencies.end());
  const std::uint64_t lo = *lo_it;
  const std::uint64_t range = std::uint64_t{*hi_it} - lo + 1;
  constexpr std::uint64_t kMaxBins = std::uint64_t{1} << 22;
  const std::uint64_t bw = (range + kMaxBins - 1) / kMaxBins;
  std::vector<std::size_t> counts((range + bw - 1) / bw, 0);
  for (auto v : latencies) ++counts[(v - lo) / bw];
  std::vector<HistogramBin> bins;
  bins.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    bins.push_back({static_cast<double>(lo + i * bw), counts[i]});
  }
  return bins;
}

void write_histogram(std::span<const std::uint32_t> latencies, std::ostream& out) {
  out << "# latency count\n";
  for (const auto& b : latency_histogram(latencies)) {
    if (b.count != 0) out << static_cast<std::uint64_t>(b.lower) << ' ' << b.count << '\n';
  }
}

ThresholdReport analyze_threshold(std::span<const std::uint32_t> latencies,
                                  const ThresholdOptions& opts) {
  if (latencies.size() < opts.min_samples) {
    throw Error(ErrorKind::InsufficientData,
                "threshold detection needs at least " + std::to_string(opts.min_samples) +
                    " latency samples, got " + std::to_string(latencies.size()));
  }
  ThresholdReport rep;
  rep.samples = latencies.size();

  // Sorted distinct values with counts; every split point lies between two
  // consecutive distinct values.
  std::vector<std::uint32_t> sorted(latencies.begin(), latencies.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> value;
  std::vector<double> count;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    value.push_back(sorted[i]);
    count.push_back(static_cast<double>(j - i));
    i = j;
  }
  const double total = static_cast<double>(sorted.size());
  double sum_all = 0, sq_all = 0;
  for (std::size_t i = 0; i < value.size(); ++i) {
    sum_all += count[i] * value[i];
    sq_all += count[i] * value[i] * value[i];
  }
  const double mean_all = sum_all / total;
  const double var_all = std::max(0.0, sq_all / total - mean_all * mean_all);

  if (value.size() < 2) {
    rep.threshold = value.front();
    rep.low_mode = rep.high_mode = rep.low_mean = rep.high_mean = value.front();
    rep.low_fraction = 1.0;
    return rep;
  }

  // Minimum-error split: fit one normal per class and pick the split that
  // minimizes the expected classification error of the fitted mixture.
  // Quantization puts a floor of 1/12 cycle^2 under every class variance.
  constexpr double kVarFloor = 1.0 / 12.0;
  double best_j = std::numeric_limits<double>::infinity();
  std::size_t best = value.size();
  double c0 = 0, s0 = 0, q0 = 0;
  for (std::size_t t = 0; t + 1 < value.size(); ++t) {
    c0 += count[t];
    s0 += count[t] * value[t];
    q0 += count[t] * value[t] * value[t];
    const double c1 = total - c0;
    if (c0 < static_cast<double>(opts.min_class_count) ||
        c1 < static_cast<double>(opts.min_class_count)) {
      continue;
    }
    const double p0 = c0 / total, p1 = c1 / total;
    if (std::min(p0, p1) < opts.min_class_fraction) continue;
    const double m0 = s0 / c0, m1 = (sum_all - s0) / c1;
    const double v0 = std::max(kVarFloor, q0 / c0 - m0 * m0);
    const double v1 = std::max(kVarFloor, (sq_all - q0) / c1 - m1 * m1);
    const double j = p0 * std::log(v0) + p1 * std::log(v1) - 2.0 * (p0 * std::log(p0) + p1 * std::log(p1));
    if (j < best_j) {
      best_j = j;
      best = t;
    }
  }
  if (best == value.size()) {
    rep.threshold = mean_all;
    rep.low_mean = rep.high_mean = mean_all;
    rep.low_fraction = 1.0;
    return rep;
  }

  double n0 = 0, sum0 = 0, sq0 = 0;
  std::size_t mode0 = 0, mode1 = best + 1;
  for (std::size_t i = 0; i <= best; ++i) {
    n0 += count[i];
    sum0 += count[i] * value[i];
    sq0 += count[i] * value[i] * value[i];
    if (count[i] > count[mode0]) mode0 = i;
  }
  for (std::size_t i = best + 1; i < value.size(); ++i) {
    if (count[i] > count[mode1]) mode1 = i;
  }
  const double n1 = total - n0;
  const double m0 = sum0 / n0, m1 = (sum_all - sum0) / n1;
  const double v0 = std::max(kVarFloor, sq0 / n0 - m0 * m0);
  const double v1 = std::max(kVarFloor, (sq_all - sq0) / n1 - m1 * m1);

  rep.threshold = std::floor((value[best] + value[best + 1]) / 2.0);
  rep.low_mode = value[mode0];
  rep.high_mode = value[mode1];
  rep.low_mean = m0;
  rep.high_mean = m1;
  rep.low_fraction = n0 / total;
  rep.separation = (m1 - m0) / std::sqrt(v0 + v1);
  const double between = (n0 / total) * (n1 / total) * (m1 - m0) * (m1 - m0);
  rep.separation_score = var_all > 0 ? std::min(1.0, between / var_all) : 0.0;
  rep.bimodal = rep.separation >= opts.min_separation && rep.separation_score >= opts.min_score;
  return rep;
}

ThresholdReport find_threshold(std::span<const std::uint32_t> latencies,
                               const ThresholdOptions& opts) {
  auto rep = analyze_threshold(latencies, opts);
  if (!rep.bimodal) {
    std::ostringstream msg;
    msg << "latencies form a single distribution (no separate row-conflict population; "
           "closed-page policy?): best split at "
        << rep.threshold << " cycles separates the class means by only " << rep.separation
        << " pooled standard deviations";
    throw Error(ErrorKind::NoBimodalDistribution, msg.str());
  }
  return rep;
}

std::vector<std::uint32_t> latencies_of(const Trace& trace) {
  std::vector<std::uint32_t> out;
  out.reserve(trace.records.size());
  for (const auto& r : trace.records) {
    if (r.latency) out.push_back(*r.latency);
  }
  return out;
}

Trace classify(const Trace& trace, double threshold, bool relabel) {
  Trace out = trace;
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    auto& r = out.records[i];
    if (r.label && !relabel) continue;
    if (!r.latency) {
      throw Error(ErrorKind::InvariantViolation,
                  "record " + std::to_string(i) + " has no latency to classify");
    }
    r.label = static_cast<double>(*r.latency) > threshold ? Label::conflict : Label::no_conflict;
  }
  return out;
}

}  // namespace knock
