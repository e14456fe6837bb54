#include "knock/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "knock/error.hpp"

namespace knock {

namespace {

// Substream ids for the generators; records use their index directly.
constexpr std::uint64_t kOracleStream = 0x6f7261636c65ULL;
constexpr std::uint64_t kInjectStream = 0x696e6a656374ULL;

std::uint32_t to_cycles(double x) {
  if (!(x > 0)) return 0;
  return static_cast<std::uint32_t>(std::min(std::llround(x), 0xffffffffLL));
}

std::uint64_t random_combination(CounterRng& rng, const BitMatrix& basis) {
  std::uint64_t d = 0;
  std::uint64_t coins = 0;
  for (std::size_t i = 0; i < basis.row_count(); ++i) {
    if (i % 64 == 0) coins = rng();
    d ^= basis.word(i) & (0 - ((coins >> (i % 64)) & 1));
  }
  return d;
}

std::pair<std::uint64_t, std::uint64_t> ordered(std::uint64_t a, std::uint64_t b) {
  return a < b ? std::pair{a, b} : std::pair{b, a};
}

}  // namespace

void LatencyModel::validate() const {
  if (!(theta >= 0.0 && theta < 1.0)) {
    throw Error(ErrorKind::InvariantViolation, "mislabel rate theta must be in [0, 1)");
  }
  if (!(low_std >= 0.0) || !(high_std >= 0.0)) {
    throw Error(ErrorKind::InvariantViolation, "latency standard deviations must be >= 0");
  }
  if (!closed_page && !(low_mean + 3 * low_std < high_mean - 3 * high_std)) {
    throw Error(ErrorKind::InvariantViolation,
                "latency distributions overlap: need low_mean + 3*low_std < high_mean - 3*high_std");
  }
}

void GenConfig::validate(unsigned address_bits) const {
  if (pair_count < 1) throw Error(ErrorKind::InvariantViolation, "pair_count must be >= 1");
  if (alignment_bits >= address_bits) {
    throw Error(ErrorKind::InvariantViolation, "alignment_bits must be below address_bits");
  }
  if (repeats < 1 || repeats % 2 == 0) {
    throw Error(ErrorKind::InvariantViolation, "repeats must be odd and >= 1");
  }
}

double sample_latency(const LatencyModel& model, bool conflict, CounterRng& rng) {
  bool high;
  if (model.closed_page) {
    high = true;
  } else {
    const bool wrong = model.theta > 0 && rng.bernoulli(model.theta);
    high = model.noise == NoiseMode::symmetric ? conflict != wrong : conflict && !wrong;
  }
  return high ? model.high_mean + model.high_std * rng.normal()
              : model.low_mean + model.low_std * rng.normal();
}

std::uint64_t random_address(CounterRng& rng, unsigned address_bits, unsigned alignment_bits) {
  return rng() & low_mask(address_bits) & ~low_mask(alignment_bits);
}

BitMatrix same_bank_differences(const MappingSpec& spec, unsigned alignment_bits) {
  BitMatrix pinned = spec.bank_matrix();
  for (unsigned b = 0; b < alignment_bits; ++b) pinned.append(std::uint64_t{1} << b);
  return nullspace_basis(pinned);
}

Trace generate_trace(const MappingSpec& spec, const LatencyModel& model, const GenConfig& cfg) {
  model.validate();
  cfg.validate(spec.address_bits());
  const unsigned n = spec.address_bits();

  BitMatrix diffs(n);
  if (cfg.constraint == PairConstraint::same_bank) {
    diffs = same_bank_differences(spec, cfg.alignment_bits);
    if (diffs.empty()) {
      throw Error(ErrorKind::InvariantViolation,
                  "same-bank generation infeasible: bank masks leave no free aligned bits");
    }
  }

  Trace trace{n, {}};
  trace.records.reserve(cfg.pair_count);
  std::vector<double> samples(cfg.repeats);
  for (std::size_t i = 0; i < cfg.pair_count; ++i) {
    CounterRng rng(cfg.seed, i);
    const std::uint64_t a = random_address(rng, n, cfg.alignment_bits);
    const std::uint64_t b = cfg.constraint == PairConstraint::same_bank
                                ? a ^ random_combination(rng, diffs)
                                : random_address(rng, n, cfg.alignment_bits);
    const bool conflict = spec.conflict(a, b);
    for (auto& s : samples) s = sample_latency(model, conflict, rng);
    std::nth_element(samples.begin(), samples.begin() + cfg.repeats / 2, samples.end());
    trace.records.push_back(
        {BitVector(n, a), BitVector(n, b), to_cycles(samples[cfg.repeats / 2]), std::nullopt});
  }
  return trace;
}

Trace generate_labeled_pairs(const MappingSpec& spec, std::size_t count, std::uint64_t seed,
                             unsigned alignment_bits, PairConstraint constraint) {
  const unsigned n = spec.address_bits();
  GenConfig cfg;
  cfg.pair_count = count;
  cfg.alignment_bits = alignment_bits;
  cfg.validate(n);
  BitMatrix diffs(n);
  if (constraint == PairConstraint::same_bank) diffs = same_bank_differences(spec, alignment_bits);

  Trace trace{n, {}};
  trace.records.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    CounterRng rng(seed, i);
    const std::uint64_t a = random_address(rng, n, alignment_bits);
    const std::uint64_t b = constraint == PairConstraint::same_bank
                                ? a ^ random_combination(rng, diffs)
                                : random_address(rng, n, alignment_bits);
    trace.records.push_back({BitVector(n, a), BitVector(n, b), std::nullopt,
                             spec.conflict(a, b) ? Label::conflict : Label::no_conflict});
  }
  return trace;
}

Trace inject_false_conflicts(const Trace& labeled, double theta, std::uint64_t seed) {
  if (!(theta >= 0.0 && theta < 1.0)) {
    throw Error(ErrorKind::InvariantViolation, "theta must be in [0, 1)");
  }
  std::vector<std::size_t> clean;
  std::size_t conflicts = 0;
  for (std::size_t i = 0; i < labeled.records.size(); ++i) {
    if (labeled.records[i].is_conflict()) {
      ++conflicts;
    } else if (labeled.records[i].label) {
      clean.push_back(i);
    }
  }
  // f false among (conflicts + f) labels gives a false fraction of theta.
  const auto wanted = static_cast<std::size_t>(
      std::llround(theta * static_cast<double>(conflicts) / (1.0 - theta)));
  if (wanted > clean.size()) {
    throw Error(ErrorKind::InsufficientData, "not enough non-conflict records to inject noise");
  }
  CounterRng rng(seed, kInjectStream);
  // Partial Fisher-Yates: the first `wanted` slots become the victims.
  for (std::size_t i = 0; i < wanted; ++i) {
    std::swap(clean[i], clean[i + rng.below(clean.size() - i)]);
  }
  Trace out = labeled;
  for (std::size_t i = 0; i < wanted; ++i) out.records[clean[i]].label = Label::conflict;
  return out;
}

bool oracle_is_conflict(const MappingSpec& spec, const LatencyModel& model, const BitVector& a,
                        const BitVector& b, unsigned trials, std::uint64_t seed) {
  if (trials < 1 || trials % 2 == 0) {
    throw Error(ErrorKind::InvariantViolation, "oracle trials must be odd and >= 1");
  }
  if (model.closed_page) {
    throw Error(ErrorKind::OracleUnusable,
                "closed-page policy: row hits and conflicts time identically, flip tests are "
                "impossible");
  }
  if (a.width() != spec.address_bits() || b.width() != spec.address_bits()) {
    throw Error(ErrorKind::WidthMismatch, "oracle query width differs from spec");
  }
  const bool truth = spec.conflict(a.bits(), b.bits());
  // The query stream depends on the unordered pair so repeated queries agree.
  const auto lo = std::min(a.bits(), b.bits());
  const auto hi = std::max(a.bits(), b.bits());
  CounterRng rng(seed ^ kOracleStream, mix64(lo) ^ mix64(hi + 0x9e3779b97f4a7c15ULL));
  const double mid = model.midpoint();
  unsigned votes = 0;
  for (unsigned t = 0; t < trials; ++t) {
    if (sample_latency(model, truth, rng) > mid) ++votes;
  }
  return 2 * votes > trials;
}

SimulatorOracle::SimulatorOracle(MappingSpec spec, LatencyModel model, unsigned trials,
                                 std::uint64_t seed)
    : spec_(std::move(spec)), model_(model), trials_(trials), seed_(seed) {
  model_.validate();
  if (model_.closed_page) {
    throw Error(ErrorKind::OracleUnusable,
                "closed-page policy: row hits and conflicts time identically, flip tests are "
                "impossible");
  }
}

bool SimulatorOracle::is_conflict(const BitVector& a, const BitVector& b) {
  ++queries_;
  return oracle_is_conflict(spec_, model_, a, b, trials_, seed_);
}

ReplayOracle::ReplayOracle(const Trace& labeled) : width_(labeled.width) {
  for (const auto& r : labeled.records) {
    if (!r.label) continue;
    auto& slot = table_[ordered(r.a.bits(), r.b.bits())];
    if (r.is_conflict()) ++slot.first;
    ++slot.second;
  }
}

bool ReplayOracle::is_conflict(const BitVector& a, const BitVector& b) {
  const auto k = ordered(a.bits(), b.bits());
  const auto it = table_.find(k);
  if (it == table_.end()) {
    if (missing_set_.insert(k).second) missing_.emplace_back(a.bits(), b.bits());
    throw Error(ErrorKind::PairNotInTrace,
                "pair (" + a.to_hex() + ", " + b.to_hex() + ") was not measured");
  }
  return 2 * it->second.first > it->second.second;
}

Trace ReplayOracle::probe_requests() const {
  Trace t{width_, {}};
  for (const auto& [a, b] : missing_) {
    t.records.push_back({BitVector(width_, a), BitVector(width_, b), std::nullopt, std::nullopt});
  }
  return t;
}

}  // namespace knock
