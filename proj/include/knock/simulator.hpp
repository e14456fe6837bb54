#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "knock/mapping.hpp"
#include "knock/rng.hpp"
#include "knock/traces.hpp"

namespace knock {

/// Which timings the mislabel rate corrupts.
enum class NoiseMode {
  symmetric,      // any access uses the wrong distribution with probability theta
  conflict_miss,  // only conflicts are affected: they read as row hits
};

struct LatencyModel {
  double low_mean = 175.0;
  double low_std = 3.0;
  double high_mean = 230.0;
  double high_std = 5.0;
  double theta = 0.0;
  bool closed_page = false;
  NoiseMode noise = NoiseMode::symmetric;

  void validate() const;
  double midpoint() const { return (low_mean + high_mean) / 2.0; }
};

enum class PairConstraint { any_pair, same_bank };

struct GenConfig {
  std::size_t pair_count = 1;
  std::uint64_t seed = 0;
  unsigned alignment_bits = 6;
  PairConstraint constraint = PairConstraint::any_pair;
  // Timed accesses per pair; the recorded latency is their median.
  unsigned repeats = 1;

  void validate(unsigned address_bits) const;
};

double sample_latency(const LatencyModel& model, bool conflict, CounterRng& rng);

/// Records carry latency only; labels come from thresholding downstream.
Trace generate_trace(const MappingSpec& spec, const LatencyModel& model, const GenConfig& cfg);

/// Ground-truth labeled pairs (no latency sampling), uniform over the aligned
/// space. Used for evaluation and for direct label-noise experiments.
Trace generate_labeled_pairs(const MappingSpec& spec, std::size_t count, std::uint64_t seed,
                             unsigned alignment_bits, PairConstraint constraint);

/// Flips randomly chosen no_conflict labels to conflict so that a fraction
/// `theta` of the conflict-labeled records are false conflicts.
Trace inject_false_conflicts(const Trace& labeled, double theta, std::uint64_t seed);

/// Majority verdict over `trials` timed accesses classified at the model
/// midpoint. Throws OracleUnusable for closed-page models.
bool oracle_is_conflict(const MappingSpec& spec, const LatencyModel& model, const BitVector& a,
                        const BitVector& b, unsigned trials, std::uint64_t seed = 0);

/// Conflict oracle used by the row solver's flip tests.
class ConflictOracle {
 public:
  virtual ~ConflictOracle() = default;
  virtual bool is_conflict(const BitVector& a, const BitVector& b) = 0;
};

class SimulatorOracle : public ConflictOracle {
 public:
  SimulatorOracle(MappingSpec spec, LatencyModel model, unsigned trials, std::uint64_t seed);
  bool is_conflict(const BitVector& a, const BitVector& b) override;
  std::size_t queries() const { return queries_; }

 private:
  MappingSpec spec_;
  LatencyModel model_;
  unsigned trials_;
  std::uint64_t seed_;
  std::size_t queries_ = 0;
};

/// Answers from labeled trace records. Unknown pairs are collected so the
/// caller can emit a probe-request file; is_conflict then throws
/// PairNotInTrace.
class ReplayOracle : public ConflictOracle {
 public:
  explicit ReplayOracle(const Trace& labeled);
  bool is_conflict(const BitVector& a, const BitVector& b) override;
  const std::vector<std::pair<std::uint64_t, std::uint64_t>>& missing() const { return missing_; }
  unsigned width() const { return width_; }
  /// Probe-request trace listing every missing pair with empty latency.
  Trace probe_requests() const;

 private:
  unsigned width_;
  // (min, max) ordered pair -> (conflict votes, total votes)
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::pair<unsigned, unsigned>> table_;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> missing_;
  std::set<std::pair<std::uint64_t, std::uint64_t>> missing_set_;
};

/// Uniform address with the low `alignment_bits` cleared.
std::uint64_t random_address(CounterRng& rng, unsigned address_bits, unsigned alignment_bits);

/// Basis of differences that keep the bank index: nullspace of the bank masks
/// with the alignment bits pinned to zero.
BitMatrix same_bank_differences(const MappingSpec& spec, unsigned alignment_bits);

}  // namespace knock
