#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "knock/gf2.hpp"
#include "knock/traces.hpp"

namespace knock {

struct DifferenceMatrix {
  BitMatrix matrix;               // deduplicated, zero rows dropped
  std::size_t input_pairs = 0;
  std::size_t zero_rows = 0;      // identical-address pairs
  std::size_t duplicate_rows = 0;
};

struct MaskVote {
  std::uint64_t mask = 0;
  unsigned votes = 0;
};

struct BankRecovery {
  unsigned width = 0;
  BitMatrix basis{1};
  std::vector<unsigned> undetermined_bits;
  std::size_t k = 0;
  std::size_t rank_D = 0;
  std::size_t pairs_used = 0;
  std::optional<double> explain_fraction;
  std::vector<MaskVote> vote_detail;  // filled by subsample_vote
  unsigned subsamples = 0;
};

/// Conflict-labeled records of a trace.
std::vector<TraceRecord> conflict_records(const Trace& trace);

/// OR of every pair difference in the trace, whatever the label: the address
/// bits the measurement actually exercised.
std::uint64_t observed_support(const Trace& trace);

/// Rows A xor B of conflict pairs. Every record must carry the conflict label.
DifferenceMatrix build_difference_matrix(std::span<const TraceRecord> conflict_pairs);

/// Nullspace of D restricted to observed bits. Bits outside `observed` are
/// reported as undetermined instead of as single-bit masks; without an
/// explicit support the OR of D's rows is used.
BankRecovery recover_bank_masks(const BitMatrix& D, std::optional<std::uint64_t> observed = {});

/// Fraction of conflict pairs whose difference is orthogonal to every basis row.
double explain_fraction(const BitMatrix& basis, std::span<const TraceRecord> pairs);

struct VoteConfig {
  unsigned subsamples = 5;
  double quorum = 0.6;
  std::uint64_t seed = 0;
  // A subsample backs a candidate when at most this fraction of its
  // differences contradicts it; zero demands exact span membership.
  double tolerance = 0.15;
  // Extra random subsets, each slightly larger than rank(D), whose nullspaces
  // seed the candidate pool.
  unsigned resamples = 64;
  unsigned resample_margin = 8;
  // Mislabel rate assumed when quoting the sample bound in errors.
  double theta_hint = 0.05;
};

/// Majority vote over disjoint subsamples of the conflict pairs.
BankRecovery subsample_vote(std::span<const TraceRecord> conflict_pairs, const VoteConfig& cfg,
                            std::optional<std::uint64_t> observed = {});

}  // namespace knock
