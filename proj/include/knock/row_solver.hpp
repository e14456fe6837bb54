#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "knock/bank_solver.hpp"
#include "knock/gf2.hpp"
#include "knock/simulator.hpp"
#include "knock/traces.hpp"

namespace knock {

struct SearchConfig {
  unsigned combo_max = 3;
  unsigned weight_max = 6;
  unsigned oracle_trials = 15;
  std::uint64_t node_budget = 2'000'000;
  unsigned base_count = 9;
  std::uint64_t seed = 0;
  // Re-check low-latency pairs with the oracle before they enter D_row; one
  // mislabeled conflict there costs a row dimension.
  bool confirm_hits = true;

  void validate() const;
};

struct RowRecovery {
  BitVector coarse_mask{1, 0};
  BitMatrix candidate_set{1};
  BitMatrix row_basis{1};
  std::vector<unsigned> pivot_positions;
  std::size_t k_prime = 0;
  std::size_t total_weight = 0;
  std::size_t rank_D_row = 0;
  std::size_t hit_pairs = 0;       // same-row pairs entering D_row
  std::size_t rejected_hits = 0;   // low-latency pairs the oracle overturned
  std::uint64_t search_nodes = 0;
  bool search_exhausted = false;   // node budget ran out; result may not be minimal
};

/// Bits that never differ across the same-row pairs.
BitVector coarse_row_mask(std::span<const TraceRecord> same_row_pairs);

DifferenceMatrix build_row_difference_matrix(std::span<const TraceRecord> same_row_pairs);

/// XOR combinations of up to combo_max rows of nullspace(D_row) (observed bits
/// only), at most weight_max bits, outside span(M); ascending weight, then value.
BitMatrix enumerate_candidates(const BitMatrix& D_row, const BitMatrix& M, const SearchConfig& cfg,
                               std::optional<std::uint64_t> observed = {});

/// Flips `candidate` on `base_count` random addresses and asks the oracle
/// whether the pair conflicts. The flip is corrected by bank-basis pivot bits
/// so the pair stays in one bank; for candidates orthogonal to M the pair is
/// exactly (A, A xor candidate).
bool flip_test(const BitVector& candidate, ConflictOracle& oracle, const BitMatrix& M,
               const SearchConfig& cfg, std::uint64_t base_mask);

struct BacktrackResult {
  BitMatrix rows{1};
  std::size_t total_weight = 0;
  std::uint64_t nodes = 0;
  bool exhausted = false;
};

/// Minimum-weight R with row j carrying bit pivots[j] and rank([M;R]) =
/// rank(M) + k_prime. Candidates must be sorted by ascending weight.
BacktrackResult rank_aware_backtrack(const BitMatrix& M, const BitMatrix& candidates,
                                     std::size_t k_prime, const std::vector<unsigned>& pivots,
                                     const SearchConfig& cfg);

/// Same-bank trace (labeled) -> row basis. `oracle` may be null, in which case
/// flip tests and hit confirmation are skipped and every position outside the
/// column space counts as row-affecting.
RowRecovery recover_row_masks(const Trace& same_bank, const BankRecovery& bank,
                              ConflictOracle* oracle, const SearchConfig& cfg);

}  // namespace knock
