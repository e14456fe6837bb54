#include "knock/row_solver.hpp"

#include <algorithm>
#include <bit>
#include <functional>
#include <optional>
#include <sstream>

#include "knock/error.hpp"
#include "knock/rng.hpp"

namespace knock {

namespace {

constexpr std::uint64_t kFlipStream = 0x666c6970ULL;

/// Adds bank-basis pivot bits to `v` until it lies in the nullspace of M.
/// Uses the reduced form of M: each reduced row owns one pivot bit, so
/// toggling that bit flips exactly that row's parity.
std::uint64_t same_bank_flip(std::uint64_t v, const RrefResult& bank) {
  std::uint64_t d = v;
  for (std::size_t i = 0; i < bank.rank; ++i) {
    if (parity_word(v & bank.reduced.word(i))) d ^= std::uint64_t{1} << bank.pivots[i];
  }
  return d;
}

void combos(const std::vector<std::uint64_t>& basis, unsigned max_size, std::size_t start,
            unsigned depth, std::uint64_t acc, const std::function<void(std::uint64_t)>& emit) {
  for (std::size_t i = start; i < basis.size(); ++i) {
    const auto v = acc ^ basis[i];
    emit(v);
    if (depth + 1 < max_size) combos(basis, max_size, i + 1, depth + 1, v, emit);
  }
}

}  // namespace

void SearchConfig::validate() const {
  if (combo_max < 1 || weight_max < 1 || base_count < 1 || node_budget < 1) {
    throw Error(ErrorKind::Usage, "search knobs must be >= 1");
  }
  if (oracle_trials < 1 || oracle_trials % 2 == 0) {
    throw Error(ErrorKind::Usage, "oracle_trials must be odd");
  }
}

BitVector coarse_row_mask(std::span<const TraceRecord> same_row_pairs) {
  if (same_row_pairs.empty()) {
    throw Error(ErrorKind::InsufficientData, "no same-row pairs for the coarse row mask");
  }
  const unsigned n = same_row_pairs.front().a.width();
  std::uint64_t varied = 0;
  for (const auto& r : same_row_pairs) {
    if (r.a.width() != n || r.b.width() != n) {
      throw Error(ErrorKind::WidthMismatch, "same-row pairs have mixed widths");
    }
    varied |= r.a.bits() ^ r.b.bits();
  }
  return BitVector(n, ~varied & low_mask(n));
}

DifferenceMatrix build_row_difference_matrix(std::span<const TraceRecord> same_row_pairs) {
  if (same_row_pairs.empty()) {
    throw Error(ErrorKind::InsufficientData, "no same-row pairs for the row difference matrix");
  }
  const unsigned n = same_row_pairs.front().a.width();
  std::vector<std::uint64_t> rows;
  DifferenceMatrix out{BitMatrix(n), same_row_pairs.size(), 0, 0};
  for (const auto& r : same_row_pairs) {
    if (r.a.width() != n || r.b.width() != n) {
      throw Error(ErrorKind::WidthMismatch, "same-row pairs have mixed widths");
    }
    const auto d = r.a.bits() ^ r.b.bits();
    if (d == 0) {
      ++out.zero_rows;
    } else {
      rows.push_back(d);
    }
  }
  std::sort(rows.begin(), rows.end());
  const auto before = rows.size();
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  out.duplicate_rows = before - rows.size();
  out.matrix = BitMatrix(n, std::move(rows));
  return out;
}

BitMatrix enumerate_candidates(const BitMatrix& D_row, const BitMatrix& M, const SearchConfig& cfg,
                               std::optional<std::uint64_t> observed) {
  if (D_row.empty()) {
    throw Error(ErrorKind::InsufficientData, "row difference matrix is empty");
  }
  const unsigned n = D_row.width();
  const std::uint64_t obs = observed.value_or(low_mask(n)) & low_mask(n);

  std::vector<std::uint64_t> pinned(D_row.words().begin(), D_row.words().end());
  for (unsigned b = 0; b < n; ++b) {
    if (((obs >> b) & 1) == 0) pinned.push_back(std::uint64_t{1} << b);
  }
  const auto ns = nullspace_basis(BitMatrix(n, pinned));
  const std::vector<std::uint64_t> basis(ns.words().begin(), ns.words().end());

  EchelonBasis bank;
  for (auto w : M.words()) bank.insert(w);

  std::vector<std::uint64_t> out;
  combos(basis, cfg.combo_max, 0, 0, 0, [&](std::uint64_t v) {
    if (v == 0 || static_cast<unsigned>(std::popcount(v)) > cfg.weight_max) return;
    if ((v & obs) == 0 || bank.contains(v)) return;
    out.push_back(v);
  });
  std::sort(out.begin(), out.end(), [](std::uint64_t x, std::uint64_t y) {
    const int wx = std::popcount(x), wy = std::popcount(y);
    return wx != wy ? wx < wy : x < y;
  });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) {
    std::ostringstream msg;
    msg << "no row-mask candidates: rank(D_row)=" << rank(D_row) << ", nullspace dimension "
        << basis.size() << ", rank(M)=" << rank(M) << " (combo_max=" << cfg.combo_max
        << ", weight_max=" << cfg.weight_max << ")";
    throw Error(ErrorKind::NoBasis, msg.str());
  }
  return BitMatrix(n, std::move(out));
}

bool flip_test(const BitVector& candidate, ConflictOracle& oracle, const BitMatrix& M,
               const SearchConfig& cfg, std::uint64_t base_mask) {
  const unsigned n = candidate.width();
  const auto bank = rref(M);
  const auto d = same_bank_flip(candidate.bits(), bank);
  // Bases depend only on (seed, flip) so a second run with a replay oracle
  // asks for exactly the pairs requested by the first.
  CounterRng rng(cfg.seed ^ kFlipStream, d);
  unsigned hits = 0;
  std::optional<Error> missing;
  for (unsigned i = 0; i < cfg.base_count; ++i) {
    const std::uint64_t a = rng() & base_mask & low_mask(n);
    try {
      hits += oracle.is_conflict(BitVector(n, a), BitVector(n, a ^ d));
    } catch (const Error& e) {
      // keep querying so a replay oracle records every base of this flip
      if (e.kind() != ErrorKind::PairNotInTrace) throw;
      if (!missing) missing = e;
    }
  }
  if (missing) throw *missing;
  return 2 * hits > cfg.base_count;
}

BacktrackResult rank_aware_backtrack(const BitMatrix& M, const BitMatrix& candidates,
                                     std::size_t k_prime, const std::vector<unsigned>& pivots,
                                     const SearchConfig& cfg) {
  if (pivots.size() != k_prime) {
    throw Error(ErrorKind::InvariantViolation, "need one pivot per row mask");
  }
  const unsigned n = candidates.width();
  EchelonBasis start;
  for (auto w : M.words()) start.insert(w);
  const std::size_t r_init = start.rank();
  if (r_init != M.row_count()) {
    throw Error(ErrorKind::InvariantViolation, "bank masks are not independent");
  }

  // C_j: candidates carrying bit pivots[j], in the given (weight) order.
  std::vector<std::vector<std::uint64_t>> classes(k_prime);
  for (std::size_t j = 0; j < k_prime; ++j) {
    for (auto v : candidates.words()) {
      if ((v >> pivots[j]) & 1) classes[j].push_back(v);
    }
    if (classes[j].empty()) {
      throw Error(ErrorKind::NoBasis, "no candidate includes pivot bit " +
                                          std::to_string(pivots[j]) + " (row " +
                                          std::to_string(j) + ")");
    }
  }
  // Lightest possible completion from depth j on; an admissible bound.
  std::vector<std::size_t> tail(k_prime + 1, 0);
  for (std::size_t j = k_prime; j-- > 0;) {
    tail[j] = tail[j + 1] + static_cast<std::size_t>(std::popcount(classes[j].front()));
  }

  BacktrackResult res;
  std::size_t w_min = static_cast<std::size_t>(-1);
  std::vector<std::uint64_t> chosen, best;
  std::function<void(std::size_t, const EchelonBasis&, std::size_t)> search =
      [&](std::size_t j, const EchelonBasis& basis, std::size_t w) {
        if (res.exhausted) return;
        if (++res.nodes > cfg.node_budget) {
          res.exhausted = true;
          return;
        }
        if (basis.rank() + (k_prime - j) < r_init + k_prime) return;
        if (j == k_prime) {
          if (w < w_min) {
            w_min = w;
            best = chosen;
          }
          return;
        }
        for (auto v : classes[j]) {
          const auto hw = static_cast<std::size_t>(std::popcount(v));
          // Sorted by weight: once one candidate cannot beat w_min, none can.
          if (w + hw + tail[j + 1] >= w_min) break;
          if (basis.contains(v)) continue;
          EchelonBasis next = basis;
          next.insert(v);
          chosen.push_back(v);
          search(j + 1, next, w + hw);
          chosen.pop_back();
          if (res.exhausted) return;
        }
      };
  search(0, start, 0);

  if (best.empty() && k_prime > 0) {
    throw Error(ErrorKind::NoBasis,
                res.exhausted ? "node budget exhausted before any full-rank row basis was found"
                              : "no combination of candidates extends the bank basis by " +
                                    std::to_string(k_prime) + " independent row masks");
  }
  res.rows = BitMatrix(n, best);
  res.total_weight = k_prime == 0 ? 0 : w_min;
  return res;
}

RowRecovery recover_row_masks(const Trace& same_bank, const BankRecovery& bank,
                              ConflictOracle* oracle, const SearchConfig& cfg) {
  cfg.validate();
  const unsigned n = same_bank.width;
  if (bank.width != n) {
    throw Error(ErrorKind::WidthMismatch, "bank recovery width differs from the trace width");
  }
  const BitMatrix& M = bank.basis;
  std::uint64_t observed = low_mask(n);
  for (auto b : bank.undetermined_bits) observed &= ~(std::uint64_t{1} << b);

  RowRecovery rec;
  std::vector<TraceRecord> hits;
  for (const auto& r : same_bank.records) {
    if (!r.label || r.is_conflict()) continue;
    if (oracle != nullptr && cfg.confirm_hits && oracle->is_conflict(r.a, r.b)) {
      ++rec.rejected_hits;
      continue;
    }
    hits.push_back(r);
  }
  if (hits.empty()) {
    throw Error(ErrorKind::InsufficientData, "same-bank trace holds no row-hit pairs");
  }
  rec.hit_pairs = hits.size();
  rec.coarse_mask = coarse_row_mask(hits);
  const auto D_row = build_row_difference_matrix(hits).matrix;
  rec.rank_D_row = rank(D_row);

  const std::size_t observed_bits = static_cast<std::size_t>(std::popcount(observed));
  const std::size_t k = M.row_count();
  if (observed_bits <= rec.rank_D_row + k) {
    std::ostringstream msg;
    msg << "inconsistent data: " << observed_bits << " observed bits - rank(D_row) "
        << rec.rank_D_row << " - k " << k << " leaves no row dimension";
    throw Error(ErrorKind::InsufficientData, msg.str());
  }
  rec.k_prime = observed_bits - rec.rank_D_row - k;

  // Row-affecting test. With an oracle this is the timing flip test; without
  // one a flip keeps the row iff it lies in the span of the observed
  // same-row differences.
  EchelonBasis columns;
  for (auto w : D_row.words()) columns.insert(w);
  const auto bank_rref = rref(M);
  std::size_t missing = 0;
  auto affects_row = [&](std::uint64_t v) -> bool {
    if (oracle == nullptr) return !columns.contains(same_bank_flip(v, bank_rref));
    try {
      return flip_test(BitVector(n, v), *oracle, M, cfg, observed);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::PairNotInTrace) throw;
      ++missing;
      return false;
    }
  };

  for (unsigned l = 0; l < n && rec.pivot_positions.size() < rec.k_prime; ++l) {
    if (!rec.coarse_mask.test(l) || ((observed >> l) & 1) == 0) continue;
    if (affects_row(std::uint64_t{1} << l)) rec.pivot_positions.push_back(l);
  }

  const auto all = enumerate_candidates(D_row, M, cfg, observed);
  BitMatrix kept(n);
  for (auto v : all.words()) {
    if (affects_row(v)) kept.append(v);
  }
  rec.candidate_set = kept;

  if (missing > 0) {
    throw Error(ErrorKind::PairNotInTrace,
                std::to_string(missing) + " flip tests need pairs absent from the replay trace");
  }
  if (rec.pivot_positions.size() < rec.k_prime) {
    std::ostringstream msg;
    msg << "only " << rec.pivot_positions.size() << " row-affecting bit positions found for k'="
        << rec.k_prime;
    throw Error(ErrorKind::InsufficientData, msg.str());
  }
  if (kept.empty()) {
    throw Error(ErrorKind::NoBasis, "every row-mask candidate failed the flip test");
  }

  auto bt = rank_aware_backtrack(M, kept, rec.k_prime, rec.pivot_positions, cfg);
  rec.row_basis = bt.rows;
  rec.total_weight = bt.total_weight;
  rec.search_nodes = bt.nodes;
  rec.search_exhausted = bt.exhausted;
  return rec;
}

}  // namespace knock
