#include "knock/bank_solver.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <sstream>

#include "knock/bounds.hpp"
#include "knock/error.hpp"
#include "knock/rng.hpp"

namespace knock {

namespace {

constexpr std::uint64_t kPartitionStream = 0x7061727469746eULL;
constexpr std::uint64_t kResampleStream = 0x726573616d706cULL;

std::vector<unsigned> bits_outside(std::uint64_t support, unsigned width) {
  std::vector<unsigned> out;
  for (unsigned b = 0; b < width; ++b) {
    if (((support >> b) & 1) == 0) out.push_back(b);
  }
  return out;
}

/// Nullspace of `rows` with every bit outside `observed` pinned to zero.
BitMatrix observed_nullspace(unsigned width, std::span<const std::uint64_t> rows,
                             std::uint64_t observed) {
  std::vector<std::uint64_t> all(rows.begin(), rows.end());
  for (auto b : bits_outside(observed, width)) all.push_back(std::uint64_t{1} << b);
  return nullspace_basis(BitMatrix(width, std::move(all)));
}

std::vector<std::uint64_t> dedup(std::vector<std::uint64_t> rows) {
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return rows;
}

std::size_t mismatches(std::uint64_t v, std::span<const std::uint64_t> rows) {
  std::size_t bad = 0;
  for (auto r : rows) bad += parity_word(r & v);
  return bad;
}

}  // namespace

std::vector<TraceRecord> conflict_records(const Trace& trace) {
  std::vector<TraceRecord> out;
  for (const auto& r : trace.records) {
    if (r.is_conflict()) out.push_back(r);
  }
  return out;
}

std::uint64_t observed_support(const Trace& trace) {
  std::uint64_t s = 0;
  for (const auto& r : trace.records) s |= r.a.bits() ^ r.b.bits();
  return s;
}

DifferenceMatrix build_difference_matrix(std::span<const TraceRecord> conflict_pairs) {
  if (conflict_pairs.empty()) {
    throw Error(ErrorKind::InsufficientData, "no conflict pairs to build a difference matrix");
  }
  const unsigned width = conflict_pairs.front().a.width();
  std::vector<std::uint64_t> rows;
  rows.reserve(conflict_pairs.size());
  DifferenceMatrix out{BitMatrix(width), conflict_pairs.size(), 0, 0};
  for (const auto& r : conflict_pairs) {
    if (r.a.width() != width || r.b.width() != width) {
      throw Error(ErrorKind::WidthMismatch, "conflict pairs have mixed widths");
    }
    if (!r.is_conflict()) {
      throw Error(ErrorKind::InvariantViolation,
                  "difference matrix input contains a pair not labeled conflict");
    }
    const auto d = r.a.bits() ^ r.b.bits();
    if (d == 0) {
      ++out.zero_rows;
      continue;
    }
    rows.push_back(d);
  }
  const auto before = rows.size();
  rows = dedup(std::move(rows));
  out.duplicate_rows = before - rows.size();
  out.matrix = BitMatrix(width, std::move(rows));
  return out;
}

BankRecovery recover_bank_masks(const BitMatrix& D, std::optional<std::uint64_t> observed) {
  const unsigned n = D.width();
  std::uint64_t support = 0;
  for (auto w : D.words()) support |= w;
  if (observed) support = *observed & low_mask(n);

  BankRecovery rec;
  rec.width = n;
  // One elimination pass serves both the rank and the nullspace.
  EchelonBasis echelon;
  for (auto w : D.words()) echelon.insert(w);
  rec.basis = observed_nullspace(n, echelon.reduced_rows(), support);
  rec.undetermined_bits = bits_outside(support, n);
  rec.k = rec.basis.row_count();
  rec.rank_D = echelon.rank();
  rec.pairs_used = D.row_count();
  return rec;
}

double explain_fraction(const BitMatrix& basis, std::span<const TraceRecord> pairs) {
  std::size_t total = 0, explained = 0;
  for (const auto& r : pairs) {
    if (!r.is_conflict()) continue;
    ++total;
    const auto d = r.a.bits() ^ r.b.bits();
    bool ok = true;
    for (auto m : basis.words()) {
      if (parity_word(d & m)) {
        ok = false;
        break;
      }
    }
    explained += ok;
  }
  return total == 0 ? 1.0 : static_cast<double>(explained) / static_cast<double>(total);
}

BankRecovery subsample_vote(std::span<const TraceRecord> conflict_pairs, const VoteConfig& cfg,
                            std::optional<std::uint64_t> observed) {
  if (cfg.subsamples < 3 || cfg.subsamples % 2 == 0) {
    throw Error(ErrorKind::Usage, "subsample count must be odd and >= 3");
  }
  if (!(cfg.quorum >= 0.5 && cfg.quorum <= 1.0)) {
    throw Error(ErrorKind::Usage, "quorum must be in [0.5, 1]");
  }
  if (!(cfg.tolerance >= 0.0 && cfg.tolerance < 0.5)) {
    throw Error(ErrorKind::Usage, "vote tolerance must be in [0, 0.5)");
  }
  const auto dm = build_difference_matrix(conflict_pairs);
  const unsigned n = dm.matrix.width();

  // Pre-dedup rows drive the vote statistics.
  std::vector<std::uint64_t> rows;
  rows.reserve(conflict_pairs.size());
  std::uint64_t support = 0;
  for (const auto& r : conflict_pairs) {
    const auto d = r.a.bits() ^ r.b.bits();
    if (d == 0) continue;
    rows.push_back(d);
    support |= d;
  }
  if (observed) support = *observed & low_mask(n);
  const unsigned q = cfg.subsamples;
  if (rows.size() < q) {
    throw Error(ErrorKind::InsufficientData, "subsample count " + std::to_string(q) +
                                                 " exceeds the " + std::to_string(rows.size()) +
                                                 " usable conflict pairs");
  }

  // Disjoint random partition.
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  {
    CounterRng rng(cfg.seed, kPartitionStream);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<std::vector<std::uint64_t>> parts(q);
  for (std::size_t i = 0; i < order.size(); ++i) parts[i % q].push_back(rows[order[i]]);

  std::set<std::uint64_t> candidates;
  auto add_candidates = [&](std::span<const std::uint64_t> subset) {
    const auto ns = observed_nullspace(n, dedup({subset.begin(), subset.end()}), support);
    for (auto v : ns.words()) candidates.insert(v);
  };
  for (const auto& p : parts) add_candidates(p);
  add_candidates(dm.matrix.words());

  // A false conflict row removes a dimension from every nullspace it enters,
  // so under noise most subsample spaces collapse. Random subsets just large
  // enough to span the true constraints are often clean and put the true
  // masks into the pool.
  const std::size_t full_rank = rank(dm.matrix);
  const std::size_t subset_size = std::min(rows.size(), full_rank + cfg.resample_margin);
  if (subset_size < rows.size()) {
    CounterRng rng(cfg.seed, kResampleStream);
    std::vector<std::size_t> idx(rows.size());
    std::vector<std::uint64_t> subset(subset_size);
    for (unsigned t = 0; t < cfg.resamples; ++t) {
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      for (std::size_t i = 0; i < subset_size; ++i) {
        std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
        subset[i] = rows[idx[i]];
      }
      add_candidates(subset);
    }
  }

  auto votes_for = [&](std::uint64_t v) {
    unsigned votes = 0;
    for (const auto& p : parts) {
      const auto allowed =
          static_cast<std::size_t>(std::floor(cfg.tolerance * static_cast<double>(p.size())));
      votes += mismatches(v, p) <= allowed;
    }
    return votes;
  };
  const auto needed = static_cast<unsigned>(std::ceil(cfg.quorum * q - 1e-9));
  const auto allowed_total =
      static_cast<std::size_t>(std::floor(cfg.tolerance * static_cast<double>(rows.size())));

  EchelonBasis retained;
  for (auto v : candidates) {
    if (votes_for(v) >= needed && mismatches(v, rows) <= allowed_total) retained.insert(v);
  }
  if (retained.rank() == 0) {
    const unsigned n_obs = static_cast<unsigned>(std::popcount(support));
    BoundParams bp;
    bp.n = std::max(2u, n_obs);
    bp.k = static_cast<unsigned>(
        std::clamp<std::size_t>(n_obs > full_rank ? n_obs - full_rank : 1, 1, bp.n - 1));
    bp.theta = cfg.theta_hint;
    bp.epsilon = 0.01;
    std::ostringstream msg;
    msg << "no mask reached the quorum of " << needed << "/" << q << " subsamples over "
        << rows.size() << " conflict pairs; too much label noise or too few samples "
        << "(for n=" << bp.n << ", k=" << bp.k << ", theta=" << bp.theta
        << ", epsilon=0.01 the sample bound is m >= " << bank_sample_bound(bp) << " pairs)";
    throw Error(ErrorKind::QuorumFailure, msg.str());
  }

  // Retained difference matrix: the pairs consistent with the voted space.
  // Its nullspace can only be larger than the voted span; repeat until the
  // two agree.
  BitMatrix basis(n, retained.reduced_rows());
  std::vector<std::uint64_t> kept;
  while (true) {
    kept.clear();
    for (auto d : rows) {
      bool ok = true;
      for (auto m : basis.words()) ok = ok && !parity_word(d & m);
      if (ok) kept.push_back(d);
    }
    auto next = observed_nullspace(n, dedup(kept), support);
    if (next.row_count() == basis.row_count()) break;
    basis = std::move(next);
  }

  BankRecovery rec;
  rec.width = n;
  rec.basis = basis;
  rec.undetermined_bits = bits_outside(support, n);
  rec.k = basis.row_count();
  rec.rank_D = rank(BitMatrix(n, dedup(kept)));
  rec.pairs_used = kept.size();
  rec.explain_fraction = explain_fraction(basis, conflict_pairs);
  rec.subsamples = q;
  for (auto m : basis.words()) rec.vote_detail.push_back({m, votes_for(m)});
  return rec;
}

}  // namespace knock
