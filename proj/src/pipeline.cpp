#include "knock/pipeline.hpp"

#include "knock/bounds.hpp"

namespace knock {

namespace {

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

}  // namespace

Trace label_by_threshold(const Trace& trace, const ThresholdOptions& opts, ThresholdReport* out) {
  const auto lat = latencies_of(trace);
  const auto rep = find_threshold(lat, opts);
  if (out != nullptr) *out = rep;
  return classify(trace, rep.threshold, true);
}

E2EResult run_e2e(const MappingSpec& truth, const E2EOptions& opts) {
  E2EResult res;
  const unsigned n = truth.address_bits();

  res.bank_pairs = opts.bank_pairs;
  res.row_pairs = opts.row_pairs;
  if (res.bank_pairs == 0 || res.row_pairs == 0) {
    BoundParams bp;
    bp.n = n;
    bp.k = static_cast<unsigned>(truth.k());
    bp.k_prime = static_cast<unsigned>(truth.k_prime());
    bp.theta = opts.model.theta;
    bp.epsilon = opts.epsilon;
    if (res.bank_pairs == 0) res.bank_pairs = 4 * bank_sample_bound(bp);
    if (res.row_pairs == 0) res.row_pairs = 4 * row_sample_bound(bp);
  }

  GenConfig gen;
  gen.seed = opts.seed;
  gen.alignment_bits = opts.alignment_bits;
  gen.repeats = opts.repeats;

  const auto bank_trace = stage("simulate", [&] {
    gen.pair_count = res.bank_pairs;
    gen.constraint = PairConstraint::any_pair;
    return generate_trace(truth, opts.model, gen);
  });
  const auto labeled = stage("threshold", [&] {
    return label_by_threshold(bank_trace, opts.threshold, &res.bank_threshold);
  });
  res.bank = stage("solve-banks", [&] {
    const auto conflicts = conflict_records(labeled);
    VoteConfig vote = opts.vote;
    vote.seed ^= opts.seed;
    return subsample_vote(conflicts, vote, observed_support(labeled));
  });

  const auto row_trace = stage("simulate-same-bank", [&] {
    gen.pair_count = res.row_pairs;
    gen.constraint = PairConstraint::same_bank;
    gen.seed = opts.seed + 0x5eed;
    return generate_trace(truth, opts.model, gen);
  });
  const auto row_labeled = stage("threshold-same-bank", [&] {
    return label_by_threshold(row_trace, opts.threshold, &res.row_threshold);
  });
  res.rows = stage("solve-rows", [&] {
    SimulatorOracle oracle(truth, opts.model, opts.search.oracle_trials, opts.seed);
    SearchConfig search = opts.search;
    search.seed ^= opts.seed;
    return recover_row_masks(row_labeled, res.bank, &oracle, search);
  });

  res.evaluation = stage("evaluate", [&] {
    MappingSpec recovered(n, res.bank.basis, res.rows.row_basis, "recovered");
    Trace fresh = generate_labeled_pairs(truth, opts.eval_pairs, opts.seed + 0xe7a1,
                                         opts.alignment_bits, PairConstraint::any_pair);
    if (opts.eval_noise && opts.model.theta > 0) {
      // Fresh timed pairs labeled by the model midpoint, noise included.
      CounterRng rng(opts.seed + 0xe7a1, 0x6e6f697365ULL);
      for (auto& r : fresh.records) {
        const bool c = truth.conflict(r.a.bits(), r.b.bits());
        r.label = sample_latency(opts.model, c, rng) > opts.model.midpoint() ? Label::conflict
                                                                             : Label::no_conflict;
      }
    }
    auto rep = evaluate(recovered, fresh.records);
    std::uint64_t observed = low_mask(n);
    for (auto b : res.bank.undetermined_bits) observed &= ~(std::uint64_t{1} << b);
    rep.basis_match = compare_bases(res.bank.basis, truth.bank_matrix(), observed);
    res.recovered = recovered;
    return rep;
  });
  return res;
}

}  // namespace knock
