#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "knock/error.hpp"
#include "knock/mapping.hpp"
#include "knock/metrics.hpp"
#include "knock/simulator.hpp"

using namespace knock;

namespace {

// Popcount relabeling of every pair under a spec, independent of evaluate.
struct Counts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

bool par(std::uint64_t x) { return __builtin_popcountll(x) & 1; }

bool brute_conflict(const MappingSpec& s, std::uint64_t a, std::uint64_t b) {
  for (auto m : s.bank_matrix().words()) {
    if (par(a & m) != par(b & m)) return false;
  }
  for (auto m : s.row_matrix().words()) {
    if (par(a & m) != par(b & m)) return true;
  }
  return false;
}

Counts relabel(const MappingSpec& predicted, const Trace& t) {
  Counts c;
  for (const auto& r : t.records) {
    const bool p = brute_conflict(predicted, r.a.bits(), r.b.bits());
    const bool real = r.is_conflict();
    (p && real ? c.tp : p ? c.fp : real ? c.fn : c.tn)++;
  }
  return c;
}

}  // namespace

TEST_CASE("perfect recovery") {
  const auto spec = load_preset("pixel3a");
  const auto t = generate_labeled_pairs(spec, 10000, 1, 6, PairConstraint::any_pair);
  const auto rep = evaluate(spec, t.records);
  CHECK(rep.precision == 1.0);
  CHECK(rep.recall == 1.0);
  CHECK(rep.fp == 0);
  CHECK(rep.fn == 0);
  CHECK(rep.pairs_evaluated == 10000);
}

TEST_CASE("dropping a bank mask matches the relabel oracle") {
  const auto truth = load_preset("precision-5810");
  BitMatrix fewer(truth.address_bits());
  for (std::size_t i = 1; i < truth.k(); ++i) fewer.append(truth.bank_matrix().word(i));
  const MappingSpec dropped(truth.address_bits(), fewer, truth.row_matrix());
  const auto t = generate_labeled_pairs(truth, 50000, 2, 6, PairConstraint::any_pair);
  const auto rep = evaluate(dropped, t.records);
  const auto want = relabel(dropped, t);
  CHECK(rep.tp == want.tp);
  CHECK(rep.fp == want.fp);
  CHECK(rep.tn == want.tn);
  CHECK(rep.fn == want.fn);
  CHECK(rep.tp + rep.fp + rep.tn + rep.fn == rep.pairs_evaluated);
  // a coarser bank function over-predicts conflicts
  CHECK(*rep.precision < 1.0);
  CHECK(*rep.precision == doctest::Approx(static_cast<double>(want.tp) / (want.tp + want.fp)));
}

TEST_CASE("swapping prediction and truth transposes the confusion matrix") {
  const auto a = load_preset("rpi3b+");
  BitMatrix rows(30);
  for (unsigned i = 16; i < 29; ++i) rows.append(std::uint64_t{1} << i);
  const MappingSpec b(30, a.bank_matrix(), rows);
  const auto ta = generate_labeled_pairs(a, 20000, 3, 6, PairConstraint::same_bank);
  const auto tb = generate_labeled_pairs(b, 20000, 3, 6, PairConstraint::same_bank);
  // same seed, same addresses; only the labels differ
  REQUIRE(ta.records[5].a == tb.records[5].a);
  const auto ab = evaluate(b, ta.records);
  const auto ba = evaluate(a, tb.records);
  CHECK(ab.tp == ba.tp);
  CHECK(ab.tn == ba.tn);
  CHECK(ab.fp == ba.fn);
  CHECK(ab.fn == ba.fp);
  CHECK(ab.fn > 0);
}

TEST_CASE("undefined ratios are absent") {
  const auto spec = load_preset("rpi3b+");
  Trace none{30, {}};
  none.records.push_back({BitVector(30, 0), BitVector(30, 0x40), std::nullopt, Label::no_conflict});
  const auto rep = evaluate(spec, none.records);
  CHECK_FALSE(rep.precision);
  CHECK_FALSE(rep.recall);
  CHECK(rep.tn == 1);
  CHECK(render_summary(rep).find("n/a") != std::string::npos);

  Trace wide{31, {}};
  wide.records.push_back({BitVector(31, 0), BitVector(31, 1), std::nullopt, Label::conflict});
  CHECK_THROWS_AS(evaluate(spec, wide.records), Error);
}

TEST_CASE("compare_bases") {
  const auto truth = load_preset("poweredge-r630").bank_matrix();
  const unsigned n = truth.width();
  const std::uint64_t all = low_mask(n);
  CounterRng rng(4);
  for (int t = 0; t < 20; ++t) {
    // P * truth for a random invertible P (unit lower triangular times a shuffle)
    std::vector<std::uint64_t> rows(truth.words().begin(), truth.words().end());
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        if (rng.bernoulli(0.5)) rows[i] ^= rows[j];
      }
    }
    CHECK(compare_bases(BitMatrix(n, rows), truth, all));
    CHECK(compare_bases(truth, BitMatrix(n, rows), all));
  }
  std::vector<std::uint64_t> fewer(truth.words().begin() + 1, truth.words().end());
  CHECK_FALSE(compare_bases(BitMatrix(n, fewer), truth, all));

  // unobserved positions are ignored on the truth side
  BitMatrix t2(16, std::vector<std::uint64_t>{0x0101, 0x0200});
  BitMatrix r2(16, std::vector<std::uint64_t>{0x0100, 0x0200});
  CHECK_FALSE(compare_bases(r2, t2, low_mask(16)));
  CHECK(compare_bases(r2, t2, low_mask(16) & ~std::uint64_t{1}));
  CHECK_THROWS_AS(compare_bases(r2, truth, all), Error);
}

TEST_CASE("summary table") {
  EvaluationReport rep;
  rep.tp = 90;
  rep.fp = 1;
  rep.tn = 900;
  rep.fn = 9;
  rep.pairs_evaluated = 1000;
  rep.precision = 90.0 / 91;
  rep.recall = 0.9;
  rep.basis_match = true;
  const auto s = render_summary(rep);
  CHECK(s.find("0.9890") != std::string::npos);
  CHECK(s.find("0.9000") != std::string::npos);
  CHECK(s.find("matches") != std::string::npos);
}
