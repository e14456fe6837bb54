#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "knock/error.hpp"
#include "knock/mapping.hpp"
#include "knock/simulator.hpp"

using namespace knock;

TEST_CASE("generation is deterministic in the seed") {
  const auto spec = load_preset("rpi3b+");
  const LatencyModel model{};
  const GenConfig cfg{5000, 42};
  const auto t1 = generate_trace(spec, model, cfg);
  const auto t2 = generate_trace(spec, model, cfg);
  CHECK(t1 == t2);
  CHECK(t1.records.size() == 5000);
  auto other = cfg;
  other.seed = 43;
  CHECK_FALSE(generate_trace(spec, model, other) == t1);
}

TEST_CASE("alignment zeroes the low bits") {
  const auto spec = load_preset("pixel3a");
  GenConfig cfg{2000, 3};
  cfg.alignment_bits = 12;
  for (const auto& r : generate_trace(spec, LatencyModel{}, cfg).records) {
    CHECK((r.a.bits() & 0xfff) == 0);
    CHECK((r.b.bits() & 0xfff) == 0);
    CHECK(r.a.width() == spec.address_bits());
  }
}

TEST_CASE("noiseless latencies stay within six standard deviations") {
  const auto spec = load_preset("rpi3b+");
  const LatencyModel model{};
  const auto t = generate_trace(spec, model, GenConfig{20000, 7});
  for (const auto& r : t.records) {
    const double lat = *r.latency;
    if (spec.conflict(r.a.bits(), r.b.bits())) {
      CHECK(std::abs(lat - 230.0) <= 6 * 5.0 + 1);
    } else {
      CHECK(std::abs(lat - 175.0) <= 6 * 3.0 + 1);
    }
  }
}

TEST_CASE("symmetric noise crosses the midpoint at rate theta") {
  const auto spec = load_preset("rpi3b+");
  LatencyModel model{};
  model.theta = 0.05;
  const auto t = generate_trace(spec, model, GenConfig{20000, 8});
  std::size_t crossed = 0;
  for (const auto& r : t.records) {
    const bool truth = spec.conflict(r.a.bits(), r.b.bits());
    crossed += ((*r.latency > model.midpoint()) != truth);
  }
  const double rate = static_cast<double>(crossed) / t.records.size();
  CHECK(rate == doctest::Approx(0.05).epsilon(0.2));
}

TEST_CASE("conflict_miss noise only affects conflicts") {
  const auto spec = load_preset("rpi3b+");
  LatencyModel model{};
  model.theta = 0.3;
  model.noise = NoiseMode::conflict_miss;
  const auto t = generate_trace(spec, model, GenConfig{20000, 9});
  for (const auto& r : t.records) {
    if (!spec.conflict(r.a.bits(), r.b.bits())) CHECK(*r.latency < model.midpoint());
  }
}

TEST_CASE("same_bank pairs share a bank") {
  for (const auto& name : preset_names()) {
    const auto spec = load_preset(name);
    GenConfig cfg{2000, 10};
    cfg.constraint = PairConstraint::same_bank;
    for (const auto& r : generate_trace(spec, LatencyModel{}, cfg).records) {
      CHECK(spec.bank_index(r.a.bits()) == spec.bank_index(r.b.bits()));
    }
  }
}

TEST_CASE("labeled pairs agree with the mapping") {
  const auto spec = load_preset("rpi3b+");
  const auto t = generate_labeled_pairs(spec, 20000, 11, 6, PairConstraint::any_pair);
  std::size_t conflicts = 0;
  for (const auto& r : t.records) {
    CHECK(r.is_conflict() == is_conflict(spec, r.a, r.b));
    conflicts += r.is_conflict();
  }
  // with k=3 and 14 row bits nearly 1/8 of pairs conflict
  CHECK(conflicts > 2000);
  CHECK(conflicts < 3000);
}

TEST_CASE("false conflict injection hits the requested fraction") {
  const auto spec = load_preset("pixel3a");
  const auto clean = generate_labeled_pairs(spec, 40000, 12, 6, PairConstraint::any_pair);
  const auto noisy = inject_false_conflicts(clean, 0.05, 13);
  std::size_t labeled = 0, wrong = 0;
  for (std::size_t i = 0; i < noisy.records.size(); ++i) {
    const auto& r = noisy.records[i];
    if (r.is_conflict()) {
      ++labeled;
      wrong += !is_conflict(spec, r.a, r.b);
    }
    // true conflicts are never relabeled
    if (clean.records[i].is_conflict()) CHECK(r.is_conflict());
  }
  CHECK(static_cast<double>(wrong) / labeled == doctest::Approx(0.05).epsilon(0.05));
  CHECK_THROWS_AS(inject_false_conflicts(clean, 1.0, 1), Error);
}

TEST_CASE("majority oracle agrees with ground truth") {
  const auto spec = load_preset("rpi3b+");
  LatencyModel model{};
  model.theta = 0.05;
  CounterRng rng(14);
  std::size_t agree = 0;
  for (int i = 0; i < 1000; ++i) {
    const BitVector a(spec.address_bits(), random_address(rng, spec.address_bits(), 6));
    // half the probes are forced into one bank so conflicts are common
    auto b = BitVector(spec.address_bits(), random_address(rng, spec.address_bits(), 6));
    if (i % 2 == 0) {
      const auto diff = (a.bits() ^ b.bits()) & 0xe000;
      b = BitVector(spec.address_bits(), b.bits() ^ diff);
    }
    agree += oracle_is_conflict(spec, model, a, b, 15, i) == is_conflict(spec, a, b);
  }
  CHECK(agree >= 999);
}

TEST_CASE("closed page is reported as unusable") {
  const auto spec = load_preset("rpi3b+");
  LatencyModel model{};
  model.closed_page = true;
  const BitVector a(spec.address_bits(), 0), b(spec.address_bits(), 0x10000);
  try {
    oracle_is_conflict(spec, model, a, b, 15);
    FAIL("expected OracleUnusable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OracleUnusable);
  }
  // traces are still generated, with one latency distribution
  const auto t = generate_trace(spec, model, GenConfig{2000, 1});
  for (const auto& r : t.records) CHECK(*r.latency > 200);
}

TEST_CASE("replay oracle") {
  Trace labeled{8, {}};
  labeled.records.push_back({BitVector(8, 1), BitVector(8, 2), std::nullopt, Label::conflict});
  labeled.records.push_back({BitVector(8, 2), BitVector(8, 1), std::nullopt, Label::conflict});
  labeled.records.push_back({BitVector(8, 1), BitVector(8, 2), std::nullopt, Label::no_conflict});
  labeled.records.push_back({BitVector(8, 3), BitVector(8, 4), 170, std::nullopt});
  ReplayOracle oracle(labeled);
  CHECK(oracle.is_conflict(BitVector(8, 2), BitVector(8, 1)));
  CHECK_THROWS_AS(oracle.is_conflict(BitVector(8, 5), BitVector(8, 6)), Error);
  CHECK_THROWS_AS(oracle.is_conflict(BitVector(8, 3), BitVector(8, 4)), Error);  // unlabeled
  CHECK_THROWS_AS(oracle.is_conflict(BitVector(8, 6), BitVector(8, 5)), Error);  // already listed
  CHECK(oracle.missing().size() == 2);
  CHECK(oracle.probe_requests().records.size() == 2);
}

TEST_CASE("model and config validation") {
  LatencyModel bad{};
  bad.theta = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = LatencyModel{};
  bad.high_mean = 170;
  CHECK_THROWS_AS(bad.validate(), Error);
  const auto spec = load_preset("rpi3b+");
  GenConfig cfg{10, 1};
  cfg.alignment_bits = 30;
  CHECK_THROWS_AS(generate_trace(spec, LatencyModel{}, cfg), Error);
  cfg = GenConfig{0, 1};
  CHECK_THROWS_AS(generate_trace(spec, LatencyModel{}, cfg), Error);
  cfg = GenConfig{10, 1};
  cfg.repeats = 2;
  CHECK_THROWS_AS(generate_trace(spec, LatencyModel{}, cfg), Error);
}

TEST_CASE("same-bank difference span") {
  const auto spec = load_preset("rpi3b+");
  const auto d = same_bank_differences(spec, 6);
  CHECK(rank(d) == 30 - 6 - 3);
  for (auto w : d.words()) {
    CHECK((w & 0x3f) == 0);
    CHECK(spec.bank_index(w) == 0);
  }
}
