#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "knock/error.hpp"
#include "knock/mapping.hpp"
#include "knock/rng.hpp"

using namespace knock;

namespace {

// Popcount evaluation of one index bit per mask, independent of apply_map.
std::uint64_t index_by_popcount(const BitMatrix& masks, std::uint64_t a) {
  std::uint64_t out = 0;
  for (std::size_t i = 0; i < masks.row_count(); ++i) {
    unsigned ones = 0;
    for (unsigned b = 0; b < 64; ++b) ones += ((a >> b) & 1) && ((masks.word(i) >> b) & 1);
    out |= static_cast<std::uint64_t>(ones % 2) << i;
  }
  return out;
}

MappingSpec random_spec(CounterRng& rng, unsigned n, unsigned k, unsigned kp) {
  while (true) {
    BitMatrix bank(n), rows(n);
    for (unsigned i = 0; i < k; ++i) bank.append(rng() & low_mask(n));
    for (unsigned i = 0; i < kp; ++i) rows.append(rng() & low_mask(n));
    try {
      return MappingSpec(n, bank, rows);
    } catch (const Error&) {
    }
  }
}

}  // namespace

TEST_CASE("locate on the rpi3b+ preset") {
  const auto spec = load_preset("rpi3b+");
  CHECK(spec.k() == 3);
  CHECK(to_hex_list(spec.bank_matrix()) == std::vector<std::string>{"0x2000", "0x4000", "0x8000"});
  const auto loc = locate(spec, BitVector(spec.address_bits(), 0x6000));
  CHECK(loc.bank_index == 0b011);  // b13 = 1, b14 = 1, b15 = 0
  CHECK(locate(spec, BitVector(spec.address_bits(), 0)) == DramLocation{0, 0, 3, 14});
  CHECK_THROWS_AS(locate(spec, BitVector(8, 0)), Error);
}

TEST_CASE("locate matches popcount oracle and is linear") {
  CounterRng rng(21);
  for (int t = 0; t < 50; ++t) {
    const auto spec = random_spec(rng, 20, 4, 6);
    for (int i = 0; i < 100; ++i) {
      const auto a = rng() & low_mask(20), b = rng() & low_mask(20);
      const auto la = locate(spec, BitVector(20, a));
      CHECK(la.bank_index == index_by_popcount(spec.bank_matrix(), a));
      CHECK(la.row_index == index_by_popcount(spec.row_matrix(), a));
      const auto lb = locate(spec, BitVector(20, b));
      const auto lab = locate(spec, BitVector(20, a ^ b));
      CHECK(lab.bank_index == (la.bank_index ^ lb.bank_index));
      CHECK(lab.row_index == (la.row_index ^ lb.row_index));
    }
  }
}

TEST_CASE("is_conflict") {
  CounterRng rng(22);
  const auto spec = random_spec(rng, 24, 5, 8);
  std::size_t agree = 0;
  for (int i = 0; i < 10000; ++i) {
    const BitVector a(24, rng() & low_mask(24)), b(24, rng() & low_mask(24));
    const bool brute = index_by_popcount(spec.bank_matrix(), a.bits()) ==
                           index_by_popcount(spec.bank_matrix(), b.bits()) &&
                       index_by_popcount(spec.row_matrix(), a.bits()) !=
                           index_by_popcount(spec.row_matrix(), b.bits());
    agree += is_conflict(spec, a, b) == brute;
    CHECK(is_conflict(spec, a, b) == is_conflict(spec, b, a));
    CHECK_FALSE(is_conflict(spec, a, a));
  }
  CHECK(agree == 10000);

  // bit 9 sits in exactly one row mask and no bank mask
  MappingSpec s(12, BitMatrix(12, std::vector<std::uint64_t>{0x10}),
                BitMatrix(12, std::vector<std::uint64_t>{0x200, 0x400}));
  CHECK(is_conflict(s, BitVector(12, 0x3), BitVector(12, 0x203)));
  CHECK_THROWS_AS(is_conflict(s, BitVector(12, 0), BitVector(11, 0)), Error);
}

TEST_CASE("presets") {
  const auto names = preset_names();
  CHECK(names.size() == 10);
  for (const auto& name : names) {
    const auto spec = load_preset(name);
    CHECK(rank(spec.bank_matrix()) == spec.k());
    CHECK(rank(stack(spec.bank_matrix(), spec.row_matrix())) == spec.k() + spec.k_prime());
    CHECK(spec.row_masks_synthetic());
    CHECK(parse_spec(serialize_spec(spec)) == spec);
  }
  const auto r630 = load_preset("poweredge-r630");
  CHECK(r630.k() == 10);
  const auto hex = to_hex_list(r630.bank_matrix());
  CHECK(std::find(hex.begin(), hex.end(), "0x800040") != hex.end());
  CHECK(std::find(hex.begin(), hex.end(), "0x88a2100") != hex.end());
  CHECK(to_hex_list(load_preset("pixel3a").bank_matrix()) ==
        std::vector<std::string>{"0x274e9000", "0x69d3a000", "0x53a74000", "0x80000000"});
  CHECK(load_preset("switch-p4").bank_matrix().word(4) == ((1ULL << 32) | (1ULL << 33)));
  CHECK_THROWS_AS(load_preset("commodore-64"), Error);
}

TEST_CASE("spec documents") {
  const auto minimal = parse_spec(
      R"({"address_bits": 8, "bank_masks": ["0x10"], "row_masks": ["0x20"], "label": "tiny"})");
  CHECK(minimal.k() == 1);
  CHECK(minimal.k_prime() == 1);
  CHECK_FALSE(minimal.row_masks_synthetic());

  try {
    parse_spec(R"({"address_bits": 8, "bank_masks": ["0x10", "0x20"], "row_masks": ["0x30"]})");
    FAIL("expected a rank violation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvariantViolation);
    CHECK(std::string(e.what()).find("0x30") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_spec(R"({"address_bits": 8, "bank_masks": ["0x0"]})"), Error);
  CHECK_THROWS_AS(parse_spec(R"({"address_bits": 4, "bank_masks": ["0x10"]})"), Error);
  CHECK_THROWS_AS(parse_spec("{not json"), Error);
  CHECK_THROWS_AS(parse_spec(R"({"bank_masks": []})"), Error);
}
