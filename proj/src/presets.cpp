// Platform presets. Bank/channel masks are taken verbatim from published
// reverse-engineering results; no row masks were published, so each preset
// gets a synthetic row matrix of single-bit masks directly above the highest
// bank-mask bit.

#include <algorithm>
#include <bit>
#include <initializer_list>

#include "knock/error.hpp"
#include "knock/mapping.hpp"

namespace knock {

namespace {

std::uint64_t bits(std::initializer_list<unsigned> positions) {
  std::uint64_t w = 0;
  for (auto p : positions) w |= std::uint64_t{1} << p;
  return w;
}

struct Preset {
  const char* name;
  const char* label;
  unsigned capacity_log2;  // log2 of installed DRAM in bytes
  std::vector<std::uint64_t> bank_masks;
};

const std::vector<Preset>& table() {
  static const std::vector<Preset> presets = {
      {"rpi3b+", "Raspberry Pi 3B+, 1 GB LPDDR2", 30, {bits({13}), bits({14}), bits({15})}},
      {"pixel3a", "Google Pixel 3a, 4 GB LPDDR4", 32,
       {0x274e9000, 0x69d3a000, 0x53a74000, 0x80000000}},
      {"switch-p4", "Switch P4, 8 GB DDR4", 33,
       {bits({6, 20}), bits({17, 21}), bits({18, 22}), bits({19, 23}), bits({32, 33})}},
      {"precision-5810", "Dell Precision Tower 5810, 32 GB DDR4", 35,
       {0x8000, 0x100000000, 0x200000000, 0x400000000, 0x800040, 0x1100000, 0x2200000,
        0x4400000, 0x55080, 0x88a2100}},
      {"precision-7875", "Dell Precision Tower 7875, 64 GB DDR5", 36,
       {0x84201000, 0x40214100, 0x188400200, 0x1421002000, 0x310800400, 0x1842100800,
        0xff80000, 0xd6f700440}},
      {"poweredge-r630", "Dell PowerEdge R630, 128 GB DDR4", 37,
       {0x800040, 0xa00000000, 0xc00000000, 0x3000000000, 0x4408000, 0x2820000000, 0x5500000,
        0x6600000, 0x88a2100, 0x4455080}},
      {"hpe-dl360", "HPE ProLiant DL360 Gen10+, 256 GB DDR4", 38,
       {bits({15}), bits({35}), bits({36}), bits({37}), bits({6, 23}), bits({20, 24}),
        bits({21, 25}), bits({22, 26}), 0x4004100, 0x6024800}},
      {"dgx1", "Nvidia DGX-1, 512 GB DDR4", 39,
       {bits({37}), bits({38}), bits({16}), bits({15}), bits({21, 25}), bits({6, 24}),
        bits({7, 17}), bits({23, 27}), bits({22, 26}), bits({8, 12, 14, 18, 20, 24})}},
      {"sr630v2", "ThinkSystem SR630 V2, 256 GB DDR4", 38,
       {bits({16}), bits({35}), bits({36}), bits({37}), bits({6, 24}), bits({21, 25}),
        bits({22, 26}), bits({23, 27}), bits({8, 14, 26}), bits({9, 15, 27}),
        bits({11, 14, 17, 25, 26})}},
      {"ibm-s822lc", "IBM PowerNV S822LC, 128 GB DDR4", 37,
       {bits({7}), bits({8}), bits({9}), bits({10}), bits({11}), bits({12}), bits({13}),
        bits({14}), bits({15}), bits({32, 34}), bits({33, 34})}},
  };
  return presets;
}

MappingSpec build(const Preset& p) {
  std::uint64_t support = 0;
  for (auto m : p.bank_masks) support |= m;
  const unsigned highest = 63u - static_cast<unsigned>(std::countl_zero(support));
  // Row count fills the installed capacity above the bank bits, but never
  // fewer than four rows so every preset exercises the row solver.
  const int room = static_cast<int>(p.capacity_log2) - 1 - static_cast<int>(highest);
  const unsigned k_prime = static_cast<unsigned>(std::max(4, room));
  const unsigned n = highest + 1 + k_prime;

  BitMatrix rows(n);
  for (unsigned b = highest + 1; b < n; ++b) rows.append(std::uint64_t{1} << b);
  return MappingSpec(n, BitMatrix(n, p.bank_masks), rows, p.label, true);
}

}  // namespace

MappingSpec load_preset(std::string_view name) {
  for (const auto& p : table()) {
    if (name == p.name) return build(p);
  }
  throw Error(ErrorKind::UnknownPreset, "unknown preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : table()) out.emplace_back(p.name);
  return out;
}

}  // namespace knock
