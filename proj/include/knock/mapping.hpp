#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "knock/gf2.hpp"

namespace knock {

/// Observable DRAM location of an address: combined channel/rank/bank index
/// and row index. Columns are whatever address bits no mask touches.
struct DramLocation {
  std::uint64_t bank_index = 0;
  std::uint64_t row_index = 0;
  unsigned bank_bits = 0;
  unsigned row_bits = 0;

  bool operator==(const DramLocation&) const = default;
};

/// A complete linear addressing function F = [M; R].
///
/// Construction enforces: every mask is nonzero and fits the address width,
/// the bank masks are independent, and stacking the row masks under them
/// adds exactly one rank per row mask.
class MappingSpec {
 public:
  MappingSpec(unsigned address_bits, BitMatrix bank_matrix, BitMatrix row_matrix,
              std::string label = {}, bool row_masks_synthetic = false);

  unsigned address_bits() const { return address_bits_; }
  const BitMatrix& bank_matrix() const { return bank_; }
  const BitMatrix& row_matrix() const { return row_; }
  std::size_t k() const { return bank_.row_count(); }
  std::size_t k_prime() const { return row_.row_count(); }
  const std::string& label() const { return label_; }
  bool row_masks_synthetic() const { return row_masks_synthetic_; }

  std::uint64_t bank_index(std::uint64_t address) const { return apply_map_word(bank_, address); }
  std::uint64_t row_index(std::uint64_t address) const { return apply_map_word(row_, address); }
  // Both maps are linear, so the indices agree iff the difference maps to zero.
  bool conflict(std::uint64_t a, std::uint64_t b) const {
    return bank_index(a ^ b) == 0 && row_index(a ^ b) != 0;
  }

  bool operator==(const MappingSpec&) const = default;

 private:
  unsigned address_bits_;
  BitMatrix bank_;
  BitMatrix row_;
  std::string label_;
  bool row_masks_synthetic_;
};

DramLocation locate(const MappingSpec& spec, const BitVector& a);
/// Same bank, different row.
bool is_conflict(const MappingSpec& spec, const BitVector& a, const BitVector& b);

/// Bank/channel masks reported for real platforms, with synthetic row masks.
MappingSpec load_preset(std::string_view name);
std::vector<std::string> preset_names();

/// Mapping-spec document (JSON): address_bits, bank_masks, row_masks,
/// row_masks_synthetic, label.
MappingSpec parse_spec(std::string_view text);
std::string serialize_spec(const MappingSpec& spec);

MappingSpec read_spec_file(const std::string& path);
void write_spec_file(const MappingSpec& spec, const std::string& path);

}  // namespace knock
