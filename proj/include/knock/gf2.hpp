#pragma once

// Dense bit-vector / bit-matrix algebra over GF(2).
//
// Vectors are packed into a single 64-bit word; bit i of the word is address
// bit i. Every matrix row has the matrix width and no bits set at or above it.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace knock {

inline constexpr unsigned kMaxWidth = 64;

/// Mask with the low `width` bits set.
constexpr std::uint64_t low_mask(unsigned width) {
  return width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
}

/// Lowercase `0x` hex rendering used by every document and trace format.
std::string to_hex(std::uint64_t word);
/// Parses `0x…` (prefix required, either case). Throws Parse on failure.
std::uint64_t parse_hex(std::string_view text);

class BitVector {
 public:
  BitVector(unsigned width, std::uint64_t bits);

  static BitVector zero(unsigned width) { return BitVector(width, 0); }
  static BitVector unit(unsigned width, unsigned position);
  static BitVector from_hex(std::string_view text, unsigned width);

  unsigned width() const { return width_; }
  std::uint64_t bits() const { return bits_; }

  bool test(unsigned position) const;
  unsigned weight() const;
  /// Position of the highest set bit, or -1 for the zero vector.
  int highest_bit() const;
  bool is_zero() const { return bits_ == 0; }

  std::string to_hex() const { return knock::to_hex(bits_); }

  BitVector operator^(const BitVector& other) const;
  BitVector operator&(const BitVector& other) const;
  bool operator==(const BitVector&) const = default;

 private:
  unsigned width_;
  std::uint64_t bits_;
};

bool parity(const BitVector& v);
/// p(a AND m).
bool masked_parity(const BitVector& a, const BitVector& m);

/// Word-level parity helper shared by the hot loops.
inline bool parity_word(std::uint64_t w) { return __builtin_parityll(w) != 0; }

class BitMatrix {
 public:
  explicit BitMatrix(unsigned width);
  BitMatrix(unsigned width, std::vector<std::uint64_t> rows);
  BitMatrix(unsigned width, const std::vector<BitVector>& rows);

  static BitMatrix identity(unsigned width);

  unsigned width() const { return width_; }
  std::size_t row_count() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  BitVector row(std::size_t i) const { return BitVector(width_, rows_.at(i)); }
  std::uint64_t word(std::size_t i) const { return rows_[i]; }
  std::span<const std::uint64_t> words() const { return rows_; }

  void append(const BitVector& v);
  void append(std::uint64_t word);

  bool operator==(const BitMatrix&) const = default;

 private:
  unsigned width_;
  std::vector<std::uint64_t> rows_;
};

/// Rows of `top` followed by rows of `bottom`.
BitMatrix stack(const BitMatrix& top, const BitMatrix& bottom);

/// Incremental row-echelon basis keyed by each row's highest set bit. This is
/// the workhorse behind rank, span membership and reduction.
class EchelonBasis {
 public:
  EchelonBasis() { slots_.fill(0); }

  /// Reduces `w` against the basis; zero iff `w` lies in the span.
  std::uint64_t reduce(std::uint64_t w) const;
  bool contains(std::uint64_t w) const { return reduce(w) == 0; }
  /// Adds `w` if independent. Returns true when the rank grew.
  bool insert(std::uint64_t w);
  std::size_t rank() const { return rank_; }

  /// Unique reduced row-echelon rows, highest pivot first.
  std::vector<std::uint64_t> reduced_rows() const;

 private:
  std::array<std::uint64_t, 64> slots_;
  std::size_t rank_ = 0;
};

struct RrefResult {
  BitMatrix reduced;
  std::size_t rank;
  std::vector<unsigned> pivots;  // descending
};

RrefResult rref(const BitMatrix& mat);
std::size_t rank(const BitMatrix& mat);
BitMatrix nullspace_basis(const BitMatrix& mat);
bool row_space_equal(const BitMatrix& a, const BitMatrix& b);
/// True when `v` lies in the row space of `mat`.
bool in_row_space(const BitMatrix& mat, const BitVector& v);

/// Index vector whose bit i is masked_parity(a, mat.row(i)).
BitVector apply_map(const BitMatrix& mat, const BitVector& a);
/// Same as apply_map, packed into a word; valid for matrices with zero rows.
std::uint64_t apply_map_word(const BitMatrix& mat, std::uint64_t a);

/// Renders every row with to_hex.
std::vector<std::string> to_hex_list(const BitMatrix& mat);
BitMatrix from_hex_list(const std::vector<std::string>& rows, unsigned width);

}  // namespace knock
