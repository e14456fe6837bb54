#include "knock/gf2.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>

#include "knock/error.hpp"

namespace knock {

namespace {

void check_width(unsigned width) {
  if (width == 0 || width > kMaxWidth) {
    throw Error(ErrorKind::InvariantViolation,
                "bit width must be in 1..64, got " + std::to_string(width));
  }
}

void check_fits(unsigned width, std::uint64_t word) {
  if ((word & ~low_mask(width)) != 0) {
    throw Error(ErrorKind::InvariantViolation,
                "value " + to_hex(word) + " does not fit in " + std::to_string(width) + " bits");
  }
}

void check_same_width(unsigned a, unsigned b, const char* what) {
  if (a != b) {
    throw Error(ErrorKind::WidthMismatch, std::string(what) + ": width " + std::to_string(a) +
                                              " vs " + std::to_string(b));
  }
}

}  // namespace

std::string to_hex(std::uint64_t word) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(word));
  return buf;
}

std::uint64_t parse_hex(std::string_view text) {
  if (text.size() < 3 || text[0] != '0' || (text[1] != 'x' && text[1] != 'X')) {
    throw Error(ErrorKind::Parse, "expected 0x-prefixed hex, got '" + std::string(text) + "'");
  }
  std::uint64_t value = 0;
  const char* first = text.data() + 2;
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value, 16);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorKind::Parse, "malformed hex value '" + std::string(text) + "'");
  }
  return value;
}

// ---------------------------------------------------------------- BitVector

BitVector::BitVector(unsigned width, std::uint64_t bits) : width_(width), bits_(bits) {
  check_width(width);
  check_fits(width, bits);
}

BitVector BitVector::unit(unsigned width, unsigned position) {
  if (position >= width) {
    throw Error(ErrorKind::InvariantViolation, "bit position " + std::to_string(position) +
                                                   " outside width " + std::to_string(width));
  }
  return BitVector(width, std::uint64_t{1} << position);
}

BitVector BitVector::from_hex(std::string_view text, unsigned width) {
  return BitVector(width, parse_hex(text));
}

bool BitVector::test(unsigned position) const {
  return position < width_ && ((bits_ >> position) & 1) != 0;
}

unsigned BitVector::weight() const { return static_cast<unsigned>(std::popcount(bits_)); }

int BitVector::highest_bit() const {
  return bits_ == 0 ? -1 : 63 - std::countl_zero(bits_);
}

BitVector BitVector::operator^(const BitVector& other) const {
  check_same_width(width_, other.width_, "xor");
  return BitVector(width_, bits_ ^ other.bits_);
}

BitVector BitVector::operator&(const BitVector& other) const {
  check_same_width(width_, other.width_, "and");
  return BitVector(width_, bits_ & other.bits_);
}

bool parity(const BitVector& v) { return parity_word(v.bits()); }

bool masked_parity(const BitVector& a, const BitVector& m) {
  check_same_width(a.width(), m.width(), "masked_parity");
  return parity_word(a.bits() & m.bits());
}

// ---------------------------------------------------------------- BitMatrix

BitMatrix::BitMatrix(unsigned width) : width_(width) { check_width(width); }

BitMatrix::BitMatrix(unsigned width, std::vector<std::uint64_t> rows)
    : width_(width), rows_(std::move(rows)) {
  check_width(width);
  for (auto w : rows_) check_fits(width, w);
}

BitMatrix::BitMatrix(unsigned width, const std::vector<BitVector>& rows) : width_(width) {
  check_width(width);
  rows_.reserve(rows.size());
  for (const auto& v : rows) append(v);
}

BitMatrix BitMatrix::identity(unsigned width) {
  BitMatrix m(width);
  for (unsigned i = width; i-- > 0;) m.rows_.push_back(std::uint64_t{1} << i);
  return m;
}

void BitMatrix::append(const BitVector& v) {
  check_same_width(width_, v.width(), "append");
  rows_.push_back(v.bits());
}

void BitMatrix::append(std::uint64_t word) {
  check_fits(width_, word);
  rows_.push_back(word);
}

BitMatrix stack(const BitMatrix& top, const BitMatrix& bottom) {
  check_same_width(top.width(), bottom.width(), "stack");
  std::vector<std::uint64_t> rows(top.words().begin(), top.words().end());
  rows.insert(rows.end(), bottom.words().begin(), bottom.words().end());
  return BitMatrix(top.width(), std::move(rows));
}

// ------------------------------------------------------------- EchelonBasis

std::uint64_t EchelonBasis::reduce(std::uint64_t w) const {
  while (w != 0) {
    const int top = 63 - std::countl_zero(w);
    if (slots_[top] == 0) return w;
    w ^= slots_[top];
  }
  return 0;
}

bool EchelonBasis::insert(std::uint64_t w) {
  w = reduce(w);
  if (w == 0) return false;
  slots_[63 - std::countl_zero(w)] = w;
  ++rank_;
  return true;
}

std::vector<std::uint64_t> EchelonBasis::reduced_rows() const {
  // Slots hold an echelon form; clear every lower pivot bit from each row,
  // lowest pivot first so each row used for elimination is already reduced.
  std::array<std::uint64_t, 64> rows = slots_;
  for (int p = 0; p < 64; ++p) {
    if (rows[p] == 0) continue;
    for (int q = p - 1; q >= 0; --q) {
      if (rows[q] != 0 && ((rows[p] >> q) & 1)) rows[p] ^= rows[q];
    }
  }
  std::vector<std::uint64_t> out;
  out.reserve(rank_);
  for (int p = 63; p >= 0; --p) {
    if (rows[p] != 0) out.push_back(rows[p]);
  }
  return out;
}

// --------------------------------------------------------------- algorithms

RrefResult rref(const BitMatrix& mat) {
  EchelonBasis basis;
  for (auto w : mat.words()) basis.insert(w);
  auto rows = basis.reduced_rows();
  std::vector<unsigned> pivots;
  pivots.reserve(rows.size());
  for (auto w : rows) pivots.push_back(63u - static_cast<unsigned>(std::countl_zero(w)));
  const std::size_t r = rows.size();
  return {BitMatrix(mat.width(), std::move(rows)), r, std::move(pivots)};
}

std::size_t rank(const BitMatrix& mat) {
  EchelonBasis basis;
  for (auto w : mat.words()) basis.insert(w);
  return basis.rank();
}

BitMatrix nullspace_basis(const BitMatrix& mat) {
  const auto reduced = rref(mat);
  std::uint64_t pivot_mask = 0;
  for (auto p : reduced.pivots) pivot_mask |= std::uint64_t{1} << p;

  // One solution per free column f: set f, then set the pivot of every
  // reduced row that has f, which zeroes that row's inner product.
  std::vector<std::uint64_t> solutions;
  for (unsigned f = 0; f < mat.width(); ++f) {
    if ((pivot_mask >> f) & 1) continue;
    std::uint64_t v = std::uint64_t{1} << f;
    for (std::size_t i = 0; i < reduced.rank; ++i) {
      if ((reduced.reduced.word(i) >> f) & 1) v |= std::uint64_t{1} << reduced.pivots[i];
    }
    solutions.push_back(v);
  }
  return rref(BitMatrix(mat.width(), std::move(solutions))).reduced;
}

bool row_space_equal(const BitMatrix& a, const BitMatrix& b) {
  check_same_width(a.width(), b.width(), "row_space_equal");
  const auto ra = rank(a);
  return ra == rank(b) && ra == rank(stack(a, b));
}

bool in_row_space(const BitMatrix& mat, const BitVector& v) {
  check_same_width(mat.width(), v.width(), "in_row_space");
  EchelonBasis basis;
  for (auto w : mat.words()) basis.insert(w);
  return basis.contains(v.bits());
}

std::uint64_t apply_map_word(const BitMatrix& mat, std::uint64_t a) {
  std::uint64_t out = 0;
  for (std::size_t i = 0; i < mat.row_count(); ++i) {
    out |= static_cast<std::uint64_t>(parity_word(a & mat.word(i))) << i;
  }
  return out;
}

BitVector apply_map(const BitMatrix& mat, const BitVector& a) {
  check_same_width(mat.width(), a.width(), "apply_map");
  if (mat.row_count() == 0 || mat.row_count() > kMaxWidth) {
    throw Error(ErrorKind::InvariantViolation,
                "apply_map needs 1..64 rows, got " + std::to_string(mat.row_count()));
  }
  return BitVector(static_cast<unsigned>(mat.row_count()), apply_map_word(mat, a.bits()));
}

std::vector<std::string> to_hex_list(const BitMatrix& mat) {
  std::vector<std::string> out;
  out.reserve(mat.row_count());
  for (auto w : mat.words()) out.push_back(to_hex(w));
  return out;
}

BitMatrix from_hex_list(const std::vector<std::string>& rows, unsigned width) {
  BitMatrix m(width);
  for (const auto& s : rows) m.append(BitVector::from_hex(s, width));
  return m;
}

}  // namespace knock
