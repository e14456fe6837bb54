#pragma once

#include <cstdint>

namespace knock {

struct BoundParams {
  unsigned n = 0;        // address bits
  unsigned k = 0;        // bank-space dimension
  unsigned k_prime = 0;  // row-space dimension (row bound only)
  double theta = 0.0;    // mislabel rate
  double epsilon = 0.01; // failure probability
};

/// Pairs needed so the conflict differences pin the bank space with
/// probability at least 1 - epsilon:
///   m >= 2^k / (1 - theta) * log2((2^(n-k) - 1) / epsilon)
std::uint64_t bank_sample_bound(const BoundParams& p);

/// Same-bank pairs needed for the row space:
///   m' >= 2^k' / (1 - theta) * log2((2^(n-k-k') - 1) / epsilon)
std::uint64_t row_sample_bound(const BoundParams& p);

}  // namespace knock
