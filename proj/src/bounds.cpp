#include "knock/bounds.hpp"

#include <cmath>
#include <string>

#include "knock/error.hpp"

namespace knock {

namespace {

void check_common(const BoundParams& p) {
  if (p.n == 0 || p.n > 64) throw Error(ErrorKind::Usage, "n must be in 1..64");
  if (!(p.theta >= 0.0 && p.theta < 1.0)) {
    throw Error(ErrorKind::Usage, "theta must be in [0, 1), got " + std::to_string(p.theta));
  }
  if (!(p.epsilon > 0.0 && p.epsilon < 1.0)) {
    throw Error(ErrorKind::Usage, "epsilon must be in (0, 1), got " + std::to_string(p.epsilon));
  }
}

// 2^k / (1 - theta) * log2((2^t - 1) / epsilon), rounded up. Long double keeps
// the -1 exact up to t = 63.
std::uint64_t evaluate(unsigned k, unsigned t, double theta, double epsilon) {
  const long double span = std::ldexp(1.0L, static_cast<int>(t)) - 1.0L;
  const long double value = std::ldexp(1.0L, static_cast<int>(k)) / (1.0L - theta) *
                            std::log2(span / static_cast<long double>(epsilon));
  return static_cast<std::uint64_t>(std::ceil(value));
}

}  // namespace

std::uint64_t bank_sample_bound(const BoundParams& p) {
  check_common(p);
  if (p.k >= p.n) throw Error(ErrorKind::Usage, "k must be below n");
  return evaluate(p.k, p.n - p.k, p.theta, p.epsilon);
}

std::uint64_t row_sample_bound(const BoundParams& p) {
  check_common(p);
  if (p.k_prime == 0) throw Error(ErrorKind::Usage, "k_prime must be >= 1");
  if (p.k + p.k_prime >= p.n) throw Error(ErrorKind::Usage, "k + k_prime must be below n");
  return evaluate(p.k_prime, p.n - p.k - p.k_prime, p.theta, p.epsilon);
}

}  // namespace knock
